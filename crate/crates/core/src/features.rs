// SPDX-License-Identifier: Apache-2.0
//! Bit-error features of sampled outputs against the expected word.
//!
//! For an observed word `y` and golden word `y0`:
//! `f1` counts 0->1 flips, `f2` counts 1->0 flips, and `f3`/`f4` sum `2^r`
//! over the flipped positions `r` of each kind.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::sim::{GridRow, OutputGrid};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("width mismatch: {0} vs {1}")]
    Width(usize, usize),
    #[error("grid cell (clock {0}, duty {1}) is missing")]
    MissingCell(usize, usize),
    #[error("no tensors to bin")]
    Empty,
    #[error("bin size must be at least 1")]
    ZeroBin,
    #[error("tensor dims {0:?} and {1:?} differ")]
    Dims([usize; 3], [usize; 3]),
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Positions holding ones and zeros in the low `m` bits of `a`.
pub fn bit_sets(a: &Bits, m: usize) -> (Vec<usize>, Vec<usize>) {
    (0..m).partition(|&r| a.bit(r))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }
}

pub fn feature_vector(y: &Bits, y0: &Bits) -> Result<FeatureVector, FeatureError> {
    if y.width() != y0.width() {
        return Err(FeatureError::Width(y.width(), y0.width()));
    }
    let rise = !y0.value() & y.value();
    let fall = y0.value() & !y.value();
    Ok(FeatureVector { f1: rise.count_ones() as f64, f2: fall.count_ones() as f64, f3: rise as f64, f4: fall as f64 })
}

/// `n_C x n_A x 4` features of one input, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(n_c: usize, n_a: usize) -> Self {
        Self { dims: [n_c, n_a, 4], values: vec![0.0; n_c * n_a * 4] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.dims[1] + j) * 4 + k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn feature_tensor(row: &GridRow, n_c: usize, n_a: usize) -> Result<FeatureTensor, FeatureError> {
    let mut t = FeatureTensor::zeros(n_c, n_a);
    for i in 0..n_c {
        for j in 0..n_a {
            let y = row.observed.get(i * n_a + j).and_then(|o| o.as_ref()).ok_or(FeatureError::MissingCell(i, j))?;
            let f = feature_vector(y, &row.golden)?;
            t.values[(i * n_a + j) * 4..][..4].copy_from_slice(&f.as_array());
        }
    }
    Ok(t)
}

pub fn grid_tensors(g: &OutputGrid) -> Result<Vec<FeatureTensor>, FeatureError> {
    g.rows.iter().map(|r| feature_tensor(r, g.n_clocks(), g.n_duties())).collect()
}

/// Element-wise sum of `k` consecutive tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Bin {
    pub k: usize,
    pub tensor: FeatureTensor,
}

/// Groups consecutive tensors by `k`; a trailing partial group is dropped.
pub fn bin_tensors(tensors: &[FeatureTensor], k: usize) -> Result<Vec<Bin>, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroBin);
    }
    let first = tensors.first().ok_or(FeatureError::Empty)?;
    if let Some(t) = tensors.iter().find(|t| t.dims != first.dims) {
        return Err(FeatureError::Dims(first.dims, t.dims));
    }
    let dropped = tensors.len() % k;
    if dropped > 0 {
        log::info!("binning {} tensors by {k}: dropping the last {dropped}", tensors.len());
    }
    Ok(tensors
        .chunks_exact(k)
        .map(|group| {
            let mut acc = FeatureTensor { dims: first.dims, values: vec![0.0; first.len()] };
            for t in group {
                for (a, v) in acc.values.iter_mut().zip(&t.values) {
                    *a += v;
                }
            }
            Bin { k, tensor: acc }
        })
        .collect())
}

/// Mean tensor over a set, e.g. for heat maps.
pub fn mean_tensor(tensors: &[FeatureTensor]) -> Option<FeatureTensor> {
    let first = tensors.first()?;
    let mut acc = FeatureTensor { dims: first.dims, values: vec![0.0; first.len()] };
    for t in tensors {
        for (a, v) in acc.values.iter_mut().zip(&t.values) {
            *a += v;
        }
    }
    let n = tensors.len() as f64;
    acc.values.iter_mut().for_each(|v| *v /= n);
    Some(acc)
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    input: String,
    dims: [usize; 3],
    values: Vec<f64>,
}

pub fn write_tensors_jsonl<W: Write>(inputs: &[Bits], tensors: &[FeatureTensor], mut w: W) -> std::io::Result<()> {
    for (x, t) in inputs.iter().zip(tensors) {
        let rec = TensorRecord { input: x.to_hex(), dims: t.dims, values: t.values.clone() };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_tensors_jsonl<R: BufRead>(r: R, width_in: usize) -> Result<(Vec<Bits>, Vec<FeatureTensor>), FeatureError> {
    let mut inputs = Vec::new();
    let mut tensors = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TensorRecord = serde_json::from_str(&line).map_err(|e| FeatureError::Parse(i + 1, e.to_string()))?;
        if rec.values.len() != rec.dims.iter().product::<usize>() {
            return Err(FeatureError::Parse(i + 1, "values do not match dims".into()));
        }
        inputs.push(Bits::from_hex(&rec.input, width_in).map_err(|e| FeatureError::Parse(i + 1, e.to_string()))?);
        tensors.push(FeatureTensor { dims: rec.dims, values: rec.values });
    }
    Ok((inputs, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: u128, w: usize) -> Bits {
        Bits::new(v, w).unwrap()
    }

    #[test]
    fn bit_sets_examples() {
        assert_eq!(bit_sets(&b(0b101, 3), 3), (vec![0, 2], vec![1]));
        assert_eq!(bit_sets(&b(0, 4), 4), (vec![], vec![0, 1, 2, 3]));
    }

    #[test]
    fn vector_examples() {
        let fv = |y, y0| feature_vector(&b(y, 4), &b(y0, 4)).unwrap().as_array();
        assert_eq!(fv(0b0110, 0b0110), [0.0; 4]);
        assert_eq!(fv(0b0110, 0b1010), [1.0, 1.0, 4.0, 8.0]);
        assert_eq!(fv(0b0000, 0b1111), [0.0, 4.0, 0.0, 15.0]);
        assert!(feature_vector(&b(0, 4), &b(0, 5)).is_err());
    }

    #[test]
    fn tensor_locality() {
        let y0 = b(0b1000, 4);
        let mut row = GridRow { input: b(0, 2), golden: y0, observed: vec![Some(y0); 6] };
        assert!(feature_tensor(&row, 3, 2).unwrap().values.iter().all(|&v| v == 0.0));
        row.observed[2 * 2 + 1] = Some(b(0b1001, 4));
        let t = feature_tensor(&row, 3, 2).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let want = if (i, j) == (2, 1) { [1.0, 0.0, 1.0, 0.0] } else { [0.0; 4] };
                assert_eq!([t.get(i, j, 0), t.get(i, j, 1), t.get(i, j, 2), t.get(i, j, 3)], want);
            }
        }
        row.observed[0] = None;
        assert!(matches!(feature_tensor(&row, 3, 2), Err(FeatureError::MissingCell(0, 0))));
    }

    #[test]
    fn binning() {
        let t = FeatureTensor { dims: [1, 1, 4], values: vec![1.0, 2.0, 3.0, 4.0] };
        let one = bin_tensors(std::slice::from_ref(&t), 1).unwrap();
        assert_eq!(one[0].tensor, t);
        let two = bin_tensors(&[t.clone(), t.clone()], 2).unwrap();
        assert_eq!(two[0].tensor.values, vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(bin_tensors(&vec![t.clone(); 23], 5).unwrap().len(), 4);
        assert!(matches!(bin_tensors(&[], 5), Err(FeatureError::Empty)));
        assert!(matches!(bin_tensors(&[t], 0), Err(FeatureError::ZeroBin)));
    }

    #[test]
    fn jsonl_roundtrip() {
        let ins = vec![b(3, 4), b(9, 4)];
        let ts = vec![
            FeatureTensor { dims: [1, 2, 4], values: (0..8).map(|v| v as f64).collect() },
            FeatureTensor { dims: [1, 2, 4], values: vec![0.5; 8] },
        ];
        let mut buf = Vec::new();
        write_tensors_jsonl(&ins, &ts, &mut buf).unwrap();
        assert!(std::str::from_utf8(&buf).unwrap().starts_with("{\"input\":\"3\",\"dims\":[1,2,4],\"values\":[0.0,1.0"));
        assert_eq!(read_tensors_jsonl(&buf[..], 4).unwrap(), (ins, ts));
    }
}
