// SPDX-License-Identifier: Apache-2.0
//! Per-cell delay annotation (the workbench's SDF stand-in).

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::aging::{aging_factor, AgingParams, AgingState};
use super::TimingError;
use crate::netlist::{CellKind, Netlist};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDelay {
    /// Picoseconds.
    pub intrinsic: f64,
    /// Picoseconds per load beyond the first.
    pub load_coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseDelayLib {
    pub cells: BTreeMap<CellKind, CellDelay>,
}

impl Default for BaseDelayLib {
    fn default() -> Self {
        let t = [
            (CellKind::INV, 8.0),
            (CellKind::BUF, 10.0),
            (CellKind::NAND2, 12.0),
            (CellKind::NOR2, 14.0),
            (CellKind::AND2, 16.0),
            (CellKind::OR2, 16.0),
            (CellKind::XOR2, 24.0),
            (CellKind::XNOR2, 24.0),
            (CellKind::MUX2, 22.0),
            (CellKind::DFF, 20.0),
        ];
        let mut cells: BTreeMap<_, _> =
            t.into_iter().map(|(k, d)| (k, CellDelay { intrinsic: d, load_coeff: 3.0 })).collect();
        for k in [CellKind::CONST0, CellKind::CONST1] {
            cells.insert(k, CellDelay { intrinsic: 0.0, load_coeff: 0.0 });
        }
        Self { cells }
    }
}

impl BaseDelayLib {
    pub fn get(&self, k: CellKind) -> Result<CellDelay, TimingError> {
        self.cells.get(&k).copied().ok_or(TimingError::MissingLibEntry(k))
    }

    pub fn check(&self) -> Result<(), TimingError> {
        for k in CellKind::ALL {
            let d = self.get(k)?;
            let ok = if k.is_const() {
                d.intrinsic >= 0.0 && d.load_coeff >= 0.0
            } else {
                d.intrinsic > 0.0 && d.load_coeff >= 0.0
            };
            if !ok || !d.intrinsic.is_finite() || !d.load_coeff.is_finite() {
                return Err(TimingError::BadLibEntry(k));
            }
        }
        Ok(())
    }
}

/// Process variation of one simulated IC instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationSpec {
    /// Signed die-to-die shift applied to every cell.
    pub global_frac: f64,
    /// Standard deviation of the per-cell on-chip term.
    pub local_sigma: f64,
    pub truncate_sigma: f64,
    pub seed: u64,
}

impl VariationSpec {
    pub fn new(seed: u64) -> Self {
        Self { global_frac: 0.05, local_sigma: 0.04, truncate_sigma: 3.0, seed }
    }

    /// Default magnitudes with the sign of the global term drawn from `seed`.
    pub fn instance(seed: u64) -> Self {
        let sign = if splitmix64(seed ^ 0x5eed_5eed) & 1 == 0 { 1.0 } else { -1.0 };
        Self { global_frac: 0.05 * sign, ..Self::new(seed) }
    }

    pub fn check(&self) -> Result<(), TimingError> {
        if self.global_frac.abs() > 0.2 || self.local_sigma < 0.0 || self.truncate_sigma < 0.0 {
            return Err(TimingError::BadVariation(*self));
        }
        Ok(())
    }

    /// Local factor `g` for one cell, deterministic in (seed, cell id).
    pub fn local_term(&self, cell_id: &str) -> f64 {
        if self.local_sigma == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key_hash(self.seed, cell_id));
        let normal = Normal::new(0.0, self.local_sigma).expect("finite sigma");
        let bound = self.truncate_sigma * self.local_sigma;
        loop {
            let g: f64 = normal.sample(&mut rng);
            if g.abs() <= bound {
                return g;
            }
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// FNV-1a over the seed and identifier, finished with splitmix.
fn key_hash(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(id.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

/// Propagation delay of every cell for one (aging state, IC instance).
#[derive(Clone, Debug, PartialEq)]
pub struct DelayAnnotation {
    pub duty: AgingState,
    pub seed: Option<u64>,
    ids: Vec<String>,
    delays: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AnnotationDoc {
    duty: AgingState,
    seed: Option<u64>,
    delays: BTreeMap<String, f64>,
}

impl Serialize for DelayAnnotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AnnotationDoc {
            duty: self.duty,
            seed: self.seed,
            delays: self.ids.iter().cloned().zip(self.delays.iter().copied()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DelayAnnotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = AnnotationDoc::deserialize(d)?;
        let (ids, delays) = doc.delays.into_iter().unzip();
        Ok(Self { duty: doc.duty, seed: doc.seed, ids, delays })
    }
}

impl DelayAnnotation {
    pub fn from_cells(duty: AgingState, seed: Option<u64>, ids: Vec<String>, delays: Vec<f64>) -> Self {
        assert_eq!(ids.len(), delays.len());
        Self { duty, seed, ids, delays }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn get(&self, cell_id: &str) -> Option<f64> {
        self.ids.iter().position(|i| i == cell_id).map(|p| self.delays[p])
    }

    /// Delays in the cell order of `n`, checking that every cell is covered
    /// exactly once.
    pub fn delays_for<'a>(&'a self, n: &Netlist) -> Result<Cow<'a, [f64]>, TimingError> {
        let cells = n.cells();
        if self.ids.len() == cells.len() && self.ids.iter().zip(cells).all(|(i, c)| *i == c.id) {
            return Ok(Cow::Borrowed(&self.delays));
        }
        let map: HashMap<&str, f64> = self.ids.iter().map(String::as_str).zip(self.delays.iter().copied()).collect();
        if map.len() != cells.len() {
            return Err(TimingError::Coverage(format!(
                "annotation has {} cells, netlist has {}",
                map.len(),
                cells.len()
            )));
        }
        cells
            .iter()
            .map(|c| map.get(c.id.as_str()).copied().ok_or_else(|| TimingError::Coverage(c.id.clone())))
            .collect::<Result<Vec<_>, _>>()
            .map(Cow::Owned)
    }

    /// Multiplies every delay by `factor`.
    pub fn scaled(&self, duty: AgingState, factor: f64) -> Self {
        Self { duty, seed: self.seed, ids: self.ids.clone(), delays: self.delays.iter().map(|d| d * factor).collect() }
    }
}

/// Unaged, unvaried delay of every cell: intrinsic plus load term.
pub fn base_delays(n: &Netlist, lib: &BaseDelayLib) -> Result<Vec<f64>, TimingError> {
    let fanout = n.fanout_counts();
    n.cells()
        .iter()
        .map(|c| {
            let d = lib.get(c.kind)?;
            let extra = fanout[c.output.idx()].saturating_sub(1) as f64;
            Ok(d.intrinsic + d.load_coeff * extra)
        })
        .collect()
}

pub fn annotate(
    n: &Netlist,
    lib: &BaseDelayLib,
    p: &AgingParams,
    s: AgingState,
    v: Option<&VariationSpec>,
) -> Result<DelayAnnotation, TimingError> {
    lib.check()?;
    if let Some(v) = v {
        v.check()?;
    }
    let aging = aging_factor(p, s)?;
    let base = base_delays(n, lib)?;
    let delays = n
        .cells()
        .iter()
        .zip(base)
        .map(|(c, b)| {
            let (global, local) = match v {
                Some(v) => (v.global_frac, v.local_term(&c.id)),
                None => (0.0, 0.0),
            };
            b * aging * (1.0 + global) * (1.0 + local)
        })
        .collect();
    Ok(DelayAnnotation {
        duty: s,
        seed: v.map(|v| v.seed),
        ids: n.cells().iter().map(|c| c.id.clone()).collect(),
        delays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::NetlistBuilder;

    fn inv_with_fanout(fo: usize) -> Netlist {
        let mut b = NetlistBuilder::new("fo");
        let a = b.input("a");
        let y = b.gate(CellKind::INV, &[a]);
        for _ in 0..fo {
            let z = b.gate(CellKind::BUF, &[y]);
            b.output(z);
        }
        b.finish().unwrap()
    }

    fn inv_delay(n: &Netlist, s: AgingState) -> f64 {
        let a = annotate(n, &BaseDelayLib::default(), &AgingParams::default(), s, None).unwrap();
        a.get("g0").unwrap()
    }

    #[test]
    fn formula_examples() {
        assert_eq!(inv_delay(&inv_with_fanout(1), AgingState::FRESH), 8.0);
        assert_eq!(inv_delay(&inv_with_fanout(3), AgingState::FRESH), 14.0);
        let aged = inv_delay(&inv_with_fanout(1), AgingState::MAX);
        assert!((aged - 8.0 * 0.49 / (0.95 * 0.4225)).abs() < 1e-12);
        assert!((aged - 9.766).abs() < 1e-3);
    }

    #[test]
    fn variation_is_keyed_and_bounded() {
        let n = inv_with_fanout(4);
        let lib = BaseDelayLib::default();
        let p = AgingParams::default();
        let base = annotate(&n, &lib, &p, AgingState::FRESH, None).unwrap();
        let v = VariationSpec::new(7);
        let a1 = annotate(&n, &lib, &p, AgingState::FRESH, Some(&v)).unwrap();
        let a2 = annotate(&n, &lib, &p, AgingState::FRESH, Some(&v)).unwrap();
        assert_eq!(a1, a2);
        let b = base.delays_for(&n).unwrap();
        let d = a1.delays_for(&n).unwrap();
        for (x, y) in b.iter().zip(d.iter()) {
            assert!(*y >= x * 0.95 * 0.88 - 1e-12 && *y <= x * 1.05 * 1.12 + 1e-12);
        }
        assert_ne!(b, d);
        let other = annotate(&n, &lib, &p, AgingState::FRESH, Some(&VariationSpec::new(8))).unwrap();
        assert_ne!(a1.delays_for(&n).unwrap(), other.delays_for(&n).unwrap());
    }

    #[test]
    fn json_shape_and_roundtrip() {
        let n = inv_with_fanout(2);
        let a = annotate(&n, &BaseDelayLib::default(), &AgingParams::default(), AgingState::new(30).unwrap(), None)
            .unwrap();
        let j = serde_json::to_value(&a).unwrap();
        assert_eq!(j["duty"], 30);
        assert!(j["seed"].is_null());
        assert!(j["delays"]["g0"].is_f64());
        let back: DelayAnnotation = serde_json::from_value(j).unwrap();
        assert_eq!(back.delays_for(&n).unwrap(), a.delays_for(&n).unwrap());
    }

    #[test]
    fn coverage_checked() {
        let n = inv_with_fanout(2);
        let m = inv_with_fanout(3);
        let a = annotate(&n, &BaseDelayLib::default(), &AgingParams::default(), AgingState::FRESH, None).unwrap();
        assert!(matches!(a.delays_for(&m), Err(TimingError::Coverage(_))));
    }
}
