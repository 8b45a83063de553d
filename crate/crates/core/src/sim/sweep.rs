// SPDX-License-Identifier: Apache-2.0
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Compiled, Scratch, SimConfig, SimError, ZeroDelay};
use crate::bits::Bits;
use crate::netlist::Netlist;
use crate::timing::{AgingState, DelayAnnotation};

/// Observed words for every input, clock period and aging state.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputGrid {
    /// Picoseconds, ascending.
    pub clocks: Vec<f64>,
    pub duties: Vec<AgingState>,
    pub width_out: usize,
    pub rows: Vec<GridRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub input: Bits,
    pub golden: Bits,
    /// Row-major over (clock, duty); `None` where the run failed.
    pub observed: Vec<Option<Bits>>,
}

impl GridRow {
    pub fn get(&self, n_duties: usize, i: usize, j: usize) -> Option<&Bits> {
        self.observed[i * n_duties + j].as_ref()
    }
}

impl OutputGrid {
    pub fn n_clocks(&self) -> usize {
        self.clocks.len()
    }

    pub fn n_duties(&self) -> usize {
        self.duties.len()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().map(|r| r.observed.iter().filter(|o| o.is_none()).count()).sum()
    }
}

/// Simulates every input at every (clock, annotation) pair.
///
/// All annotations must come from the same variation instance, one per
/// aging state. Failed runs are kept as `None`; only setup errors abort.
pub fn sweep(
    n: &Netlist,
    annotations: &[DelayAnnotation],
    clocks: &[f64],
    inputs: &[Bits],
    read_cycle: usize,
) -> Result<OutputGrid, SimError> {
    if clocks.is_empty() || annotations.is_empty() {
        return Err(SimError::BadConfig(SimConfig::new(clocks.first().copied().unwrap_or(0.0), read_cycle)));
    }
    for w in clocks.windows(2) {
        if !(w[0] <= w[1]) {
            return Err(SimError::BadConfig(SimConfig::new(w[1], read_cycle)));
        }
    }
    for &c in clocks {
        SimConfig::new(c, read_cycle).check()?;
    }
    let compiled = annotations.iter().map(|a| Compiled::new(n, a)).collect::<Result<Vec<_>, _>>()?;
    let zd = ZeroDelay::new(n)?;
    let n_a = annotations.len();

    let rows = inputs
        .par_iter()
        .map_init(Scratch::default, |s, x| {
            let golden = zd.run(x, read_cycle)?;
            let mut observed = Vec::with_capacity(clocks.len() * n_a);
            for &t in clocks {
                let cfg = SimConfig::new(t, read_cycle);
                for c in &compiled {
                    observed.push(match c.run_with(s, x, &cfg) {
                        Ok((w, _)) => Some(w),
                        Err(e) => {
                            log::warn!("input {} clock {t} ps: {e}", x.to_hex());
                            None
                        }
                    });
                }
            }
            Ok(GridRow { input: *x, golden, observed })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    Ok(OutputGrid {
        clocks: clocks.to_vec(),
        duties: annotations.iter().map(|a| a.duty).collect(),
        width_out: n.width_out(),
        rows,
    })
}

/// One line of the persisted grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub input: String,
    pub golden: String,
    pub clock_ps: f64,
    pub duty: u32,
    pub observed: Option<String>,
}

pub fn write_grid_jsonl<W: Write>(g: &OutputGrid, mut w: W) -> std::io::Result<()> {
    for r in &g.rows {
        for (i, &t) in g.clocks.iter().enumerate() {
            for (j, d) in g.duties.iter().enumerate() {
                let rec = GridRecord {
                    input: r.input.to_hex(),
                    golden: r.golden.to_hex(),
                    clock_ps: t,
                    duty: d.duty(),
                    observed: r.get(g.duties.len(), i, j).map(|b| b.to_hex()),
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum GridParseError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads a grid written by [`write_grid_jsonl`]. Records of one input must be
/// contiguous and every input must list the same (clock, duty) cells in the
/// same order.
pub fn read_grid_jsonl<R: BufRead>(r: R, width_in: usize, width_out: usize) -> Result<OutputGrid, GridParseError> {
    let mut cells: Vec<(f64, AgingState)> = Vec::new();
    let mut rows: Vec<GridRow> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let l = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| GridParseError::Line(l, m);
        let rec: GridRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let hex = |s: &str, w| Bits::from_hex(s, w).map_err(|e| err(e.to_string()));
        let input = hex(&rec.input, width_in)?;
        let golden = hex(&rec.golden, width_out)?;
        let observed = rec.observed.as_deref().map(|s| hex(s, width_out)).transpose()?;
        let duty = AgingState::new(rec.duty).map_err(|e| err(e.to_string()))?;
        if rows.last().is_none_or(|r| r.input != input) {
            if rows.last().is_some_and(|r| r.observed.len() != cells.len()) {
                return Err(err("previous input has an incomplete grid".into()));
            }
            rows.push(GridRow { input, golden, observed: Vec::new() });
        }
        let first = rows.len() == 1;
        let row = rows.last_mut().unwrap();
        if row.golden != golden {
            return Err(err("golden word changes within one input".into()));
        }
        if first {
            cells.push((rec.clock_ps, duty));
        } else if cells.get(row.observed.len()) != Some(&(rec.clock_ps, duty)) {
            return Err(err("grid cell out of order".into()));
        }
        row.observed.push(observed);
    }
    let mut clocks: Vec<f64> = Vec::new();
    let mut duties: Vec<AgingState> = Vec::new();
    for &(c, d) in &cells {
        if !clocks.contains(&c) {
            clocks.push(c);
        }
        if !duties.contains(&d) {
            duties.push(d);
        }
    }
    let rect = cells.len() == clocks.len() * duties.len()
        && cells.iter().enumerate().all(|(k, &(c, d))| clocks[k / duties.len()] == c && duties[k % duties.len()] == d)
        && rows.iter().all(|r| r.observed.len() == cells.len());
    if !rect {
        return Err(GridParseError::Line(0, "grid is not rectangular".into()));
    }
    Ok(OutputGrid { clocks, duties, width_out, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CellKind, NetlistBuilder};
    use crate::timing::{annotate, critical_path, AgingParams, BaseDelayLib};

    fn small() -> Netlist {
        let mut b = NetlistBuilder::new("s");
        b.meta("n_read", 2);
        let a = b.input("a");
        let c = b.input("c");
        let x = b.gate(CellKind::XOR2, &[a, c]);
        let y = b.gate(CellKind::NAND2, &[x, a]);
        let (ff, q) = b.dff(false);
        b.connect_d(ff, y);
        let z = b.gate(CellKind::INV, &[q]);
        b.output(z);
        b.output(x);
        b.finish().unwrap()
    }

    fn anns(n: &Netlist) -> Vec<DelayAnnotation> {
        AgingState::grid()
            .into_iter()
            .map(|s| annotate(n, &BaseDelayLib::default(), &AgingParams::default(), s, None).unwrap())
            .collect()
    }

    #[test]
    fn ample_clock_matches_golden_and_shape() {
        let n = small();
        let a = anns(&n);
        let t = critical_path(&n, &a[0]).unwrap().delay;
        let ins: Vec<Bits> = (0..4).map(|v| Bits::new(v, 2).unwrap()).collect();
        let g = sweep(&n, &a, &[t * 0.3, t * 2.0], &ins, 2).unwrap();
        assert_eq!((g.rows.len(), g.n_clocks(), g.n_duties()), (4, 2, 11));
        for r in &g.rows {
            for j in 0..11 {
                assert_eq!(r.get(11, 1, j), Some(&r.golden));
            }
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let n = small();
        let a = anns(&n);
        let ins: Vec<Bits> = (0..4).map(|v| Bits::new(v, 2).unwrap()).collect();
        let g = sweep(&n, &a[..3], &[10.0, 20.0, 80.0], &ins, 2).unwrap();
        let mut buf = Vec::new();
        write_grid_jsonl(&g, &mut buf).unwrap();
        let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert!(first.starts_with("{\"input\":\"0\",\"golden\":"), "{first}");
        let back = read_grid_jsonl(&buf[..], 2, 2).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn unsorted_clocks_rejected() {
        let n = small();
        let a = anns(&n);
        assert!(sweep(&n, &a, &[20.0, 10.0], &[Bits::zero(2)], 2).is_err());
        assert!(sweep(&n, &a, &[], &[Bits::zero(2)], 2).is_err());
    }
}
