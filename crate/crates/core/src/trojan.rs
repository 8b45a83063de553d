// SPDX-License-Identifier: Apache-2.0
//! Trojan insertion into clean netlists.
//!
//! Three archetypes:
//! - `TRIG_LEAK`: a comparator on primary inputs switches MUX2 cells spliced
//!   in front of primary outputs to constant key bits;
//! - `ALWAYS_LFSR`: a free-running LFSR XORs key bits into a chain of gates
//!   that taps nets of a chosen timing path and drives nothing;
//! - `TRIG_LFSR`: the same leaker gated by an input comparator.
//!
//! New cells carry the `tj_` prefix. The inserted structure is recorded in
//! netlist metadata (`trojan`, `taps`, `spliced`, `deadend`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::netlist::{CellKind, NetId, Netlist, NetlistBuilder, NetlistError};
use crate::timing::{k_longest_paths, output_arrivals, DelayAnnotation, TimingError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Archetype {
    TrigLeak,
    AlwaysLfsr,
    TrigLfsr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrojanSpec {
    pub archetype: Archetype,
    /// Compared against `trigger_inputs` (bit i against input i of that list).
    #[serde(default)]
    pub trigger_const: Option<Bits>,
    /// Primary-input positions watched by the trigger; the first
    /// `trigger_const.width()` inputs when absent.
    #[serde(default)]
    pub trigger_inputs: Option<Vec<usize>>,
    pub key_bits: Bits,
    #[serde(default = "one")]
    pub path_rank: usize,
    #[serde(default = "eight")]
    pub tap_count: usize,
    #[serde(default = "eight")]
    pub lfsr_len: usize,
}

fn one() -> usize {
    1
}

fn eight() -> usize {
    8
}

#[derive(Debug, Error)]
pub enum TrojanError {
    #[error("path rank {rank} requested but only {available} paths exist")]
    RankTooDeep { rank: usize, available: usize },
    #[error("path of rank {rank} has {available} internal nets, {wanted} taps requested")]
    TapsUnavailable { rank: usize, wanted: usize, available: usize },
    #[error("trigger is {trigger} bits wide, circuit has {inputs} inputs")]
    TriggerTooWide { trigger: usize, inputs: usize },
    #[error("bad trojan spec: {0}")]
    BadSpec(String),
    #[error("{0} key bits but only {1} primary outputs")]
    TooManyKeyBits(usize, usize),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

impl TrojanSpec {
    pub fn check(&self, width_in: usize) -> Result<(), TrojanError> {
        if self.path_rank == 0 {
            return Err(TrojanError::BadSpec("path_rank must be >= 1".into()));
        }
        if self.tap_count == 0 {
            return Err(TrojanError::BadSpec("tap_count must be >= 1".into()));
        }
        if self.key_bits.width() == 0 {
            return Err(TrojanError::BadSpec("key_bits is empty".into()));
        }
        if self.archetype != Archetype::AlwaysLfsr {
            let t = self.trigger_const.ok_or_else(|| TrojanError::BadSpec("trigger_const missing".into()))?;
            if t.width() == 0 {
                return Err(TrojanError::BadSpec("trigger_const is empty".into()));
            }
            if t.width() > width_in {
                return Err(TrojanError::TriggerTooWide { trigger: t.width(), inputs: width_in });
            }
            let pos = self.trigger_positions();
            if pos.len() != t.width() || pos.iter().any(|&p| p >= width_in) {
                return Err(TrojanError::BadSpec("trigger_inputs do not match trigger_const".into()));
            }
            let mut sorted = pos.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != pos.len() {
                return Err(TrojanError::BadSpec("trigger_inputs repeat a position".into()));
            }
        } else if !(2..=32).contains(&self.lfsr_len) {
            return Err(TrojanError::BadSpec(format!("lfsr_len {} not in 2..=32", self.lfsr_len)));
        }
        if self.archetype == Archetype::TrigLfsr && !(2..=32).contains(&self.lfsr_len) {
            return Err(TrojanError::BadSpec(format!("lfsr_len {} not in 2..=32", self.lfsr_len)));
        }
        Ok(())
    }

    fn trigger_positions(&self) -> Vec<usize> {
        match (&self.trigger_inputs, self.trigger_const) {
            (Some(p), _) => p.clone(),
            (None, Some(t)) => (0..t.width()).collect(),
            (None, None) => Vec::new(),
        }
    }

    /// Whether applying `x` would fire the trigger. Always false for
    /// `ALWAYS_LFSR`, whose payload has no functional effect.
    pub fn fires(&self, x: &Bits) -> bool {
        match (self.archetype, self.trigger_const) {
            (Archetype::AlwaysLfsr, _) | (_, None) => false,
            (_, Some(t)) => self.trigger_positions().iter().enumerate().all(|(i, &p)| x.bit(p) == t.bit(i)),
        }
    }
}

/// Result of [`pick_tap_nets`].
#[derive(Clone, Debug, PartialEq)]
pub struct TapPick {
    pub nets: Vec<NetId>,
    /// The path had fewer internal nets than requested.
    pub shortfall: bool,
}

/// Internal nets of the `rank`-th longest path (every cell output except the
/// path's endpoint), nearest to the middle of the path first; equally distant
/// nets are ordered by name.
pub fn pick_tap_nets(n: &Netlist, a: &DelayAnnotation, rank: usize, count: usize) -> Result<TapPick, TrojanError> {
    let path = ranked_path(n, a, rank)?;
    let internal: Vec<NetId> = path[..path.len() - 1].iter().map(|&c| n.cell(c).output).collect();
    let mid = (internal.len() as f64 - 1.0) / 2.0;
    let mut order: Vec<(usize, NetId)> = internal.iter().copied().enumerate().collect();
    order.sort_by(|&(i, x), &(j, y)| {
        (i as f64 - mid).abs().total_cmp(&(j as f64 - mid).abs()).then_with(|| n.net_name(x).cmp(n.net_name(y)))
    });
    let shortfall = order.len() < count;
    Ok(TapPick { nets: order.into_iter().take(count).map(|(_, x)| x).collect(), shortfall })
}

fn ranked_path(n: &Netlist, a: &DelayAnnotation, rank: usize) -> Result<Vec<crate::netlist::CellIdx>, TrojanError> {
    if rank == 0 {
        return Err(TrojanError::BadSpec("path_rank must be >= 1".into()));
    }
    let r = k_longest_paths(n, a, rank)?;
    if r.paths.len() < rank {
        return Err(TrojanError::RankTooDeep { rank, available: r.paths.len() });
    }
    Ok(r.paths[rank - 1].cells.clone())
}

/// Feedback taps (1-based stage numbers) of maximal-length Fibonacci LFSRs.
fn lfsr_taps(len: usize) -> &'static [usize] {
    match len {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        9 => &[9, 5],
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 11, 10, 4],
        13 => &[13, 12, 11, 8],
        14 => &[14, 13, 12, 2],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        17 => &[17, 14],
        18 => &[18, 11],
        19 => &[19, 18, 17, 14],
        20 => &[20, 17],
        21 => &[21, 19],
        22 => &[22, 21],
        23 => &[23, 18],
        24 => &[24, 23, 22, 17],
        25 => &[25, 22],
        26 => &[26, 6, 2, 1],
        27 => &[27, 5, 2, 1],
        28 => &[28, 25],
        29 => &[29, 27],
        30 => &[30, 6, 4, 1],
        31 => &[31, 28],
        32 => &[32, 22, 2, 1],
        _ => &[],
    }
}

/// XNOR-per-bit comparison of the watched inputs with the trigger constant,
/// reduced by a balanced AND tree.
fn build_trigger(b: &mut NetlistBuilder, spec: &TrojanSpec) -> NetId {
    let t = spec.trigger_const.expect("checked");
    let ins: Vec<NetId> = b.inputs().to_vec();
    let mut terms: Vec<NetId> = spec
        .trigger_positions()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let k = b.constant(t.bit(i));
            b.gate(CellKind::XNOR2, &[ins[p], k])
        })
        .collect();
    while terms.len() > 1 {
        terms = terms
            .chunks(2)
            .map(|c| if c.len() == 2 { b.gate(CellKind::AND2, &[c[0], c[1]]) } else { c[0] })
            .collect();
    }
    terms[0]
}

/// Inserts the Trojan described by `spec`. `a` must annotate `n` fresh and
/// without variation; it only drives path ranking.
pub fn insert_trojan(n: &Netlist, spec: &TrojanSpec, a: &DelayAnnotation) -> Result<Netlist, TrojanError> {
    spec.check(n.width_in())?;
    let mut b = NetlistBuilder::extend(n, "tj_");
    let mut meta_taps: Vec<NetId> = Vec::new();
    let trigger = match spec.archetype {
        Archetype::AlwaysLfsr => None,
        _ => {
            meta_taps.extend(spec.trigger_positions().iter().map(|&p| n.inputs()[p]));
            Some(build_trigger(&mut b, spec))
        }
    };

    match spec.archetype {
        Archetype::TrigLeak => {
            let m = spec.key_bits.width();
            if m > n.width_out() {
                return Err(TrojanError::TooManyKeyBits(m, n.width_out()));
            }
            let path = ranked_path(n, a, spec.path_rank)?;
            let endpoint = n.cell(*path.last().expect("paths are non-empty")).output;
            // Outputs ordered by the path endpoint first, then latest arrival.
            let arr = output_arrivals(n, a)?;
            let mut outs: Vec<usize> = (0..n.width_out()).filter(|&i| arr[i].is_some()).collect();
            outs.sort_by(|&i, &j| {
                let ei = n.outputs()[i] == endpoint;
                let ej = n.outputs()[j] == endpoint;
                ej.cmp(&ei).then_with(|| arr[j].unwrap().total_cmp(&arr[i].unwrap())).then(i.cmp(&j))
            });
            outs.dedup_by_key(|i| n.outputs()[*i]);
            if outs.len() < m {
                return Err(TrojanError::TooManyKeyBits(m, outs.len()));
            }
            let trig = trigger.expect("triggered archetype");
            let mut spliced = Vec::new();
            for (k, &o) in outs[..m].iter().enumerate() {
                let net = n.outputs()[o];
                let pre = b.split_driver(net).expect("output has a cell driver");
                let key = b.constant(spec.key_bits.bit(k));
                b.gate_into(CellKind::MUX2, &[pre, key, trig], net);
                spliced.push(n.net_name(net).to_string());
            }
            b.meta("spliced", spliced.join(","));
        }
        Archetype::AlwaysLfsr | Archetype::TrigLfsr => {
            let pick = pick_tap_nets(n, a, spec.path_rank, spec.tap_count)?;
            if pick.shortfall {
                return Err(TrojanError::TapsUnavailable {
                    rank: spec.path_rank,
                    wanted: spec.tap_count,
                    available: pick.nets.len(),
                });
            }
            let len = spec.lfsr_len;
            let stages: Vec<_> = (0..len).map(|_| b.dff(true)).collect();
            let taps = lfsr_taps(len);
            let mut fb = stages[taps[0] - 1].1;
            for &t in &taps[1..] {
                fb = b.gate(CellKind::XOR2, &[fb, stages[t - 1].1]);
            }
            b.connect_d(stages[0].0, fb);
            for i in 1..len {
                b.connect_d(stages[i].0, stages[i - 1].1);
            }
            let mut leak: Option<NetId> = None;
            for k in 0..spec.key_bits.width() {
                let key = b.constant(spec.key_bits.bit(k));
                let bit = b.gate(CellKind::XOR2, &[key, stages[k % len].1]);
                leak = Some(match leak {
                    None => bit,
                    Some(l) => b.gate(CellKind::XOR2, &[l, bit]),
                });
            }
            let mut x = leak.expect("key_bits non-empty");
            if let Some(t) = trigger {
                x = b.gate(CellKind::AND2, &[x, t]);
            }
            for &tap in &pick.nets {
                x = b.gate(CellKind::XOR2, &[x, tap]);
            }
            meta_taps.extend(&pick.nets);
            let dead = b.net_name(x).to_string();
            b.meta("deadend", dead);
        }
    }
    let names: Vec<String> = meta_taps.iter().map(|&t| n.net_name(t).to_string()).collect();
    b.meta("taps", names.join(","));
    b.meta(
        "trojan",
        match spec.archetype {
            Archetype::TrigLeak => "trig_leak",
            Archetype::AlwaysLfsr => "always_lfsr",
            Archetype::TrigLfsr => "trig_lfsr",
        },
    );
    b.set_name(format!("{}_tj", n.name()));
    Ok(b.finish()?)
}

/// Cells that occupy area: gates and flip-flops.
fn area_cells(n: &Netlist) -> usize {
    n.cells().iter().filter(|c| !c.kind.is_const()).count()
}

/// Share of the trojaned circuit's cells that the Trojan added.
pub fn area_fraction(clean: &Netlist, trojaned: &Netlist) -> Result<f64, TrojanError> {
    let (c, t) = (area_cells(clean), area_cells(trojaned));
    if t < c {
        return Err(TrojanError::BadSpec(format!("trojaned netlist has fewer cells ({t}) than clean ({c})")));
    }
    if t == 0 {
        return Ok(0.0);
    }
    Ok((t - c) as f64 / t as f64)
}

/// Declared tap nets recorded by [`insert_trojan`].
pub fn declared_taps(n: &Netlist) -> Vec<String> {
    n.meta()
        .get("taps")
        .map(|s| s.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect())
        .unwrap_or_default()
}
