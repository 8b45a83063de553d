// SPDX-License-Identifier: Apache-2.0
//! Event-driven timing simulation with a single global clock.
//!
//! Semantics:
//! - before t=0 the circuit rests in its settled state for all-zero primary
//!   inputs and the flop init values; at t=0 the inputs switch to the
//!   applied vector and stay there;
//! - a cell re-evaluates when one of its inputs changes and schedules its
//!   output at `t + delay` (transport delay, at most one pending event per
//!   net, the newer one wins);
//! - at each edge `k*T`, `k = 1..read_cycle-1`, events due at or before the
//!   edge are applied first, then all flops sample D together and schedule Q
//!   at `t + delay(flop)`;
//! - primary outputs are read at `read_cycle*T` the same way.
//!
//! Setup slack is zero: a transition landing exactly on the edge is
//! captured, so a clock equal to the critical-path delay is still safe.

mod sweep;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::bits::Bits;
use crate::netlist::{CellIdx, CellKind, Netlist};
use crate::timing::{critical_path, DelayAnnotation, TimingError};

pub use sweep::{read_grid_jsonl, sweep, write_grid_jsonl, GridParseError, GridRecord, GridRow, OutputGrid};

pub const EVENT_BUDGET: u64 = 10_000_000;

/// Times within this many picoseconds of an edge count as on the edge.
const EDGE_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Picoseconds.
    pub clock_period: f64,
    pub read_cycle: usize,
}

impl SimConfig {
    pub fn new(clock_period: f64, read_cycle: usize) -> Self {
        Self { clock_period, read_cycle }
    }

    /// Uses the `n_read` recorded in the netlist metadata.
    pub fn for_netlist(n: &Netlist, clock_period: f64) -> Result<Self, SimError> {
        let r = n.n_read().ok_or(SimError::MissingReadCycle)?;
        Ok(Self { clock_period, read_cycle: r })
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.clock_period > 0.0 && self.clock_period.is_finite()) || self.read_cycle == 0 {
            return Err(SimError::BadConfig(*self));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config {0:?}")]
    BadConfig(SimConfig),
    #[error("netlist has no n_read metadata")]
    MissingReadCycle,
    #[error("input has width {got}, netlist expects {expected}")]
    Width { expected: usize, got: usize },
    #[error("event budget of {0} exceeded")]
    EventBudget(u64),
    #[error(transparent)]
    Timing(#[from] TimingError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimStats {
    pub events: u64,
    /// Latest time any net changed value.
    pub last_change: f64,
}

struct Gate {
    kind: CellKind,
    ins: [u32; 3],
    arity: u8,
    out: u32,
    delay: f64,
}

struct Flop {
    d: u32,
    q: u32,
    delay: f64,
}

/// A netlist and one annotation flattened for fast repeated runs.
pub struct Compiled {
    gates: Vec<Gate>,
    /// Gate indices (into `gates`) reading each net.
    readers: Vec<Vec<u32>>,
    flops: Vec<Flop>,
    /// Settled net values before t=0.
    rest: Vec<bool>,
    inputs: Vec<u32>,
    outputs: Vec<u32>,
}

impl Compiled {
    pub fn new(n: &Netlist, a: &DelayAnnotation) -> Result<Self, SimError> {
        let delays = a.delays_for(n)?;
        let order = n.topo_order().map_err(|v| TimingError::Cycle(v.to_string()))?;
        let mut gates = Vec::new();
        for &ci in &order {
            let c = n.cell(ci);
            if c.kind.is_const() {
                continue;
            }
            let mut ins = [0u32; 3];
            for (j, x) in c.inputs.iter().enumerate() {
                ins[j] = x.0;
            }
            gates.push(Gate { kind: c.kind, ins, arity: c.inputs.len() as u8, out: c.output.0, delay: delays[ci.idx()] });
        }
        let mut readers = vec![Vec::new(); n.net_count()];
        for (g, gate) in gates.iter().enumerate() {
            for &x in &gate.ins[..gate.arity as usize] {
                let r: &mut Vec<u32> = &mut readers[x as usize];
                if r.last() != Some(&(g as u32)) {
                    r.push(g as u32);
                }
            }
        }
        let init: Vec<bool> =
            n.cells().iter().filter(|c| c.kind.is_sequential()).map(|c| c.init.unwrap_or(false)).collect();
        let rest = n.eval_comb(&order, &vec![false; n.width_in()], &init);
        let flops = n
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind.is_sequential())
            .map(|(i, c)| Flop { d: c.inputs[0].0, q: c.output.0, delay: delays[i] })
            .collect();
        Ok(Self {
            gates,
            readers,
            flops,
            rest,
            inputs: n.inputs().iter().map(|x| x.0).collect(),
            outputs: n.outputs().iter().map(|x| x.0).collect(),
        })
    }

    pub fn width_in(&self) -> usize {
        self.inputs.len()
    }

    pub fn width_out(&self) -> usize {
        self.outputs.len()
    }

    pub fn run(&self, input: &Bits, cfg: &SimConfig) -> Result<(Bits, SimStats), SimError> {
        self.run_with(&mut Scratch::default(), input, cfg)
    }

    /// As [`run`](Self::run), reusing buffers across calls.
    pub fn run_with(&self, s: &mut Scratch, input: &Bits, cfg: &SimConfig) -> Result<(Bits, SimStats), SimError> {
        cfg.check()?;
        if input.width() != self.inputs.len() {
            return Err(SimError::Width { expected: self.inputs.len(), got: input.width() });
        }
        s.reset(&self.rest);
        let mut ev = Engine { c: self, s, stats: SimStats::default() };
        for (i, &net) in self.inputs.iter().enumerate() {
            if input.bit(i) {
                ev.apply(net, true, 0.0);
            }
        }

        let t = cfg.clock_period;
        for k in 1..cfg.read_cycle {
            let edge = k as f64 * t;
            ev.advance(edge + EDGE_EPS)?;
            ev.s.sampled.clear();
            ev.s.sampled.extend(self.flops.iter().map(|f| ev.s.value[f.d as usize]));
            for (i, f) in self.flops.iter().enumerate() {
                let v = ev.s.sampled[i];
                ev.schedule(f.q, edge + f.delay, v);
            }
        }
        ev.advance(cfg.read_cycle as f64 * t + EDGE_EPS)?;
        let word = Bits::from_bools(&self.outputs.iter().map(|&o| ev.s.value[o as usize]).collect::<Vec<_>>());
        Ok((word, ev.stats))
    }

    /// Runs until no events remain (one cycle, no clock edges) and returns
    /// the settle time; used to check that settling never exceeds t_CP.
    pub fn settle_time(&self, input: &Bits) -> Result<f64, SimError> {
        let mut s = Scratch::default();
        let (_, st) = self.run_with(&mut s, input, &SimConfig { clock_period: f64::MAX / 4.0, read_cycle: 1 })?;
        Ok(st.last_change)
    }
}

/// Reusable per-thread simulation buffers.
#[derive(Default)]
pub struct Scratch {
    value: Vec<bool>,
    pending: Vec<u32>,
    gen: Vec<u32>,
    heap: BinaryHeap<Reverse<(u64, u32, u32, bool)>>,
    sampled: Vec<bool>,
}

impl Scratch {
    fn reset(&mut self, rest: &[bool]) {
        let n = rest.len();
        self.value.clear();
        self.value.extend_from_slice(rest);
        self.pending.clear();
        self.pending.resize(n, 0);
        self.gen.clear();
        self.gen.resize(n, 0);
        self.heap.clear();
    }
}

struct Engine<'a> {
    c: &'a Compiled,
    s: &'a mut Scratch,
    stats: SimStats,
}

impl Engine<'_> {
    fn eval(&mut self, g: usize, now: f64) {
        let gate = &self.c.gates[g];
        let mut buf = [false; 3];
        for j in 0..gate.arity as usize {
            buf[j] = self.s.value[gate.ins[j] as usize];
        }
        let v = gate.kind.eval(&buf[..gate.arity as usize]);
        self.schedule(gate.out, now + gate.delay, v);
    }

    fn schedule(&mut self, net: u32, at: f64, v: bool) {
        let i = net as usize;
        if self.s.pending[i] == 0 && self.s.value[i] == v {
            return;
        }
        self.s.gen[i] = self.s.gen[i].wrapping_add(1);
        self.s.pending[i] = 1;
        // Non-negative finite f64 order matches the order of their bits.
        self.s.heap.push(Reverse((at.to_bits(), net, self.s.gen[i], v)));
    }

    fn advance(&mut self, until: f64) -> Result<(), SimError> {
        let limit = until.to_bits();
        while let Some(&Reverse((tb, net, gen, v))) = self.s.heap.peek() {
            if tb > limit {
                break;
            }
            self.s.heap.pop();
            let i = net as usize;
            if gen != self.s.gen[i] {
                continue;
            }
            self.s.pending[i] = 0;
            self.stats.events += 1;
            if self.stats.events > EVENT_BUDGET {
                return Err(SimError::EventBudget(EVENT_BUDGET));
            }
            if self.s.value[i] != v {
                self.apply(net, v, f64::from_bits(tb));
            }
        }
        Ok(())
    }

    fn apply(&mut self, net: u32, v: bool, now: f64) {
        let i = net as usize;
        self.s.value[i] = v;
        self.stats.last_change = self.stats.last_change.max(now);
        for k in 0..self.c.readers[i].len() {
            let g = self.c.readers[i][k] as usize;
            self.eval(g, now);
        }
    }
}

/// One-off simulation of a single input.
pub fn simulate(n: &Netlist, a: &DelayAnnotation, input: &Bits, cfg: &SimConfig) -> Result<Bits, SimError> {
    Ok(Compiled::new(n, a)?.run(input, cfg)?.0)
}

/// Zero-delay, cycle-accurate reference evaluation.
pub struct ZeroDelay<'a> {
    n: &'a Netlist,
    order: Vec<CellIdx>,
    flops: Vec<(usize, usize)>,
    init: Vec<bool>,
}

impl<'a> ZeroDelay<'a> {
    pub fn new(n: &'a Netlist) -> Result<Self, SimError> {
        let order = n.topo_order().map_err(|v| TimingError::Cycle(v.to_string()))?;
        let seq: Vec<_> = n.cells().iter().filter(|c| c.kind.is_sequential()).collect();
        Ok(Self {
            n,
            order,
            flops: seq.iter().map(|c| (c.inputs[0].idx(), c.output.idx())).collect(),
            init: seq.iter().map(|c| c.init.unwrap_or(false)).collect(),
        })
    }

    pub fn run(&self, input: &Bits, read_cycle: usize) -> Result<Bits, SimError> {
        if input.width() != self.n.width_in() {
            return Err(SimError::Width { expected: self.n.width_in(), got: input.width() });
        }
        let ins = input.to_bools();
        let mut state = self.init.clone();
        for _ in 1..read_cycle {
            let v = self.n.eval_comb(&self.order, &ins, &state);
            for (s, &(d, _)) in state.iter_mut().zip(&self.flops) {
                *s = v[d];
            }
        }
        let v = self.n.eval_comb(&self.order, &ins, &state);
        Ok(Bits::from_bools(&self.n.outputs().iter().map(|o| v[o.idx()]).collect::<Vec<_>>()))
    }
}

/// Expected output `f(x)` by zero-delay evaluation.
pub fn golden_output(n: &Netlist, input: &Bits, cfg: &SimConfig) -> Result<Bits, SimError> {
    ZeroDelay::new(n)?.run(input, cfg.read_cycle)
}

/// Expected output by timed simulation at twice the critical-path delay of
/// the given (normally fresh, variation-free) annotation.
pub fn golden_output_timed(n: &Netlist, a: &DelayAnnotation, input: &Bits, read_cycle: usize) -> Result<Bits, SimError> {
    let t_cp = critical_path(n, a)?.delay;
    let cfg = SimConfig::new((2.0 * t_cp).max(1.0), read_cycle);
    simulate(n, a, input, &cfg)
}
