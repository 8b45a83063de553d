// SPDX-License-Identifier: Apache-2.0
//! Static timing analysis over the combinational DAG.
//!
//! Timing paths start at a primary input (weight 0) or a flip-flop Q pin
//! (weight = clk-to-q delay of that flop) and end at a flip-flop D pin or a
//! primary output. A path is identified by its cell sequence; its delay is
//! the left-to-right sum of the cell delays, so ties are exact and ranking is
//! reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;


use super::{DelayAnnotation, TimingError};
use crate::netlist::{CellIdx, Driver, Netlist};

#[derive(Clone, Debug, PartialEq)]
pub struct TimingPath {
    /// Picoseconds.
    pub delay: f64,
    pub cells: Vec<CellIdx>,
}

impl TimingPath {
    pub fn ids<'a>(&self, n: &'a Netlist) -> Vec<&'a str> {
        self.cells.iter().map(|&c| n.cell(c).id.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedPaths {
    pub paths: Vec<TimingPath>,
    /// Fewer paths exist than were requested.
    pub shortfall: bool,
}

/// Timing graph shared by the path queries.
pub(crate) struct TimingGraph<'a> {
    n: &'a Netlist,
    delays: Vec<f64>,
    /// Combinational readers of each net.
    readers: Vec<Vec<CellIdx>>,
    sink: Vec<bool>,
    /// Start weight of cells that can begin a path.
    start: Vec<Option<f64>>,
}

impl<'a> TimingGraph<'a> {
    pub(crate) fn new(n: &'a Netlist, a: &DelayAnnotation) -> Result<Self, TimingError> {
        let delays = a.delays_for(n)?.into_owned();
        let readers = n.comb_readers();
        let mut sink = vec![false; n.net_count()];
        for &o in n.outputs() {
            sink[o.idx()] = true;
        }
        let mut is_input = vec![false; n.net_count()];
        for &i in n.inputs() {
            is_input[i.idx()] = true;
        }
        let mut start = vec![None; n.cells().len()];
        for (i, c) in n.cells().iter().enumerate() {
            if c.kind.is_sequential() {
                sink[c.inputs[0].idx()] = true;
                start[i] = Some(delays[i]);
            } else if c.inputs.iter().any(|x| is_input[x.idx()]) {
                start[i] = Some(delays[i]);
            }
        }
        Ok(Self { n, delays, readers, sink, start })
    }

    fn is_sink_cell(&self, c: CellIdx) -> bool {
        self.sink[self.n.cell(c).output.idx()]
    }

    fn successors(&self, c: CellIdx) -> &[CellIdx] {
        &self.readers[self.n.cell(c).output.idx()]
    }

    /// Longest completion after each cell (excluding the cell itself);
    /// `-inf` where no sink is reachable.
    fn suffix_bounds(&self) -> Result<Vec<f64>, TimingError> {
        let order = self.n.topo_order().map_err(|v| TimingError::Cycle(v.to_string()))?;
        let mut suf = vec![f64::NEG_INFINITY; self.n.cells().len()];
        let eval = |c: CellIdx, suf: &Vec<f64>| {
            let mut best = if self.is_sink_cell(c) { 0.0 } else { f64::NEG_INFINITY };
            for &f in self.successors(c) {
                best = best.max(self.delays[f.idx()] + suf[f.idx()]);
            }
            best
        };
        for &c in order.iter().rev() {
            suf[c.idx()] = eval(c, &suf);
        }
        for (i, c) in self.n.cells().iter().enumerate() {
            if c.kind.is_sequential() {
                suf[i] = eval(CellIdx(i as u32), &suf);
            }
        }
        Ok(suf)
    }
}

fn lex_cmp(n: &Netlist, a: &[CellIdx], b: &[CellIdx]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = n.cell(*x).id.cmp(&n.cell(*y).id);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Longest path by forward arrival-time propagation. Among equal-delay
/// paths the lexicographically smallest cell-id sequence is returned.
pub fn critical_path(n: &Netlist, a: &DelayAnnotation) -> Result<TimingPath, TimingError> {
    let delays = a.delays_for(n)?;
    let order = n.topo_order().map_err(|v| TimingError::Cycle(v.to_string()))?;
    let drivers = n.drivers();
    let cells = n.cells();

    // Arrival at each cell output and the best path reaching it.
    let mut arr: Vec<Option<f64>> = vec![None; cells.len()];
    let mut best: Vec<Vec<CellIdx>> = vec![Vec::new(); cells.len()];
    for (i, c) in cells.iter().enumerate() {
        if c.kind.is_sequential() {
            arr[i] = Some(delays[i]);
            best[i] = vec![CellIdx(i as u32)];
        }
    }
    for &ci in &order {
        let i = ci.idx();
        let c = &cells[i];
        if c.kind.is_const() {
            continue;
        }
        let mut cand: Option<(f64, Vec<CellIdx>)> = None;
        let offer = |w: f64, prefix: &[CellIdx], cand: &mut Option<(f64, Vec<CellIdx>)>| {
            let replace = match cand {
                None => true,
                Some((bw, bp)) => w > *bw || (w == *bw && lex_cmp(n, prefix, bp) == Ordering::Less),
            };
            if replace {
                *cand = Some((w, prefix.to_vec()));
            }
        };
        for &inp in &c.inputs {
            match drivers[inp.idx()] {
                Some(Driver::Input(_)) => offer(delays[i], &[], &mut cand),
                Some(Driver::Cell(d)) => {
                    if let Some(w) = arr[d.idx()] {
                        offer(w + delays[i], &best[d.idx()], &mut cand);
                    }
                }
                None => {}
            }
        }
        if let Some((w, mut p)) = cand {
            p.push(ci);
            arr[i] = Some(w);
            best[i] = p;
        }
    }

    let mut sink = vec![false; n.net_count()];
    for &o in n.outputs() {
        sink[o.idx()] = true;
    }
    for c in cells {
        if c.kind.is_sequential() {
            sink[c.inputs[0].idx()] = true;
        }
    }
    let mut result: Option<TimingPath> = None;
    for (i, c) in cells.iter().enumerate() {
        if !sink[c.output.idx()] {
            continue;
        }
        let Some(w) = arr[i] else { continue };
        let better = match &result {
            None => true,
            Some(r) => w > r.delay || (w == r.delay && lex_cmp(n, &best[i], &r.cells) == Ordering::Less),
        };
        if better {
            result = Some(TimingPath { delay: w, cells: best[i].clone() });
        }
    }
    Ok(result.unwrap_or(TimingPath { delay: 0.0, cells: Vec::new() }))
}

struct Node {
    cell: CellIdx,
    parent: Option<usize>,
    weight: f64,
}

#[derive(PartialEq)]
struct Entry {
    bound: f64,
    node: usize,
    complete: bool,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.complete.cmp(&self.complete).reverse())
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` longest distinct paths, rank 1 first, ties broken by
/// lexicographic cell-id sequence.
///
/// Best-first search over path prefixes ordered by prefix delay plus the
/// exact longest completion, so paths surface in non-increasing order.
pub fn k_longest_paths(n: &Netlist, a: &DelayAnnotation, k: usize) -> Result<RankedPaths, TimingError> {
    if k == 0 {
        return Err(TimingError::ZeroK);
    }
    let g = TimingGraph::new(n, a)?;
    let suf = g.suffix_bounds()?;
    let mut nodes: Vec<Node> = Vec::new();
    let mut heap = BinaryHeap::new();
    for (i, s) in g.start.iter().enumerate() {
        if let Some(w) = *s {
            if suf[i].is_finite() {
                nodes.push(Node { cell: CellIdx(i as u32), parent: None, weight: w });
                heap.push(Entry { bound: w + suf[i], node: nodes.len() - 1, complete: false });
            }
        }
    }

    let path_of = |nodes: &Vec<Node>, mut i: usize| {
        let mut cells = Vec::new();
        loop {
            cells.push(nodes[i].cell);
            match nodes[i].parent {
                Some(p) => i = p,
                None => break,
            }
        }
        cells.reverse();
        cells
    };

    let mut found: Vec<TimingPath> = Vec::new();
    // Weight of the k-th best complete path seen so far.
    let mut kth = f64::NEG_INFINITY;
    while let Some(e) = heap.pop() {
        if found.len() >= k {
            let tol = 1e-9 * kth.abs().max(1.0);
            if e.bound < kth - tol {
                break;
            }
        }
        if e.complete {
            found.push(TimingPath { delay: nodes[e.node].weight, cells: path_of(&nodes, e.node) });
            if found.len() >= k {
                let mut w: Vec<f64> = found.iter().map(|p| p.delay).collect();
                w.sort_by(|a, b| b.total_cmp(a));
                kth = w[k - 1];
            }
            continue;
        }
        let node = e.node;
        let cell = nodes[node].cell;
        let w = nodes[node].weight;
        if g.is_sink_cell(cell) {
            heap.push(Entry { bound: w, node, complete: true });
        }
        for &f in g.successors(cell) {
            if suf[f.idx()].is_finite() {
                let fw = w + g.delays[f.idx()];
                nodes.push(Node { cell: f, parent: Some(node), weight: fw });
                heap.push(Entry { bound: fw + suf[f.idx()], node: nodes.len() - 1, complete: false });
            }
        }
    }
    found.sort_by(|a, b| b.delay.total_cmp(&a.delay).then_with(|| lex_cmp(n, &a.cells, &b.cells)));
    let shortfall = found.len() < k;
    found.truncate(k);
    Ok(RankedPaths { paths: found, shortfall })
}

/// Latest arrival at each primary output (`None` when only constants or a
/// bare input reach it).
pub fn output_arrivals(n: &Netlist, a: &DelayAnnotation) -> Result<Vec<Option<f64>>, TimingError> {
    let delays = a.delays_for(n)?;
    let order = n.topo_order().map_err(|v| TimingError::Cycle(v.to_string()))?;
    let drivers = n.drivers();
    let mut net_arr: Vec<Option<f64>> = vec![None; n.net_count()];
    for (i, c) in n.cells().iter().enumerate() {
        if c.kind.is_sequential() {
            net_arr[c.output.idx()] = Some(delays[i]);
        }
    }
    for &i in n.inputs() {
        net_arr[i.idx()] = Some(0.0);
    }
    for &ci in &order {
        let c = n.cell(ci);
        let m = c.inputs.iter().filter_map(|x| net_arr[x.idx()]).fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
        if let Some(m) = m {
            net_arr[c.output.idx()] = Some(m + delays[ci.idx()]);
        }
    }
    Ok(n.outputs()
        .iter()
        .map(|o| match drivers[o.idx()] {
            Some(Driver::Cell(_)) => net_arr[o.idx()],
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CellKind, NetlistBuilder};
    use crate::timing::{annotate, AgingParams, AgingState, BaseDelayLib};

    fn fresh(n: &Netlist) -> DelayAnnotation {
        annotate(n, &BaseDelayLib::default(), &AgingParams::default(), AgingState::FRESH, None).unwrap()
    }

    #[test]
    fn inverter_chain_sums() {
        let mut b = NetlistBuilder::new("c");
        let a = b.input("a");
        let x = b.gate(CellKind::INV, &[a]);
        let y = b.gate(CellKind::INV, &[x]);
        b.output(y);
        let n = b.finish().unwrap();
        let cp = critical_path(&n, &fresh(&n)).unwrap();
        assert_eq!(cp.delay, 16.0);
        assert_eq!(cp.ids(&n), vec!["g0", "g1"]);
    }

    fn diamond() -> Netlist {
        // a -> (BUF 10, XOR 24 via two pins) -> OR 16
        let mut b = NetlistBuilder::new("d");
        let a = b.input("a");
        let c = b.input("c");
        let s = b.gate(CellKind::BUF, &[a]);
        let l = b.gate(CellKind::INV, &[s]);
        let r = b.gate(CellKind::XOR2, &[s, c]);
        let j = b.gate(CellKind::NAND2, &[l, r]);
        b.output(j);
        b.finish().unwrap()
    }

    #[test]
    fn diamond_takes_max_arm() {
        let n = diamond();
        let a = fresh(&n);
        // BUF drives two loads: 10 + 3 = 13.
        let cp = critical_path(&n, &a).unwrap();
        assert_eq!(cp.delay, 13.0 + 24.0 + 12.0);
        let k = k_longest_paths(&n, &a, 10).unwrap();
        let w: Vec<f64> = k.paths.iter().map(|p| p.delay).collect();
        assert_eq!(w, vec![49.0, 36.0, 33.0]);
        assert!(k.shortfall);
        assert_eq!(k.paths[0], cp);
    }

    #[test]
    fn flops_are_sources_and_sinks() {
        let mut b = NetlistBuilder::new("t");
        let (ff, q) = b.dff(false);
        let d = b.gate(CellKind::INV, &[q]);
        b.connect_d(ff, d);
        b.output(q);
        let n = b.finish().unwrap();
        let a = fresh(&n);
        let cp = critical_path(&n, &a).unwrap();
        // DFF Q has two loads (INV + output): 23, then INV 8.
        assert_eq!(cp.delay, 31.0);
        let k = k_longest_paths(&n, &a, 5).unwrap();
        assert_eq!(k.paths.len(), 2);
        assert_eq!(k.paths[1].delay, 23.0);
    }

    #[test]
    fn zero_k_rejected() {
        let n = diamond();
        assert!(matches!(k_longest_paths(&n, &fresh(&n), 0), Err(TimingError::ZeroK)));
    }
}
