// SPDX-License-Identifier: Apache-2.0
//! Structural gate-level netlists.
//!
//! A [`Netlist`] is a flat list of cells over named nets with ordered input
//! and output ports. All flip-flops share one implicit global clock. Netlists
//! are immutable once built and validated, so they can be shared freely
//! between simulation workers.

mod builder;
mod text;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builder::NetlistBuilder;
pub use text::{parse_netlist, serialize_netlist, ParseError};

/// Index of a net inside its [`Netlist`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(pub u32);

impl NetId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Index of a cell inside its [`Netlist`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIdx(pub u32);

impl CellIdx {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKind {
    INV,
    BUF,
    AND2,
    NAND2,
    OR2,
    NOR2,
    XOR2,
    XNOR2,
    /// Inputs `(a, b, sel)`; output is `sel ? b : a`.
    MUX2,
    DFF,
    CONST0,
    CONST1,
}

impl CellKind {
    pub const ALL: [CellKind; 12] = [
        CellKind::INV,
        CellKind::BUF,
        CellKind::AND2,
        CellKind::NAND2,
        CellKind::OR2,
        CellKind::NOR2,
        CellKind::XOR2,
        CellKind::XNOR2,
        CellKind::MUX2,
        CellKind::DFF,
        CellKind::CONST0,
        CellKind::CONST1,
    ];

    pub fn arity(self) -> usize {
        match self {
            CellKind::CONST0 | CellKind::CONST1 => 0,
            CellKind::INV | CellKind::BUF | CellKind::DFF => 1,
            CellKind::MUX2 => 3,
            _ => 2,
        }
    }

    pub fn is_sequential(self) -> bool {
        self == CellKind::DFF
    }

    pub fn is_const(self) -> bool {
        matches!(self, CellKind::CONST0 | CellKind::CONST1)
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::INV => "INV",
            CellKind::BUF => "BUF",
            CellKind::AND2 => "AND2",
            CellKind::NAND2 => "NAND2",
            CellKind::OR2 => "OR2",
            CellKind::NOR2 => "NOR2",
            CellKind::XOR2 => "XOR2",
            CellKind::XNOR2 => "XNOR2",
            CellKind::MUX2 => "MUX2",
            CellKind::DFF => "DFF",
            CellKind::CONST0 => "CONST0",
            CellKind::CONST1 => "CONST1",
        }
    }

    /// Boolean function of a combinational cell. DFFs act as buffers here,
    /// which is what a zero-delay evaluation of the D→Q transfer needs.
    #[inline]
    pub fn eval(self, ins: &[bool]) -> bool {
        match self {
            CellKind::INV => !ins[0],
            CellKind::BUF | CellKind::DFF => ins[0],
            CellKind::AND2 => ins[0] & ins[1],
            CellKind::NAND2 => !(ins[0] & ins[1]),
            CellKind::OR2 => ins[0] | ins[1],
            CellKind::NOR2 => !(ins[0] | ins[1]),
            CellKind::XOR2 => ins[0] ^ ins[1],
            CellKind::XNOR2 => !(ins[0] ^ ins[1]),
            CellKind::MUX2 => {
                if ins[2] {
                    ins[1]
                } else {
                    ins[0]
                }
            }
            CellKind::CONST0 => false,
            CellKind::CONST1 => true,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CellKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub id: String,
    pub kind: CellKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// Reset value; only meaningful for DFFs.
    pub init: Option<bool>,
}

/// One broken netlist invariant. Every variant names the offending
/// identifiers so a report is actionable without the source file.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("net `{net}` has multiple drivers: {}", drivers.join(", "))]
    DuplicateDriver { net: String, drivers: Vec<String> },
    #[error("net `{net}` is used by {} but never driven", users.join(", "))]
    UndrivenNet { net: String, users: Vec<String> },
    #[error("primary output `{net}` is never driven")]
    UndrivenOutput { net: String },
    #[error("combinational cycle through cells {}", cells.join(" -> "))]
    CombinationalCycle { cells: Vec<String> },
    #[error("cell `{cell}` of kind {kind} expects {expected} inputs, got {got}")]
    Arity { cell: String, kind: CellKind, expected: usize, got: usize },
    #[error("cell id `{cell}` is used more than once")]
    DuplicateCellId { cell: String },
    #[error("flip-flop `{cell}` has no init value")]
    MissingInit { cell: String },
    #[error("net `{net}` is listed twice as a primary input")]
    DuplicateInput { net: String },
}

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid netlist: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistStats {
    pub gate_count: usize,
    pub dff_count: usize,
    pub const_count: usize,
    pub net_count: usize,
    pub width_in: usize,
    pub width_out: usize,
}

/// What drives a net.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Cell(CellIdx),
}

#[derive(Clone, Debug)]
pub struct Netlist {
    pub(crate) name: String,
    pub(crate) meta: BTreeMap<String, String>,
    pub(crate) nets: Vec<String>,
    pub(crate) net_index: HashMap<String, NetId>,
    pub(crate) inputs: Vec<NetId>,
    pub(crate) outputs: Vec<NetId>,
    pub(crate) cells: Vec<Cell>,
}

impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.meta == other.meta
            && self.nets == other.nets
            && self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.cells == other.cells
    }
}

impl Netlist {
    /// Assembles a netlist from raw parts without validating it.
    pub fn from_parts(
        name: impl Into<String>,
        meta: BTreeMap<String, String>,
        nets: Vec<String>,
        inputs: Vec<NetId>,
        outputs: Vec<NetId>,
        cells: Vec<Cell>,
    ) -> Self {
        let net_index = nets
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NetId(i as u32)))
            .collect();
        Self { name: name.into(), meta, nets, net_index, inputs, outputs, cells }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    /// Result-ready cycle recorded by the benchmark generators.
    pub fn n_read(&self) -> Option<usize> {
        self.meta.get("n_read").and_then(|v| v.parse().ok())
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, c: CellIdx) -> &Cell {
        &self.cells[c.idx()]
    }

    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    pub fn net_name(&self, n: NetId) -> &str {
        &self.nets[n.idx()]
    }

    pub fn net(&self, name: &str) -> Option<NetId> {
        self.net_index.get(name).copied()
    }

    pub fn cell_by_id(&self, id: &str) -> Option<CellIdx> {
        self.cells.iter().position(|c| c.id == id).map(|i| CellIdx(i as u32))
    }

    pub fn width_in(&self) -> usize {
        self.inputs.len()
    }

    pub fn width_out(&self) -> usize {
        self.outputs.len()
    }

    pub fn stats(&self) -> NetlistStats {
        let dff_count = self.cells.iter().filter(|c| c.kind.is_sequential()).count();
        let const_count = self.cells.iter().filter(|c| c.kind.is_const()).count();
        NetlistStats {
            gate_count: self.cells.len() - dff_count - const_count,
            dff_count,
            const_count,
            net_count: self.nets.len(),
            width_in: self.inputs.len(),
            width_out: self.outputs.len(),
        }
    }

    /// Driver of every net, `None` for undriven nets. Assumes at most one
    /// driver (true for validated netlists); on duplicates the first wins.
    pub fn drivers(&self) -> Vec<Option<Driver>> {
        let mut d = vec![None; self.nets.len()];
        for (i, &n) in self.inputs.iter().enumerate() {
            d[n.idx()].get_or_insert(Driver::Input(i));
        }
        for (i, c) in self.cells.iter().enumerate() {
            d[c.output.idx()].get_or_insert(Driver::Cell(CellIdx(i as u32)));
        }
        d
    }

    /// Combinational cells reading each net, in cell order.
    pub fn comb_readers(&self) -> Vec<Vec<CellIdx>> {
        let mut r = vec![Vec::new(); self.nets.len()];
        for (i, c) in self.cells.iter().enumerate() {
            if c.kind.is_sequential() {
                continue;
            }
            for &n in &c.inputs {
                let e: &mut Vec<CellIdx> = &mut r[n.idx()];
                if e.last() != Some(&CellIdx(i as u32)) {
                    e.push(CellIdx(i as u32));
                }
            }
        }
        r
    }

    /// Number of loads on every net: one per cell input pin it drives plus
    /// one per primary-output listing.
    pub fn fanout_counts(&self) -> Vec<usize> {
        let mut f = vec![0usize; self.nets.len()];
        for c in &self.cells {
            for &n in &c.inputs {
                f[n.idx()] += 1;
            }
        }
        for &o in &self.outputs {
            f[o.idx()] += 1;
        }
        f
    }

    pub fn fanout_map(&self) -> BTreeMap<String, usize> {
        self.fanout_counts()
            .into_iter()
            .enumerate()
            .map(|(i, c)| (self.nets[i].clone(), c))
            .collect()
    }

    /// Checks every structural invariant and returns one entry per violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut seen_ids: HashMap<&str, ()> = HashMap::new();
        for c in &self.cells {
            if seen_ids.insert(c.id.as_str(), ()).is_some() {
                out.push(Violation::DuplicateCellId { cell: c.id.clone() });
            }
            if c.inputs.len() != c.kind.arity() {
                out.push(Violation::Arity {
                    cell: c.id.clone(),
                    kind: c.kind,
                    expected: c.kind.arity(),
                    got: c.inputs.len(),
                });
            }
            if c.kind.is_sequential() && c.init.is_none() {
                out.push(Violation::MissingInit { cell: c.id.clone() });
            }
        }

        let mut drivers: Vec<Vec<String>> = vec![Vec::new(); self.nets.len()];
        let mut seen_inputs = vec![false; self.nets.len()];
        for &n in &self.inputs {
            if seen_inputs[n.idx()] {
                out.push(Violation::DuplicateInput { net: self.nets[n.idx()].clone() });
                continue;
            }
            seen_inputs[n.idx()] = true;
            drivers[n.idx()].push(format!("input {}", self.nets[n.idx()]));
        }
        for c in &self.cells {
            drivers[c.output.idx()].push(c.id.clone());
        }
        for (i, d) in drivers.iter().enumerate() {
            if d.len() > 1 {
                out.push(Violation::DuplicateDriver { net: self.nets[i].clone(), drivers: d.clone() });
            }
        }

        let mut users: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for c in &self.cells {
            for &n in &c.inputs {
                if drivers[n.idx()].is_empty() {
                    let u = users.entry(n.idx()).or_default();
                    if !u.contains(&c.id) {
                        u.push(c.id.clone());
                    }
                }
            }
        }
        for (n, u) in users {
            out.push(Violation::UndrivenNet { net: self.nets[n].clone(), users: u });
        }
        for &o in &self.outputs {
            if drivers[o.idx()].is_empty() {
                out.push(Violation::UndrivenOutput { net: self.nets[o.idx()].clone() });
            }
        }

        if let Err(cycle) = self.comb_topo() {
            out.push(Violation::CombinationalCycle {
                cells: cycle.into_iter().map(|c| self.cells[c.idx()].id.clone()).collect(),
            });
        }
        out
    }

    /// Validates and returns `self`, or the violation list.
    pub fn validated(self) -> Result<Self, NetlistError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(NetlistError::Invalid(v))
        }
    }

    /// Non-DFF cells such that every cell follows all drivers of its inputs.
    pub fn topo_order(&self) -> Result<Vec<CellIdx>, Violation> {
        self.comb_topo().map_err(|cycle| Violation::CombinationalCycle {
            cells: cycle.into_iter().map(|c| self.cells[c.idx()].id.clone()).collect(),
        })
    }

    /// Kahn's algorithm over the combinational subgraph. On failure returns
    /// the cells of one cycle, in edge order.
    fn comb_topo(&self) -> Result<Vec<CellIdx>, Vec<CellIdx>> {
        let n = self.cells.len();
        let mut comb_driver: Vec<Option<usize>> = vec![None; self.nets.len()];
        for (i, c) in self.cells.iter().enumerate() {
            if !c.kind.is_sequential() && comb_driver[c.output.idx()].is_none() {
                comb_driver[c.output.idx()] = Some(i);
            }
        }
        let mut indeg = vec![0usize; n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, c) in self.cells.iter().enumerate() {
            if c.kind.is_sequential() {
                continue;
            }
            for &inp in &c.inputs {
                if let Some(d) = comb_driver[inp.idx()] {
                    succ[d].push(i);
                    indeg[i] += 1;
                }
            }
        }
        let mut q: VecDeque<usize> = (0..n)
            .filter(|&i| !self.cells[i].kind.is_sequential() && indeg[i] == 0)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = q.pop_front() {
            order.push(CellIdx(i as u32));
            for &s in &succ[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    q.push_back(s);
                }
            }
        }
        let comb_total = self.cells.iter().filter(|c| !c.kind.is_sequential()).count();
        if order.len() == comb_total {
            return Ok(order);
        }
        // Walk predecessors inside the residual graph until a cell repeats.
        let residual: Vec<bool> = (0..n)
            .map(|i| !self.cells[i].kind.is_sequential() && indeg[i] > 0)
            .collect();
        let start = residual.iter().position(|&r| r).expect("residual cell");
        let mut pos: HashMap<usize, usize> = HashMap::new();
        let mut walk = Vec::new();
        let mut cur = start;
        loop {
            if let Some(&p) = pos.get(&cur) {
                let mut cyc: Vec<CellIdx> = walk[p..].iter().map(|&c| CellIdx(c as u32)).collect();
                cyc.reverse();
                return Err(cyc);
            }
            pos.insert(cur, walk.len());
            walk.push(cur);
            cur = self.cells[cur]
                .inputs
                .iter()
                .filter_map(|inp| comb_driver[inp.idx()])
                .find(|&d| residual[d])
                .expect("residual cell has a residual predecessor");
        }
    }

    /// Zero-delay evaluation of every net given primary inputs and the
    /// current flip-flop state (indexed like the DFFs in cell order).
    pub fn eval_comb(&self, order: &[CellIdx], inputs: &[bool], state: &[bool]) -> Vec<bool> {
        let mut v = vec![false; self.nets.len()];
        for (i, &n) in self.inputs.iter().enumerate() {
            v[n.idx()] = inputs[i];
        }
        let mut k = 0;
        for c in &self.cells {
            if c.kind.is_sequential() {
                v[c.output.idx()] = state[k];
                k += 1;
            }
        }
        let mut buf = [false; 3];
        for &ci in order {
            let c = &self.cells[ci.idx()];
            for (j, &n) in c.inputs.iter().enumerate() {
                buf[j] = v[n.idx()];
            }
            v[c.output.idx()] = c.kind.eval(&buf[..c.inputs.len()]);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv_chain(len: usize) -> Netlist {
        let mut b = NetlistBuilder::new("chain");
        let mut n = b.input("a");
        for _ in 0..len {
            n = b.gate(CellKind::INV, &[n]);
        }
        b.output(n);
        b.finish_unchecked()
    }

    #[test]
    fn chain_topo_is_chain_order() {
        let n = inv_chain(3);
        let order = n.topo_order().unwrap();
        let ids: Vec<_> = order.iter().map(|&c| n.cell(c).id.clone()).collect();
        assert_eq!(ids, vec!["g0", "g1", "g2"]);
    }

    #[test]
    fn diamond_topo_puts_join_last() {
        let mut b = NetlistBuilder::new("diamond");
        let a = b.input("a");
        let g1 = b.gate(CellKind::INV, &[a]);
        let g2 = b.gate(CellKind::BUF, &[a]);
        let g3 = b.gate(CellKind::AND2, &[g1, g2]);
        b.output(g3);
        let n = b.finish().unwrap();
        let order = n.topo_order().unwrap();
        assert_eq!(order.len(), 3);
        assert_eq!(n.cell(*order.last().unwrap()).id, "g2");
    }

    #[test]
    fn independent_cells_any_valid_order() {
        let mut b = NetlistBuilder::new("two");
        let a = b.input("a");
        let c = b.input("c");
        let x = b.gate(CellKind::INV, &[a]);
        let y = b.gate(CellKind::INV, &[c]);
        b.output(x);
        b.output(y);
        let n = b.finish().unwrap();
        assert_topo_respects_edges(&n, &n.topo_order().unwrap());
    }

    pub(crate) fn assert_topo_respects_edges(n: &Netlist, order: &[CellIdx]) {
        let mut pos = vec![usize::MAX; n.cells().len()];
        for (i, &c) in order.iter().enumerate() {
            pos[c.idx()] = i;
        }
        let drivers = n.drivers();
        for (i, c) in n.cells().iter().enumerate() {
            if c.kind.is_sequential() {
                continue;
            }
            for &inp in &c.inputs {
                if let Some(Driver::Cell(d)) = drivers[inp.idx()] {
                    if !n.cell(d).kind.is_sequential() {
                        assert!(pos[d.idx()] < pos[i], "{} before {}", n.cell(d).id, c.id);
                    }
                }
            }
        }
    }

    #[test]
    fn undriven_output_reported() {
        let mut n = inv_chain(1);
        let extra = NetId(n.nets.len() as u32);
        n.nets.push("dangling".into());
        n.net_index.insert("dangling".into(), extra);
        n.outputs.push(extra);
        let v = n.validate();
        assert_eq!(v, vec![Violation::UndrivenOutput { net: "dangling".into() }]);
    }

    #[test]
    fn xor_loop_between_flops_is_a_cycle() {
        // q -> x1 -> x2 -> x1 : the XOR pair forms a loop with no flop in it.
        let nets: Vec<String> = ["q", "x1", "x2", "d"].iter().map(|s| s.to_string()).collect();
        let cells = vec![
            Cell { id: "ff".into(), kind: CellKind::DFF, inputs: vec![NetId(3)], output: NetId(0), init: Some(false) },
            Cell { id: "xa".into(), kind: CellKind::XOR2, inputs: vec![NetId(0), NetId(2)], output: NetId(1), init: None },
            Cell { id: "xb".into(), kind: CellKind::XOR2, inputs: vec![NetId(1), NetId(0)], output: NetId(2), init: None },
            Cell { id: "bf".into(), kind: CellKind::BUF, inputs: vec![NetId(2)], output: NetId(3), init: None },
        ];
        let n = Netlist::from_parts("loop", BTreeMap::new(), nets, vec![], vec![NetId(3)], cells);
        let v = n.validate();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::CombinationalCycle { cells } => {
                let mut c = cells.clone();
                c.sort();
                assert_eq!(c, vec!["xa", "xb"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(n.topo_order().is_err());
    }

    #[test]
    fn flop_breaks_cycles() {
        let mut b = NetlistBuilder::new("toggle");
        let (ff, q) = b.dff(false);
        let d = b.gate(CellKind::INV, &[q]);
        b.connect_d(ff, d);
        b.output(q);
        let n = b.finish().unwrap();
        assert!(n.validate().is_empty());
        assert_eq!(n.topo_order().unwrap().len(), 1);
    }

    #[test]
    fn fanout_counts_pins_and_ports() {
        let mut b = NetlistBuilder::new("fan");
        let a = b.input("a");
        let w = b.gate(CellKind::BUF, &[a]);
        let x = b.gate(CellKind::AND2, &[w, w]);
        let y = b.gate(CellKind::INV, &[w]);
        b.output(x);
        b.output(y);
        b.output(w);
        let n = b.finish().unwrap();
        let f = n.fanout_counts();
        assert_eq!(f[w.idx()], 4);
        assert_eq!(f[x.idx()], 1);
        let pins: usize = n.cells().iter().map(|c| c.inputs.len()).sum();
        assert_eq!(f.iter().sum::<usize>(), pins + n.outputs().len());
    }
}
