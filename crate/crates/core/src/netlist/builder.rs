// SPDX-License-Identifier: Apache-2.0
use std::collections::{BTreeMap, HashMap};

use super::{Cell, CellIdx, CellKind, NetId, Netlist, NetlistError};

const UNCONNECTED: NetId = NetId(u32::MAX);

/// Incremental netlist construction used by the generators and the Trojan
/// inserter. Auto-generated identifiers carry the builder's prefix so edits
/// on an existing netlist never collide with its names.
pub struct NetlistBuilder {
    name: String,
    prefix: String,
    meta: BTreeMap<String, String>,
    nets: Vec<String>,
    net_index: HashMap<String, NetId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    cells: Vec<Cell>,
    cell_ids: HashMap<String, CellIdx>,
    counter: usize,
    const0: Option<NetId>,
    const1: Option<NetId>,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            prefix: String::new(),
            meta: BTreeMap::new(),
            nets: Vec::new(),
            net_index: HashMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            cells: Vec::new(),
            cell_ids: HashMap::new(),
            counter: 0,
            const0: None,
            const1: None,
        }
    }

    /// Starts from an existing netlist; new identifiers get `prefix`.
    pub fn extend(n: &Netlist, prefix: impl Into<String>) -> Self {
        let mut b = Self::new(n.name.clone());
        b.prefix = prefix.into();
        b.meta = n.meta.clone();
        b.nets = n.nets.clone();
        b.net_index = n.net_index.clone();
        b.inputs = n.inputs.clone();
        b.outputs = n.outputs.clone();
        b.cells = n.cells.clone();
        for (i, c) in n.cells.iter().enumerate() {
            b.cell_ids.insert(c.id.clone(), CellIdx(i as u32));
            match c.kind {
                CellKind::CONST0 if b.const0.is_none() => b.const0 = Some(c.output),
                CellKind::CONST1 if b.const1.is_none() => b.const1 = Some(c.output),
                _ => {}
            }
        }
        b
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn net_named(&mut self, name: &str) -> NetId {
        if let Some(&n) = self.net_index.get(name) {
            return n;
        }
        let id = NetId(self.nets.len() as u32);
        self.nets.push(name.to_string());
        self.net_index.insert(name.to_string(), id);
        id
    }

    pub fn net_name(&self, n: NetId) -> &str {
        &self.nets[n.idx()]
    }

    fn fresh(&mut self, stem: &str) -> String {
        loop {
            let s = format!("{}{}{}", self.prefix, stem, self.counter);
            self.counter += 1;
            if !self.net_index.contains_key(&s) && !self.cell_ids.contains_key(&s) {
                return s;
            }
        }
    }

    pub fn input(&mut self, name: &str) -> NetId {
        let n = self.net_named(name);
        self.inputs.push(n);
        n
    }

    pub fn output(&mut self, n: NetId) {
        self.outputs.push(n);
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    fn push_cell(&mut self, id: String, kind: CellKind, inputs: Vec<NetId>, output: NetId, init: Option<bool>) -> CellIdx {
        let idx = CellIdx(self.cells.len() as u32);
        self.cell_ids.insert(id.clone(), idx);
        self.cells.push(Cell { id, kind, inputs, output, init });
        idx
    }

    pub fn const0(&mut self) -> NetId {
        if let Some(n) = self.const0 {
            return n;
        }
        let name = self.fresh("zero");
        let n = self.net_named(&name);
        self.push_cell(format!("const:{name}"), CellKind::CONST0, vec![], n, None);
        self.const0 = Some(n);
        n
    }

    pub fn const1(&mut self) -> NetId {
        if let Some(n) = self.const1 {
            return n;
        }
        let name = self.fresh("one");
        let n = self.net_named(&name);
        self.push_cell(format!("const:{name}"), CellKind::CONST1, vec![], n, None);
        self.const1 = Some(n);
        n
    }

    pub fn constant(&mut self, bit: bool) -> NetId {
        if bit {
            self.const1()
        } else {
            self.const0()
        }
    }

    pub fn gate(&mut self, kind: CellKind, ins: &[NetId]) -> NetId {
        debug_assert_eq!(ins.len(), kind.arity());
        let stem = self.fresh("g");
        let out = self.net_named(&format!("{stem}_o"));
        self.push_cell(stem, kind, ins.to_vec(), out, None);
        out
    }

    /// Adds a gate driving an existing (currently undriven) net.
    pub fn gate_into(&mut self, kind: CellKind, ins: &[NetId], out: NetId) -> CellIdx {
        let stem = self.fresh("g");
        self.push_cell(stem, kind, ins.to_vec(), out, None)
    }

    /// Adds a flip-flop whose D pin is connected later with [`connect_d`].
    ///
    /// [`connect_d`]: Self::connect_d
    pub fn dff(&mut self, init: bool) -> (CellIdx, NetId) {
        let stem = self.fresh("r");
        let q = self.net_named(&format!("{stem}_q"));
        let c = self.push_cell(stem, CellKind::DFF, vec![UNCONNECTED], q, Some(init));
        (c, q)
    }

    pub fn connect_d(&mut self, ff: CellIdx, d: NetId) {
        let c = &mut self.cells[ff.idx()];
        assert_eq!(c.kind, CellKind::DFF);
        c.inputs[0] = d;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Moves the driver of `net` onto a fresh net and returns that net, so a
    /// new cell can be placed between the old driver and every load of `net`.
    pub fn split_driver(&mut self, net: NetId) -> Option<NetId> {
        let pos = self.cells.iter().position(|c| c.output == net)?;
        let name = self.fresh("pre");
        let pre = self.net_named(&name);
        self.cells[pos].output = pre;
        Some(pre)
    }

    pub fn finish_unchecked(self) -> Netlist {
        Netlist {
            name: self.name,
            meta: self.meta,
            nets: self.nets,
            net_index: self.net_index,
            inputs: self.inputs,
            outputs: self.outputs,
            cells: self.cells,
        }
    }

    pub fn finish(self) -> Result<Netlist, NetlistError> {
        if let Some(c) = self.cells.iter().find(|c| c.inputs.contains(&UNCONNECTED)) {
            return Err(NetlistError::Invalid(vec![super::Violation::UndrivenNet {
                net: "<unconnected D>".into(),
                users: vec![c.id.clone()],
            }]));
        }
        self.finish_unchecked().validated()
    }
}
