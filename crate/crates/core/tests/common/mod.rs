// SPDX-License-Identifier: Apache-2.0
//! Reference implementations shared by the oracle suites and the
//! acceptance runner.
#![allow(dead_code)]

use agetrojan::bits::Bits;
use agetrojan::netlist::{CellKind, NetId, Netlist, NetlistBuilder};
use agetrojan::timing::{AgingState, DelayAnnotation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const MAX_PATHS: u64 = 10_000;

pub const KINDS: [CellKind; 8] = [
    CellKind::INV,
    CellKind::BUF,
    CellKind::AND2,
    CellKind::OR2,
    CellKind::NAND2,
    CellKind::XOR2,
    CellKind::NOR2,
    CellKind::MUX2,
];

/// Random sequential netlist: some inputs, some flops, gates reading random
/// earlier nets, outputs and flop D pins drawn from the gate outputs.
pub fn random_netlist(rng: &mut ChaCha8Rng) -> Netlist {
    let mut b = NetlistBuilder::new("rnd");
    let n_in = rng.random_range(1..5);
    let n_ff = rng.random_range(0..4);
    let n_gates = rng.random_range(3..30);
    let mut pool: Vec<NetId> = (0..n_in).map(|i| b.input(&format!("i{i}"))).collect();
    let ffs: Vec<_> = (0..n_ff).map(|_| b.dff(false)).collect();
    pool.extend(ffs.iter().map(|f| f.1));
    if rng.random_bool(0.3) {
        pool.push(b.const1());
    }
    let mut gates = Vec::new();
    for _ in 0..n_gates {
        let kind = KINDS[rng.random_range(0..KINDS.len())];
        // Bias towards recent nets to get deep paths.
        let ins: Vec<NetId> = (0..kind.arity())
            .map(|_| {
                let lo = pool.len().saturating_sub(6);
                if rng.random_bool(0.7) {
                    pool[rng.random_range(lo..pool.len())]
                } else {
                    pool[rng.random_range(0..pool.len())]
                }
            })
            .collect();
        let o = b.gate(kind, &ins);
        pool.push(o);
        gates.push(o);
    }
    for &(ff, _) in &ffs {
        let d = gates[rng.random_range(0..gates.len())];
        b.connect_d(ff, d);
    }
    let n_out = rng.random_range(1..4);
    for _ in 0..n_out {
        b.output(gates[rng.random_range(0..gates.len())]);
    }
    if !b.outputs().contains(gates.last().unwrap()) {
        b.output(*gates.last().unwrap());
    }
    b.finish().unwrap()
}

/// Small integer delays so ties are common and sums are exact.
pub fn random_annotation(n: &Netlist, rng: &mut ChaCha8Rng) -> DelayAnnotation {
    let ids = n.cells().iter().map(|c| c.id.clone()).collect();
    let delays = n.cells().iter().map(|c| if c.kind.is_const() { 0.0 } else { rng.random_range(1..6) as f64 }).collect();
    DelayAnnotation::from_cells(AgingState::FRESH, None, ids, delays)
}

/// Every path by depth-first enumeration, sorted by delay then cell ids.
pub fn brute_force(n: &Netlist, a: &DelayAnnotation) -> Vec<(f64, Vec<String>)> {
    let cells = n.cells();
    let delay = |i: usize| a.get(&cells[i].id).unwrap();
    let mut driver = vec![None; n.net_count()];
    for (i, c) in cells.iter().enumerate() {
        driver[c.output.idx()] = Some(i);
    }
    let mut is_pi = vec![false; n.net_count()];
    for &i in n.inputs() {
        is_pi[i.idx()] = true;
    }
    let mut endpoint = vec![false; n.net_count()];
    for &o in n.outputs() {
        endpoint[o.idx()] = true;
    }
    for c in cells {
        if c.kind == CellKind::DFF {
            endpoint[c.inputs[0].idx()] = true;
        }
    }
    // Combinational fan-out of each cell, one entry per reading cell.
    let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    for (j, c) in cells.iter().enumerate() {
        if c.kind == CellKind::DFF {
            continue;
        }
        let mut seen = Vec::new();
        for x in &c.inputs {
            if let Some(d) = driver[x.idx()] {
                if !seen.contains(&d) {
                    seen.push(d);
                    fanout[d].push(j);
                }
            }
        }
    }
    fn walk(
        c: usize,
        acc: f64,
        stack: &mut Vec<usize>,
        ctx: &(&[Vec<usize>], &dyn Fn(usize) -> f64, &dyn Fn(usize) -> bool),
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        stack.push(c);
        if (ctx.2)(c) {
            out.push((acc, stack.clone()));
        }
        for &f in &ctx.0[c] {
            walk(f, acc + (ctx.1)(f), stack, ctx, out);
        }
        stack.pop();
    }
    let is_end = |c: usize| endpoint[cells[c].output.idx()];
    let ctx: (&[Vec<usize>], &dyn Fn(usize) -> f64, &dyn Fn(usize) -> bool) = (&fanout, &delay, &is_end);
    let mut raw = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let starts = c.kind == CellKind::DFF || (!c.kind.is_const() && c.inputs.iter().any(|x| is_pi[x.idx()]));
        if starts {
            walk(i, delay(i), &mut Vec::new(), &ctx, &mut raw);
        }
    }
    let mut paths: Vec<(f64, Vec<String>)> =
        raw.into_iter().map(|(d, p)| (d, p.into_iter().map(|i| cells[i].id.clone()).collect())).collect();
    paths.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
    paths
}

/// Upper bound on the number of paths, used to skip oversized samples.
pub fn path_count(n: &Netlist) -> u64 {
    let order = n.topo_order().unwrap();
    let mut cnt = vec![1u64; n.cells().len()];
    let mut driver = vec![None; n.net_count()];
    for (i, c) in n.cells().iter().enumerate() {
        driver[c.output.idx()] = Some(i);
    }
    for &c in &order {
        let cell = n.cell(c);
        let from: u64 = cell.inputs.iter().filter_map(|x| driver[x.idx()]).map(|d| cnt[d]).sum();
        cnt[c.idx()] = cnt[c.idx()].saturating_add(from);
    }
    cnt.iter().fold(0u64, |a, &b| a.saturating_add(b))
}

/// Bit-by-bit reference: Hamming distance and the integer value of the
/// rising and falling masks.
pub fn feature_reference(y: &Bits, y0: &Bits) -> (u32, u128, u128) {
    let (mut ham, mut rise, mut fall) = (0, 0u128, 0u128);
    for (r, (a, b)) in y.to_bools().into_iter().zip(y0.to_bools()).enumerate() {
        if a != b {
            ham += 1;
        }
        if a && !b {
            rise |= 1 << r;
        }
        if b && !a {
            fall |= 1 << r;
        }
    }
    (ham, rise, fall)
}

pub fn feature_pair(rng: &mut ChaCha8Rng, m: usize) -> (Bits, Bits) {
    let y0 = Bits::truncate(rng.random(), m);
    let y = match rng.random_range(0..4) {
        0 => y0,
        // A few flipped bits, the common case in a sweep.
        1 => (0..rng.random_range(1..4)).fold(y0, |acc, _| {
            let r = rng.random_range(0..m);
            acc.with_bit(r, !acc.bit(r))
        }),
        _ => Bits::truncate(rng.random(), m),
    };
    (y, y0)
}
