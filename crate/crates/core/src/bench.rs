// SPDX-License-Identifier: Apache-2.0
//! Clean benchmark circuits and input pattern sets.
//!
//! Two sequential designs are generated:
//! - a shift-and-add multiplier (MSB-first, left-shifting accumulator) with
//!   a `2W`-bit ripple-carry adder in the register loop;
//! - an iterated substitution-permutation network with 4-bit S-boxes, a
//!   bit permutation and a rotating key register.
//!
//! Both load their operands at the first clock edge and expose the next
//! state of the result register as primary outputs, so the value read at
//! cycle `n_read` includes the final combinational step.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::netlist::{CellKind, NetId, Netlist, NetlistBuilder, NetlistError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BenchKind {
    MultShiftAdd,
    SpnCipher,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub kind: BenchKind,
    pub width: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Initial round key (SPN only); zero when absent.
    #[serde(default)]
    pub key: Option<Bits>,
    /// Apply the bit permutation (SPN only); off gives an S-box-only build.
    #[serde(default = "yes")]
    pub permute: bool,
}

fn default_rounds() -> usize {
    4
}

fn yes() -> bool {
    true
}

impl BenchSpec {
    pub fn multiplier(width: usize) -> Self {
        Self { kind: BenchKind::MultShiftAdd, width, rounds: 1, key: None, permute: true }
    }

    pub fn spn(width: usize, rounds: usize, key: u128) -> Self {
        Self {
            kind: BenchKind::SpnCipher,
            width,
            rounds,
            key: Some(Bits::truncate(key, width)),
            permute: true,
        }
    }

    pub fn width_in(&self) -> usize {
        match self.kind {
            BenchKind::MultShiftAdd => 2 * self.width,
            BenchKind::SpnCipher => self.width,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("width {0} out of range")]
    Width(usize),
    #[error("rounds {0} out of range 1..=10")]
    Rounds(usize),
    #[error("key has width {got}, block is {expected}")]
    KeyWidth { expected: usize, got: usize },
    #[error("generated netlist is invalid: {0}")]
    Netlist(#[from] NetlistError),
}

pub fn generate(spec: &BenchSpec) -> Result<Netlist, BenchError> {
    match spec.kind {
        BenchKind::MultShiftAdd => gen_multiplier(spec),
        BenchKind::SpnCipher => gen_spn(spec),
    }
}

/// Ripple-carry sum of two equal-width words with carry-in 0; returns the
/// sum bits and the carry out.
fn ripple_add(b: &mut NetlistBuilder, x: &[NetId], y: &[NetId]) -> (Vec<NetId>, NetId) {
    let mut carry: Option<NetId> = None;
    let mut sum = Vec::with_capacity(x.len());
    for (&p, &q) in x.iter().zip(y) {
        let h = b.gate(CellKind::XOR2, &[p, q]);
        let g = b.gate(CellKind::AND2, &[p, q]);
        match carry {
            None => {
                sum.push(h);
                carry = Some(g);
            }
            Some(c) => {
                sum.push(b.gate(CellKind::XOR2, &[h, c]));
                let t = b.gate(CellKind::AND2, &[h, c]);
                carry = Some(b.gate(CellKind::OR2, &[g, t]));
            }
        }
    }
    (sum, carry.expect("non-empty operands"))
}

/// Shift-and-add multiplier. Inputs `a[0..W]` then `b[0..W]`; outputs
/// `p[0..2W]`, valid at cycle `W + 1`.
///
/// Edge 1 loads `a`, `b` and clears the accumulator. Each later edge sets
/// `P = 2P + (msb(B) ? A : 0)` and shifts `B` left. A binary step counter
/// raises `done` after the last step, which freezes `P`.
pub fn gen_multiplier(spec: &BenchSpec) -> Result<Netlist, BenchError> {
    let w = spec.width;
    if !(4..=64).contains(&w) {
        return Err(BenchError::Width(w));
    }
    let mut b = NetlistBuilder::new(format!("mult{w}"));
    b.meta("n_read", w + 1);
    b.meta("bench", "mult_shift_add");
    let a_in: Vec<NetId> = (0..w).map(|i| b.input(&format!("a[{i}]"))).collect();
    let b_in: Vec<NetId> = (0..w).map(|i| b.input(&format!("b[{i}]"))).collect();

    let (s_ff, start) = b.dff(true);
    let zero = b.const0();
    b.connect_d(s_ff, zero);
    let idle = b.gate(CellKind::INV, &[start]);

    let a_reg: Vec<_> = (0..w).map(|_| b.dff(false)).collect();
    for (i, &(ff, q)) in a_reg.iter().enumerate() {
        let d = b.gate(CellKind::MUX2, &[q, a_in[i], start]);
        b.connect_d(ff, d);
    }
    let b_reg: Vec<_> = (0..w).map(|_| b.dff(false)).collect();
    for i in 0..w {
        let shifted = if i == 0 { zero } else { b_reg[i - 1].1 };
        let d = b.gate(CellKind::MUX2, &[shifted, b_in[i], start]);
        b.connect_d(b_reg[i].0, d);
    }

    // Step counter: cleared at edge 1, then counts up and sticks at W, the
    // value it holds from cycle W + 2 on.
    let cbits = usize::BITS as usize - w.leading_zeros() as usize;
    let cnt: Vec<_> = (0..cbits).map(|_| b.dff(false)).collect();
    let lits: Vec<NetId> = (0..cbits)
        .map(|i| if w >> i & 1 == 1 { cnt[i].1 } else { b.gate(CellKind::INV, &[cnt[i].1]) })
        .collect();
    let mut done = lits[0];
    for &l in &lits[1..] {
        done = b.gate(CellKind::AND2, &[done, l]);
    }
    let mut carry = cnt[0].1;
    for i in 0..cbits {
        let inc = if i == 0 {
            b.gate(CellKind::INV, &[cnt[0].1])
        } else {
            let s = b.gate(CellKind::XOR2, &[cnt[i].1, carry]);
            if i + 1 < cbits {
                carry = b.gate(CellKind::AND2, &[cnt[i].1, carry]);
            }
            s
        };
        let held = b.gate(CellKind::MUX2, &[inc, cnt[i].1, done]);
        let d = b.gate(CellKind::AND2, &[held, idle]);
        b.connect_d(cnt[i].0, d);
    }

    let p_reg: Vec<_> = (0..2 * w).map(|_| b.dff(false)).collect();
    let msb = b_reg[w - 1].1;
    let mut addend: Vec<NetId> = a_reg.iter().map(|&(_, q)| b.gate(CellKind::AND2, &[q, msb])).collect();
    addend.resize(2 * w, zero);
    let mut doubled = vec![zero];
    doubled.extend(p_reg[..2 * w - 1].iter().map(|&(_, q)| q));
    let (next, _) = ripple_add(&mut b, &doubled, &addend);

    for i in 0..2 * w {
        let cleared = b.gate(CellKind::AND2, &[next[i], idle]);
        let p = b.net_named(&format!("p[{i}]"));
        b.gate_into(CellKind::MUX2, &[cleared, p_reg[i].1, done], p);
        b.connect_d(p_reg[i].0, p);
        b.output(p);
    }
    Ok(b.finish()?)
}

/// PRESENT S-box.
pub const SBOX: [u8; 16] = [0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2];

/// Destination of bit `i` under the SPN bit permutation.
pub fn spn_perm(width: usize, i: usize) -> usize {
    if i == width - 1 {
        i
    } else {
        i * (width / 4) % (width - 1)
    }
}

/// Software model of [`gen_spn`]: the block after `rounds` rounds.
pub fn spn_reference(spec: &BenchSpec, x: u128) -> u128 {
    let w = spec.width;
    let mask = if w == 128 { u128::MAX } else { (1u128 << w) - 1 };
    let rotl = |k: u128, r: usize| ((k << (r % w)) | (k >> ((w - r % w) % w))) & mask;
    let key0 = spec.key.map_or(0, |k| k.value());
    let mut s = x & mask;
    for r in 1..=spec.rounds {
        let k = rotl(key0, r);
        let t = s ^ k;
        let mut sub = 0u128;
        for j in 0..w / 4 {
            sub |= (SBOX[((t >> (4 * j)) & 0xF) as usize] as u128) << (4 * j);
        }
        s = if spec.permute {
            (0..w).fold(0u128, |acc, i| acc | (((sub >> i) & 1) << spn_perm(w, i)))
        } else {
            sub
        };
    }
    s
}

fn sbox_gates(b: &mut NetlistBuilder, x: [NetId; 4]) -> [NetId; 4] {
    let nx: Vec<NetId> = x.iter().map(|&v| b.gate(CellKind::INV, &[v])).collect();
    let lit = |v: usize, bit: bool| if bit { x[v] } else { nx[v] };
    let decode = |b: &mut NetlistBuilder, lo: usize| -> Vec<NetId> {
        (0..4).map(|m| b.gate(CellKind::AND2, &[lit(lo, m & 1 == 1), lit(lo + 1, m & 2 == 2)])).collect()
    };
    let low = decode(b, 0);
    let high = decode(b, 2);
    let minterm: Vec<NetId> = (0..16).map(|v| b.gate(CellKind::AND2, &[low[v & 3], high[v >> 2]])).collect();
    std::array::from_fn(|bit| {
        let mut terms: Vec<NetId> = (0..16).filter(|&v| SBOX[v] >> bit & 1 == 1).map(|v| minterm[v]).collect();
        while terms.len() > 1 {
            terms = terms
                .chunks(2)
                .map(|c| if c.len() == 2 { b.gate(CellKind::OR2, &[c[0], c[1]]) } else { c[0] })
                .collect();
        }
        terms[0]
    })
}

/// Iterated SPN. Inputs `x[0..W]`; outputs `y[0..W]`, valid at cycle
/// `rounds + 1`. Round `r` (1-based) uses the initial key rotated left by
/// `r` bits.
pub fn gen_spn(spec: &BenchSpec) -> Result<Netlist, BenchError> {
    let w = spec.width;
    if w != 16 && w != 32 {
        return Err(BenchError::Width(w));
    }
    if !(1..=10).contains(&spec.rounds) {
        return Err(BenchError::Rounds(spec.rounds));
    }
    let key = spec.key.unwrap_or(Bits::zero(w));
    if key.width() != w {
        return Err(BenchError::KeyWidth { expected: w, got: key.width() });
    }
    let mut b = NetlistBuilder::new(format!("spn{w}r{}", spec.rounds));
    b.meta("n_read", spec.rounds + 1);
    b.meta("bench", "spn_cipher");
    let x_in: Vec<NetId> = (0..w).map(|i| b.input(&format!("x[{i}]"))).collect();

    let (s_ff, start) = b.dff(true);
    let zero = b.const0();
    b.connect_d(s_ff, zero);

    // Rotates left at every edge: during cycle c it holds the initial key
    // rotated by c - 1, and round r runs in cycle r + 1.
    let k_reg: Vec<_> = (0..w).map(|i| b.dff(key.bit(i))).collect();
    for i in 0..w {
        b.connect_d(k_reg[i].0, k_reg[(i + w - 1) % w].1);
    }
    let rk: Vec<NetId> = k_reg.iter().map(|&(_, q)| q).collect();

    let s_reg: Vec<_> = (0..w).map(|_| b.dff(false)).collect();
    let mixed: Vec<NetId> = (0..w).map(|i| b.gate(CellKind::XOR2, &[s_reg[i].1, rk[i]])).collect();
    let mut sub = Vec::with_capacity(w);
    for j in 0..w / 4 {
        sub.extend(sbox_gates(&mut b, [mixed[4 * j], mixed[4 * j + 1], mixed[4 * j + 2], mixed[4 * j + 3]]));
    }
    let mut permuted = vec![zero; w];
    for (i, &v) in sub.iter().enumerate() {
        permuted[if spec.permute { spn_perm(w, i) } else { i }] = v;
    }
    for i in 0..w {
        let y = b.net_named(&format!("y[{i}]"));
        b.gate_into(CellKind::MUX2, &[permuted[i], x_in[i], start], y);
        b.connect_d(s_reg[i].0, y);
        b.output(y);
    }
    Ok(b.finish()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Structured,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub width: usize,
    pub inputs: Vec<Bits>,
    pub provenance: Vec<Provenance>,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Drops every occurrence of `x`.
    pub fn exclude(&mut self, x: &Bits) {
        let keep: Vec<bool> = self.inputs.iter().map(|v| v != x).collect();
        let mut k = keep.iter();
        self.inputs.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.provenance.retain(|_| *k.next().unwrap());
    }
}

/// Structured vectors first (all-0, all-1, walking 1, walking 0, the two
/// alternating words), then `n_random` seeded random vectors; duplicates
/// keep their first occurrence.
pub fn gen_patterns(width: usize, n_random: usize, seed: u64) -> PatternSet {
    let all = Bits::truncate(u128::MAX, width);
    let mut cand: Vec<(Bits, Provenance)> = vec![(Bits::zero(width), Provenance::Structured), (all, Provenance::Structured)];
    for i in 0..width {
        cand.push((Bits::zero(width).with_bit(i, true), Provenance::Structured));
    }
    for i in 0..width {
        cand.push((all.with_bit(i, false), Provenance::Structured));
    }
    let alt = Bits::truncate(0x5555_5555_5555_5555_5555_5555_5555_5555, width);
    cand.push((alt, Provenance::Structured));
    cand.push((Bits::truncate(!alt.value(), width), Provenance::Structured));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        cand.push((Bits::truncate(rng.random::<u128>(), width), Provenance::Random));
    }
    let mut seen = HashSet::new();
    let mut set = PatternSet { width, inputs: Vec::new(), provenance: Vec::new() };
    for (v, p) in cand {
        if seen.insert(v) {
            set.inputs.push(v);
            set.provenance.push(p);
        }
    }
    set
}

/// Packs multiplier operands into an input word (`a` in the low half).
pub fn mult_input(w: usize, a: u64, b: u64) -> Bits {
    Bits::truncate(a as u128 | (b as u128) << w, 2 * w)
}
