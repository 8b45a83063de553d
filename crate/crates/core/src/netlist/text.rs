// SPDX-License-Identifier: Apache-2.0
//! Line-oriented netlist text format.
//!
//! ```text
//! # meta n_read=9
//! module mult4
//! input a0 a1 a2 a3
//! output p0 p1
//! const0 zero
//! gate g1 AND2 out=n1 in=a0,a1
//! dff r0 q=q0 d=n1 init=0
//! end
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use super::{Cell, CellKind, NetId, Netlist, NetlistError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unknown statement `{0}`")]
    UnknownStatement(String),
    #[error("unknown cell kind `{0}`")]
    UnknownKind(String),
    #[error("cell kind `{0}` cannot be declared with `gate`")]
    NotAGate(String),
    #[error("invalid identifier `{0}`")]
    BadIdent(String),
    #[error("`{kind}` takes {expected} inputs, got {got}")]
    Arity { kind: String, expected: usize, got: usize },
    #[error("missing `module` header")]
    MissingModule,
    #[error("missing `end`")]
    MissingEnd,
    #[error("statement after `end`")]
    TrailingStatement,
    #[error("duplicate `module` header")]
    DuplicateModule,
    #[error("malformed meta entry `{0}`")]
    BadMeta(String),
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | '$' | '/'))
}

struct Tokens<'a> {
    line: usize,
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((s, &text[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push((s, &text[s..]));
        }
        Self { line, toks, pos: 0 }
    }

    fn err(&self, col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, col: col + 1, kind }
    }

    fn end_col(&self) -> usize {
        self.toks.last().map(|(c, t)| c + t.len()).unwrap_or(0)
    }

    fn next(&mut self, what: &'static str) -> Result<(usize, &'a str), ParseError> {
        let t = self.toks.get(self.pos).copied();
        self.pos += 1;
        t.ok_or_else(|| self.err(self.end_col(), ParseErrorKind::Expected(what)))
    }

    fn ident(&mut self, what: &'static str) -> Result<&'a str, ParseError> {
        let (c, t) = self.next(what)?;
        if !valid_ident(t) {
            return Err(self.err(c, ParseErrorKind::BadIdent(t.to_string())));
        }
        Ok(t)
    }

    fn keyed(&mut self, key: &'static str) -> Result<(usize, &'a str), ParseError> {
        let (c, t) = self.next(key)?;
        match t.strip_prefix(key) {
            Some(v) => Ok((c + key.len(), v)),
            None => Err(self.err(c, ParseErrorKind::Expected(key))),
        }
    }

    fn rest(&mut self) -> Vec<(usize, &'a str)> {
        let r = self.toks[self.pos.min(self.toks.len())..].to_vec();
        self.pos = self.toks.len();
        r
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            Some(&(c, _)) => Err(self.err(c, ParseErrorKind::Expected("end of statement"))),
            None => Ok(()),
        }
    }
}

struct State {
    nets: Vec<String>,
    index: HashMap<String, NetId>,
}

impl State {
    fn net(&mut self, name: &str) -> NetId {
        if let Some(&n) = self.index.get(name) {
            return n;
        }
        let id = NetId(self.nets.len() as u32);
        self.nets.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }
}

/// Parses netlist text and validates the result.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    parse_unchecked(text)?.validated()
}

fn parse_unchecked(text: &str) -> Result<Netlist, ParseError> {
    let mut st = State { nets: Vec::new(), index: HashMap::new() };
    let mut meta = BTreeMap::new();
    let mut name: Option<String> = None;
    let mut ended = false;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut last_line = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        last_line = line;
        let trimmed = raw.trim_start();
        if let Some(m) = trimmed.strip_prefix("# meta ") {
            let col0 = raw.len() - trimmed.len() + "# meta ".len();
            let mut toks = Tokens::new(line, m);
            for (c, kv) in toks.rest() {
                let (k, v) = kv.split_once('=').ok_or(ParseError {
                    line,
                    col: col0 + c + 1,
                    kind: ParseErrorKind::BadMeta(kv.to_string()),
                })?;
                meta.insert(k.to_string(), v.to_string());
            }
            continue;
        }
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut t = Tokens::new(line, body);
        let Some(&(c0, head)) = t.toks.first() else { continue };
        t.pos = 1;
        if ended {
            return Err(t.err(c0, ParseErrorKind::TrailingStatement));
        }
        if name.is_none() && head != "module" {
            return Err(t.err(c0, ParseErrorKind::MissingModule));
        }
        match head {
            "module" => {
                if name.is_some() {
                    return Err(t.err(c0, ParseErrorKind::DuplicateModule));
                }
                name = Some(t.ident("module name")?.to_string());
                t.finish()?;
            }
            "end" => {
                t.finish()?;
                ended = true;
            }
            "input" | "output" => {
                let rest = t.rest();
                if rest.is_empty() {
                    return Err(t.err(t.end_col(), ParseErrorKind::Expected("net name")));
                }
                for (c, n) in rest {
                    if !valid_ident(n) {
                        return Err(t.err(c, ParseErrorKind::BadIdent(n.to_string())));
                    }
                    let id = st.net(n);
                    if head == "input" {
                        inputs.push(id);
                    } else {
                        outputs.push(id);
                    }
                }
            }
            "const0" | "const1" => {
                let net = t.ident("net name")?;
                t.finish()?;
                let kind = if head == "const0" { CellKind::CONST0 } else { CellKind::CONST1 };
                let out = st.net(net);
                cells.push(Cell { id: format!("const:{net}"), kind, inputs: vec![], output: out, init: None });
            }
            "gate" => {
                let id = t.ident("cell id")?;
                let (kc, kname) = t.next("cell kind")?;
                let kind: CellKind =
                    kname.parse().map_err(|k| t.err(kc, ParseErrorKind::UnknownKind(k)))?;
                if kind.is_sequential() || kind.is_const() {
                    return Err(t.err(kc, ParseErrorKind::NotAGate(kname.to_string())));
                }
                let (oc, out) = t.keyed("out=")?;
                if !valid_ident(out) {
                    return Err(t.err(oc, ParseErrorKind::BadIdent(out.to_string())));
                }
                let (ic, ins) = t.keyed("in=")?;
                t.finish()?;
                let mut in_ids = Vec::new();
                let mut col = ic;
                for n in ins.split(',') {
                    if !valid_ident(n) {
                        return Err(t.err(col, ParseErrorKind::BadIdent(n.to_string())));
                    }
                    in_ids.push(st.net(n));
                    col += n.len() + 1;
                }
                if in_ids.len() != kind.arity() {
                    return Err(t.err(
                        ic,
                        ParseErrorKind::Arity { kind: kname.to_string(), expected: kind.arity(), got: in_ids.len() },
                    ));
                }
                let o = st.net(out);
                cells.push(Cell { id: id.to_string(), kind, inputs: in_ids, output: o, init: None });
            }
            "dff" => {
                let id = t.ident("cell id")?;
                let (qc, q) = t.keyed("q=")?;
                if !valid_ident(q) {
                    return Err(t.err(qc, ParseErrorKind::BadIdent(q.to_string())));
                }
                let (dc, d) = t.keyed("d=")?;
                if !valid_ident(d) {
                    return Err(t.err(dc, ParseErrorKind::BadIdent(d.to_string())));
                }
                let (ic, init) = t.keyed("init=")?;
                let init = match init {
                    "0" => false,
                    "1" => true,
                    _ => return Err(t.err(ic, ParseErrorKind::Expected("init=0 or init=1"))),
                };
                t.finish()?;
                let qn = st.net(q);
                let dn = st.net(d);
                cells.push(Cell { id: id.to_string(), kind: CellKind::DFF, inputs: vec![dn], output: qn, init: Some(init) });
            }
            other => return Err(t.err(c0, ParseErrorKind::UnknownStatement(other.to_string()))),
        }
    }
    let Some(name) = name else {
        return Err(ParseError { line: last_line.max(1), col: 1, kind: ParseErrorKind::MissingModule });
    };
    if !ended {
        return Err(ParseError { line: last_line.max(1), col: 1, kind: ParseErrorKind::MissingEnd });
    }
    Ok(Netlist::from_parts(name, meta, st.nets, inputs, outputs, cells))
}

/// Writes the text form. `parse_netlist(serialize_netlist(n))` reproduces
/// `n` up to net numbering; a second round trip is an exact fixed point.
pub fn serialize_netlist(n: &Netlist) -> String {
    let mut s = String::new();
    for (k, v) in &n.meta {
        let _ = writeln!(s, "# meta {k}={v}");
    }
    let _ = writeln!(s, "module {}", n.name);
    if !n.inputs.is_empty() {
        s.push_str("input");
        for &i in &n.inputs {
            s.push(' ');
            s.push_str(n.net_name(i));
        }
        s.push('\n');
    }
    if !n.outputs.is_empty() {
        s.push_str("output");
        for &o in &n.outputs {
            s.push(' ');
            s.push_str(n.net_name(o));
        }
        s.push('\n');
    }
    for c in &n.cells {
        match c.kind {
            CellKind::CONST0 => {
                let _ = writeln!(s, "const0 {}", n.net_name(c.output));
            }
            CellKind::CONST1 => {
                let _ = writeln!(s, "const1 {}", n.net_name(c.output));
            }
            CellKind::DFF => {
                let _ = writeln!(
                    s,
                    "dff {} q={} d={} init={}",
                    c.id,
                    n.net_name(c.output),
                    n.net_name(c.inputs[0]),
                    u8::from(c.init.unwrap_or(false))
                );
            }
            kind => {
                let ins: Vec<&str> = c.inputs.iter().map(|&i| n.net_name(i)).collect();
                let _ = writeln!(s, "gate {} {} out={} in={}", c.id, kind, n.net_name(c.output), ins.join(","));
            }
        }
    }
    s.push_str("end\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Violation;

    #[test]
    fn minimal_inverter() {
        let n = parse_netlist("module m\ninput a\noutput y\ngate g1 INV out=y in=a\nend\n").unwrap();
        assert_eq!(n.cells().len(), 1);
        assert_eq!(n.width_in(), 1);
        assert_eq!(n.width_out(), 1);
        assert_eq!(n.name(), "m");
    }

    #[test]
    fn duplicate_driver_names_the_net() {
        let txt = "module m\ninput a b\noutput y\ngate g1 INV out=y in=a\ngate g2 INV out=y in=b\nend\n";
        match parse_netlist(txt) {
            Err(NetlistError::Invalid(v)) => {
                assert!(v.contains(&Violation::DuplicateDriver {
                    net: "y".into(),
                    drivers: vec!["g1".into(), "g2".into()]
                }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_cycle() {
        let txt = "module m\noutput y\ngate g1 INV out=y in=y\nend\n";
        match parse_netlist(txt) {
            Err(NetlistError::Invalid(v)) => {
                assert_eq!(v, vec![Violation::CombinationalCycle { cells: vec!["g1".into()] }]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undriven_net_reported() {
        let txt = "module m\ninput a\noutput y\ngate g1 AND2 out=y in=a,b\nend\n";
        match parse_netlist(txt) {
            Err(NetlistError::Invalid(v)) => {
                assert_eq!(v, vec![Violation::UndrivenNet { net: "b".into(), users: vec!["g1".into()] }]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_kind_has_position() {
        let txt = "module m\ninput a\noutput y\ngate g1 FOO3 out=y in=a\nend\n";
        match parse_netlist(txt) {
            Err(NetlistError::Parse(e)) => {
                assert_eq!((e.line, e.col), (4, 9));
                assert_eq!(e.kind, ParseErrorKind::UnknownKind("FOO3".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_have_positions() {
        let e = |t: &str| match parse_netlist(t) {
            Err(NetlistError::Parse(e)) => e,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(e("input a\n").kind, ParseErrorKind::MissingModule);
        assert_eq!(e("module m\n").kind, ParseErrorKind::MissingEnd);
        let x = e("module m\ninput a\ngate g1 AND2 out=y in=a\nend\n");
        assert_eq!(x.line, 3);
        assert!(matches!(x.kind, ParseErrorKind::Arity { .. }));
        let x = e("module m\ndff r q=a d=b init=2\nend\n");
        assert_eq!((x.line, x.col), (2, 20));
        assert!(matches!(e("module m\nend\ninput a\n").kind, ParseErrorKind::TrailingStatement));
        assert!(matches!(e("module m\nwire x\nend\n").kind, ParseErrorKind::UnknownStatement(_)));
    }

    #[test]
    fn comments_meta_and_roundtrip() {
        let txt = "# meta n_read=3\n# a comment\nmodule t # trailing\ninput a\ninput b\noutput q\nconst1 vdd\ngate m0 MUX2 out=d in=a,b,vdd\ndff r0 q=q d=d init=1\nend\n";
        let n = parse_netlist(txt).unwrap();
        assert_eq!(n.n_read(), Some(3));
        assert_eq!(n.width_in(), 2);
        let s = serialize_netlist(&n);
        let n2 = parse_netlist(&s).unwrap();
        assert_eq!(n, n2);
        assert_eq!(serialize_netlist(&n2), s);
    }
}
