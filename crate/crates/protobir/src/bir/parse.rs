//! Line-oriented text format for BIR programs, and its printer.
//!
//! ```text
//! var i: 64
//! block 100:
//!   i := (i + 1:64)
//!   cjmp (i < 3:64), @100, @101
//! block 101:
//!   halt
//! ```

use super::eval::type_of;
use super::partition::LabelPartition;
use super::syntax::{valid_width, BinOp, BirExp, BirStmt, BirVal, Block, Label, Ty, UnOp, Word};
use super::{reserved_types, Program};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, col, msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(u128),
    Word(Word),
    Label(Label),
    Sym(&'static str),
}

const SYMBOLS: [&str; 19] = [
    "<<", ">>", "==", "!=", "<=", ":=", "+", "-", "*", "/", "%", "&", "|", "^", "<", "!", "(", ")", ",",
];

fn lex(line: &str, lineno: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let col = i + 1;
        if c == '@' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i == start {
                return Err(perr(lineno, col, "empty label"));
            }
            let s: String = chars[start..i].iter().collect();
            out.push((Tok::Label(Label::parse(&s)), col));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = parse_int(&s).ok_or_else(|| perr(lineno, col, format!("bad number `{s}`")))?;
            if i < chars.len() && chars[i] == ':' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
                i += 1;
                let ws = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let w: String = chars[ws..i].iter().collect();
                let w: u8 = w.parse().map_err(|_| perr(lineno, col, "missing width after `:`"))?;
                if !valid_width(w) {
                    return Err(perr(lineno, col, format!("width {w} not in {{1,8,16,32,64,128}}")));
                }
                if w < 128 && v >> w != 0 {
                    return Err(perr(lineno, col, format!("constant {s} does not fit in {w} bits")));
                }
                out.push((Tok::Word(Word::new(v, w)), col));
            } else {
                out.push((Tok::Num(v), col));
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(*s)) {
            Some(s) => {
                out.push((Tok::Sym(s), col));
                i += s.len();
            }
            None if c == ':' => {
                out.push((Tok::Sym(":"), col));
                i += 1;
            }
            None => return Err(perr(lineno, col, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

fn parse_int(s: &str) -> Option<u128> {
    if let Some(h) = s.strip_prefix("0x") {
        u128::from_str_radix(h, 16).ok()
    } else if let Some(b) = s.strip_prefix("0b") {
        u128::from_str_radix(b, 2).ok()
    } else {
        s.parse().ok()
    }
}

struct ExpParser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
}

fn binop_of(s: &str) -> Option<(BinOp, u8)> {
    Some(match s {
        "|" => (BinOp::Or, 1),
        "^" => (BinOp::Xor, 2),
        "&" => (BinOp::And, 3),
        "==" => (BinOp::Eq, 4),
        "!=" => (BinOp::Neq, 4),
        "<" => (BinOp::Lt, 5),
        "<=" => (BinOp::Le, 5),
        "<<" => (BinOp::Shl, 6),
        ">>" => (BinOp::Shr, 6),
        "+" => (BinOp::Plus, 7),
        "-" => (BinOp::Minus, 7),
        "*" => (BinOp::Mult, 8),
        "/" => (BinOp::Div, 8),
        "%" => (BinOp::Mod, 8),
        _ => return None,
    })
}

impl<'a> ExpParser<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or_else(|| self.toks.last().map_or(1, |t| t.1 + 1), |t| t.1)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        perr(self.line, self.col(), msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Sym(x)) if *x == s => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{s}`"))),
        }
    }

    fn exp(&mut self, min_prec: u8) -> Result<BirExp, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Sym(s)) = self.peek() {
            let Some((op, prec)) = binop_of(s) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.exp(prec + 1)?;
            lhs = BirExp::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<BirExp, ParseError> {
        match self.peek() {
            Some(Tok::Sym("!")) => {
                self.pos += 1;
                Ok(BirExp::un(UnOp::Not, self.unary()?))
            }
            Some(Tok::Sym("-")) => {
                self.pos += 1;
                Ok(BirExp::un(UnOp::Neg, self.unary()?))
            }
            _ => self.atom(),
        }
    }

    fn width_arg(&mut self) -> Result<u8, ParseError> {
        match self.next() {
            Some(Tok::Num(n)) if n <= 128 && valid_width(n as u8) => Ok(n as u8),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a width in {1,8,16,32,64,128}"))
            }
        }
    }

    fn atom(&mut self) -> Result<BirExp, ParseError> {
        let col = self.col();
        match self.next() {
            Some(Tok::Word(w)) => Ok(BirExp::Const(BirVal::Word(w))),
            Some(Tok::Label(l)) => Ok(BirExp::label(l)),
            Some(Tok::Num(_)) => Err(perr(self.line, col, "constant needs a width, e.g. `5:64`")),
            Some(Tok::Sym("(")) => {
                let e = self.exp(0)?;
                self.expect(")")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "ite" => {
                    self.expect("(")?;
                    let c = self.exp(0)?;
                    self.expect(",")?;
                    let a = self.exp(0)?;
                    self.expect(",")?;
                    let b = self.exp(0)?;
                    self.expect(")")?;
                    Ok(BirExp::ite(c, a, b))
                }
                "load" => {
                    self.expect("(")?;
                    let m = self.exp(0)?;
                    self.expect(",")?;
                    let a = self.exp(0)?;
                    self.expect(",")?;
                    let w = self.width_arg()?;
                    self.expect(")")?;
                    Ok(BirExp::load(m, a, w))
                }
                "store" => {
                    self.expect("(")?;
                    let m = self.exp(0)?;
                    self.expect(",")?;
                    let a = self.exp(0)?;
                    self.expect(",")?;
                    let v = self.exp(0)?;
                    self.expect(",")?;
                    let w = self.width_arg()?;
                    self.expect(")")?;
                    Ok(BirExp::store(m, a, v, w))
                }
                _ => Ok(BirExp::Var(name)),
            },
            _ => Err(perr(self.line, col, "expected an expression")),
        }
    }
}

fn parse_exp_toks(toks: &[(Tok, usize)], line: usize) -> Result<BirExp, ParseError> {
    let mut p = ExpParser { toks, pos: 0, line };
    let e = p.exp(0)?;
    if p.pos != toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// Splits a token list on top-level commas.
fn split_commas(toks: &[(Tok, usize)]) -> Vec<&[(Tok, usize)]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, (t, _)) in toks.iter().enumerate() {
        match t {
            Tok::Sym("(") => depth += 1,
            Tok::Sym(")") => depth -= 1,
            Tok::Sym(",") if depth == 0 => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&toks[start..]);
    parts
}

/// Parses an expression on its own (used by tests and the CLI).
pub fn parse_exp(text: &str) -> Result<BirExp, ParseError> {
    parse_exp_toks(&lex(text, 1)?, 1)
}

/// Parses program text and attaches the partition (TOML text, may be empty).
pub fn parse_program(text: &str, partition_toml: &str) -> Result<Program, ParseError> {
    let partition = LabelPartition::from_toml(partition_toml).map_err(|e| perr(0, 0, e.to_string()))?;
    parse_with_partition(text, partition)
}

pub fn parse_with_partition(text: &str, partition: LabelPartition) -> Result<Program, ParseError> {
    let mut decls: BTreeMap<String, Ty> = BTreeMap::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut spans: Vec<Vec<(usize, usize)>> = Vec::new();
    let reserved = reserved_types();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let col0 = toks[0].1;
        match &toks[0].0 {
            Tok::Ident(k) if k == "var" => {
                let (name, ty) = match toks.get(1..) {
                    Some([(Tok::Ident(n), _), (Tok::Sym(":"), _), (t, c)]) => {
                        let ty = match t {
                            Tok::Num(w) if *w <= 128 && valid_width(*w as u8) => Ty::Word(*w as u8),
                            Tok::Ident(s) if s == "label" => Ty::Label,
                            Tok::Ident(s) if s == "mem" => Ty::Mem,
                            _ => return Err(perr(line, *c, "expected a width, `label` or `mem`")),
                        };
                        (n.clone(), ty)
                    }
                    _ => return Err(perr(line, col0, "expected `var NAME: TYPE`")),
                };
                if reserved.contains_key(&name) {
                    return Err(perr(line, col0, format!("`{name}` is reserved")));
                }
                if decls.insert(name.clone(), ty).is_some() {
                    return Err(perr(line, col0, format!("duplicate declaration of `{name}`")));
                }
            }
            Tok::Ident(k) if k == "block" => {
                let label = match toks.get(1..) {
                    Some([(Tok::Num(n), _), (Tok::Sym(":"), _)]) => Label::Addr(*n as u64),
                    Some([(Tok::Ident(n), _), (Tok::Sym(":"), _)]) => Label::parse(n),
                    Some([(Tok::Label(l), _), (Tok::Sym(":"), _)]) => l.clone(),
                    _ => return Err(perr(line, col0, "expected `block LABEL:`")),
                };
                if blocks.iter().any(|b| b.label == label) {
                    return Err(perr(line, col0, format!("duplicate label {label}")));
                }
                blocks.push(Block { label, stmts: Vec::new() });
                spans.push(Vec::new());
            }
            _ => {
                let Some(block) = blocks.last_mut() else {
                    return Err(perr(line, col0, "statement outside a block"));
                };
                if block.stmts.last().is_some_and(BirStmt::is_terminator) {
                    return Err(perr(line, col0, "statement after the block terminator"));
                }
                let stmt = parse_stmt(&toks, line)?;
                block.stmts.push(stmt);
                spans.last_mut().unwrap().push((line, col0));
            }
        }
    }
    let mut types = reserved;
    types.extend(decls.iter().map(|(k, v)| (k.clone(), *v)));
    for (b, sp) in blocks.iter().zip(&spans) {
        match b.stmts.last() {
            Some(s) if s.is_terminator() => {}
            _ => {
                let (l, c) = sp.last().copied().unwrap_or((0, 0));
                return Err(perr(l, c, format!("block {} lacks a terminator", b.label)));
            }
        }
        for (s, (l, c)) in b.stmts.iter().zip(sp) {
            check_stmt(&types, s).map_err(|m| perr(*l, *c, m))?;
        }
    }
    let prog = Program::new(decls, blocks.clone(), partition).map_err(|m| perr(0, 0, m))?;
    for (b, sp) in blocks.iter().zip(&spans) {
        for (s, (l, c)) in b.stmts.iter().zip(sp) {
            for target in const_targets(s) {
                if !prog.resolves(&target) {
                    return Err(perr(*l, *c, format!("jump to unknown label {target}")));
                }
            }
        }
    }
    Ok(prog)
}

fn const_targets(s: &BirStmt) -> Vec<Label> {
    let lab = |e: &BirExp| match e {
        BirExp::Const(BirVal::Label(l)) => Some(l.clone()),
        _ => None,
    };
    match s {
        BirStmt::Jmp(e) => lab(e).into_iter().collect(),
        BirStmt::CJmp(_, a, b) => lab(a).into_iter().chain(lab(b)).collect(),
        _ => Vec::new(),
    }
}

fn parse_stmt(toks: &[(Tok, usize)], line: usize) -> Result<BirStmt, ParseError> {
    let col0 = toks[0].1;
    match &toks[0].0 {
        Tok::Ident(k) if k == "halt" => {
            if toks.len() != 1 {
                return Err(perr(line, toks[1].1, "trailing input after halt"));
            }
            Ok(BirStmt::Halt)
        }
        Tok::Ident(k) if k == "assert" => Ok(BirStmt::Assert(parse_exp_toks(&toks[1..], line)?)),
        Tok::Ident(k) if k == "jmp" => Ok(BirStmt::Jmp(parse_exp_toks(&toks[1..], line)?)),
        Tok::Ident(k) if k == "cjmp" => {
            let parts = split_commas(&toks[1..]);
            if parts.len() != 3 {
                return Err(perr(line, col0, "cjmp needs `cond, target, target`"));
            }
            Ok(BirStmt::CJmp(
                parse_exp_toks(parts[0], line)?,
                parse_exp_toks(parts[1], line)?,
                parse_exp_toks(parts[2], line)?,
            ))
        }
        Tok::Ident(v) if matches!(toks.get(1), Some((Tok::Sym(":="), _))) => {
            Ok(BirStmt::Assign(v.clone(), parse_exp_toks(&toks[2..], line)?))
        }
        Tok::Ident(k) => Err(perr(line, col0, format!("unknown statement `{k}`"))),
        _ => Err(perr(line, col0, "expected a statement")),
    }
}

fn check_stmt(types: &BTreeMap<String, Ty>, s: &BirStmt) -> Result<(), String> {
    match s {
        BirStmt::Assign(v, e) => {
            let tv = types.get(v).ok_or_else(|| format!("undeclared variable `{v}`"))?;
            let te = type_of(types, e)?;
            if *tv != te {
                return Err(format!("`{v}` has type {tv} but is assigned {te}"));
            }
            Ok(())
        }
        BirStmt::Assert(e) => match type_of(types, e)? {
            Ty::Word(1) => Ok(()),
            t => Err(format!("assert condition has type {t}")),
        },
        BirStmt::Halt => Ok(()),
        BirStmt::Jmp(e) => match type_of(types, e)? {
            Ty::Label | Ty::Word(64) => Ok(()),
            t => Err(format!("jump target has type {t}")),
        },
        BirStmt::CJmp(c, a, b) => {
            if type_of(types, c)? != Ty::Word(1) {
                return Err("cjmp condition must be 1 bit".into());
            }
            if type_of(types, a)? != Ty::Label || type_of(types, b)? != Ty::Label {
                return Err("cjmp targets must be labels".into());
            }
            Ok(())
        }
    }
}

/// Canonical text: declarations, then blocks in program order.
pub fn print_program(p: &Program) -> String {
    let mut s = String::new();
    for (name, ty) in &p.decls {
        let t = match ty {
            Ty::Word(w) => w.to_string(),
            Ty::Label => "label".into(),
            Ty::Mem => "mem".into(),
        };
        let _ = writeln!(s, "var {name}: {t}");
    }
    for b in &p.blocks {
        let _ = writeln!(s, "block {}:", b.label);
        for st in &b.stmts {
            let _ = writeln!(s, "  {st}");
        }
    }
    s
}
