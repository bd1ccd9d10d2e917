//! Symbolic expressions with folding constructors.

use crate::bir::syntax::{mask, BinOp, Label, Memory, UnOp, Word};
use crate::bits::Bits;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Ground values produced by interpretation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Word(Word),
    Label(Label),
    Mem(Memory),
    Bits(Bits),
}

impl Value {
    pub fn word(v: u128, w: u8) -> Value {
        Value::Word(Word::new(v, w))
    }

    pub fn as_word(&self) -> Option<Word> {
        match self {
            Value::Word(w) => Some(*w),
            _ => None,
        }
    }

    /// Bitstring view: words keep their width, labels use the 64-bit encoding.
    pub fn to_bits(&self) -> Option<Bits> {
        match self {
            Value::Word(w) => Some(Bits::from_u128(w.value, w.width as usize)),
            Value::Label(l) => Some(crate::trace::label_bits(l)),
            Value::Bits(b) => Some(b.clone()),
            Value::Mem(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Word(w) => write!(f, "{w}"),
            Value::Label(l) => write!(f, "@{l}"),
            Value::Bits(b) => write!(f, "{b}"),
            Value::Mem(m) => {
                write!(f, "mem{{")?;
                for (i, (a, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a:#x}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Word(u8),
    /// Bitstring of known or unknown length.
    Bits(Option<usize>),
    /// Loop counter ranging over `0..=max`, used as a word of `width` bits.
    Count { max: u64, width: u8 },
    Label,
    Mem,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymExp {
    Const(Value),
    Sym(String, Sort),
    Un(UnOp, Arc<SymExp>),
    Bin(BinOp, Arc<SymExp>, Arc<SymExp>),
    Ite(Arc<SymExp>, Arc<SymExp>, Arc<SymExp>),
    /// Memory with concrete addresses and symbolic cells.
    Mem(BTreeMap<u64, SymExp>),
    Load(Arc<SymExp>, Arc<SymExp>, u8),
    Store(Arc<SymExp>, Arc<SymExp>, Arc<SymExp>, u8),
    /// Library function applied to bitstrings.
    App(String, Vec<SymExp>),
    /// Bit length of a bitstring, as a 128-bit word.
    BitLen(Arc<SymExp>),
    /// The `idx`-th `chunk`-bit cell of a bitstring (last cell right-aligned, zero past the end).
    Cell(Arc<SymExp>, usize, u8),
    /// Inverse of `Cell`: reassembles `len` bits from cells.
    FromCells(Vec<SymExp>, u8, usize),
    /// Zero-extension or truncation of a word.
    Cast(Arc<SymExp>, u8),
    /// `body` holds for every `var` in `1..=upper`.
    Forall { var: String, upper: Arc<SymExp>, body: Arc<SymExp> },
}

pub fn tt() -> SymExp {
    SymExp::Const(Value::word(1, 1))
}

pub fn ff() -> SymExp {
    SymExp::Const(Value::word(0, 1))
}

impl SymExp {
    pub fn word(v: u128, w: u8) -> SymExp {
        SymExp::Const(Value::word(v, w))
    }

    pub fn label(l: Label) -> SymExp {
        SymExp::Const(Value::Label(l))
    }

    pub fn bits(b: Bits) -> SymExp {
        SymExp::Const(Value::Bits(b))
    }

    pub fn sym(name: &str, sort: Sort) -> SymExp {
        SymExp::Sym(name.to_string(), sort)
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            SymExp::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_word(&self) -> Option<Word> {
        self.as_const().and_then(Value::as_word)
    }

    pub fn is_true(&self) -> bool {
        self.as_word().is_some_and(|w| w.is_true())
    }

    pub fn is_false(&self) -> bool {
        self.as_word() == Some(Word::bit(false))
    }

    pub fn sort(&self) -> Sort {
        match self {
            SymExp::Const(Value::Word(w)) => Sort::Word(w.width),
            SymExp::Const(Value::Label(_)) => Sort::Label,
            SymExp::Const(Value::Mem(_)) | SymExp::Mem(_) | SymExp::Store(..) => Sort::Mem,
            SymExp::Const(Value::Bits(b)) => Sort::Bits(Some(b.len())),
            SymExp::Sym(_, Sort::Count { width, .. }) => Sort::Word(*width),
            SymExp::Sym(_, s) => *s,
            SymExp::Un(_, a) => a.sort(),
            SymExp::Bin(op, a, _) => {
                if op.is_comparison() {
                    Sort::Word(1)
                } else {
                    a.sort()
                }
            }
            SymExp::Ite(_, a, _) => a.sort(),
            SymExp::Load(_, _, w) | SymExp::Cell(_, _, w) | SymExp::Cast(_, w) => Sort::Word(*w),
            SymExp::App(..) => Sort::Bits(None),
            SymExp::BitLen(_) => Sort::Word(128),
            SymExp::FromCells(_, _, len) => Sort::Bits(Some(*len)),
            SymExp::Forall { .. } => Sort::Word(1),
        }
    }

    /// Free symbols with their sorts.
    pub fn symbols(&self, out: &mut BTreeMap<String, Sort>) {
        self.symbols_under(&mut BTreeSet::new(), out);
    }

    fn symbols_under(&self, bound: &mut BTreeSet<String>, out: &mut BTreeMap<String, Sort>) {
        match self {
            SymExp::Const(_) => {}
            SymExp::Sym(n, s) => {
                if !bound.contains(n) {
                    out.insert(n.clone(), *s);
                }
            }
            SymExp::Forall { var, upper, body } => {
                upper.symbols_under(bound, out);
                let fresh = bound.insert(var.clone());
                body.symbols_under(bound, out);
                if fresh {
                    bound.remove(var);
                }
            }
            _ => self.children().into_iter().for_each(|c| c.symbols_under(bound, out)),
        }
    }

    pub fn symbol_names(&self) -> BTreeSet<String> {
        let mut m = BTreeMap::new();
        self.symbols(&mut m);
        m.into_keys().collect()
    }

    pub fn children(&self) -> Vec<&SymExp> {
        match self {
            SymExp::Const(_) | SymExp::Sym(..) => vec![],
            SymExp::Un(_, a) | SymExp::BitLen(a) | SymExp::Cell(a, _, _) | SymExp::Cast(a, _) => vec![a],
            SymExp::Bin(_, a, b) | SymExp::Load(a, b, _) => vec![a, b],
            SymExp::Ite(a, b, c) | SymExp::Store(a, b, c, _) => vec![a, b, c],
            SymExp::Mem(m) => m.values().collect(),
            SymExp::App(_, args) | SymExp::FromCells(args, _, _) => args.iter().collect(),
            SymExp::Forall { upper, body, .. } => vec![upper, body],
        }
    }

    /// Replaces free occurrences of symbol `name`, refolding on the way up.
    pub fn subst(&self, name: &str, by: &SymExp) -> SymExp {
        let mut m = BTreeMap::new();
        m.insert(name.to_string(), by.clone());
        self.subst_all(&m)
    }

    pub fn subst_all(&self, map: &BTreeMap<String, SymExp>) -> SymExp {
        if map.is_empty() {
            return self.clone();
        }
        let s = |e: &SymExp| e.subst_all(map);
        match self {
            SymExp::Const(_) => self.clone(),
            SymExp::Sym(n, _) => map.get(n).cloned().unwrap_or_else(|| self.clone()),
            SymExp::Un(op, a) => un(*op, s(a)),
            SymExp::Bin(op, a, b) => bin(*op, s(a), s(b)),
            SymExp::Ite(c, a, b) => ite(s(c), s(a), s(b)),
            SymExp::Mem(m) => SymExp::Mem(m.iter().map(|(k, v)| (*k, s(v))).collect()),
            SymExp::Load(m, a, w) => load(s(m), s(a), *w),
            SymExp::Store(m, a, v, w) => store(s(m), s(a), s(v), *w),
            SymExp::App(f, args) => SymExp::App(f.clone(), args.iter().map(s).collect()),
            SymExp::BitLen(b) => bitlen(s(b)),
            SymExp::Cell(b, i, c) => cell(s(b), *i, *c),
            SymExp::FromCells(cs, c, len) => from_cells(cs.iter().map(s).collect(), *c, *len),
            SymExp::Cast(e, w) => cast(s(e), *w),
            SymExp::Forall { var, upper, body } => {
                let mut inner = map.clone();
                inner.remove(var);
                forall(var, s(upper), body.subst_all(&inner))
            }
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

fn word_of(e: &SymExp) -> Option<Word> {
    e.as_word()
}

pub fn un(op: UnOp, a: SymExp) -> SymExp {
    if let Some(w) = word_of(&a) {
        return SymExp::Const(Value::Word(op.apply(w)));
    }
    if let SymExp::Un(inner, x) = &a {
        if *inner == op {
            return (**x).clone();
        }
    }
    SymExp::Un(op, Arc::new(a))
}

pub fn not(a: SymExp) -> SymExp {
    un(UnOp::Not, a)
}

pub fn bin(op: BinOp, a: SymExp, b: SymExp) -> SymExp {
    match (a.as_const(), b.as_const()) {
        (Some(Value::Word(x)), Some(Value::Word(y))) if x.width == y.width => {
            return SymExp::Const(Value::Word(op.apply(*x, *y)));
        }
        (Some(Value::Label(x)), Some(Value::Label(y))) if op == BinOp::Eq => return SymExp::word(u128::from(x == y), 1),
        (Some(Value::Label(x)), Some(Value::Label(y))) if op == BinOp::Neq => return SymExp::word(u128::from(x != y), 1),
        _ => {}
    }
    let zero = |e: &SymExp| e.as_word().is_some_and(|w| w.value == 0);
    let ones = |e: &SymExp| e.as_word().is_some_and(|w| w.value == mask(w.width));
    let one = |e: &SymExp| e.as_word().is_some_and(|w| w.value == 1);
    match op {
        BinOp::Plus | BinOp::Or | BinOp::Xor if zero(&b) => return a,
        BinOp::Plus | BinOp::Or | BinOp::Xor if zero(&a) => return b,
        BinOp::Minus | BinOp::Shl | BinOp::Shr if zero(&b) => return a,
        BinOp::Mult if one(&b) => return a,
        BinOp::Mult if one(&a) => return b,
        BinOp::Mult | BinOp::And if zero(&b) => return b,
        BinOp::Mult | BinOp::And if zero(&a) => return a,
        BinOp::And if ones(&b) => return a,
        BinOp::And if ones(&a) => return b,
        BinOp::Or if ones(&b) => return b,
        BinOp::Or if ones(&a) => return a,
        BinOp::Eq | BinOp::Le if a == b => return tt(),
        BinOp::Neq | BinOp::Lt if a == b => return ff(),
        BinOp::And | BinOp::Or if a == b => return a,
        BinOp::Xor | BinOp::Minus if a == b => {
            if let Sort::Word(w) = a.sort() {
                return SymExp::word(0, w);
            }
        }
        _ => {}
    }
    if matches!(op, BinOp::Eq | BinOp::Neq) {
        // ite(c, k1, k2) == k3 with constants collapses to c, !c, or a constant
        let (i, k) = match (&a, &b) {
            (SymExp::Ite(..), SymExp::Const(_)) => (&a, &b),
            (SymExp::Const(_), SymExp::Ite(..)) => (&b, &a),
            _ => (&a, &a),
        };
        if let (SymExp::Ite(c, k1, k2), SymExp::Const(_)) = (i, k) {
            if k1.as_const().is_some() && k2.as_const().is_some() {
                let (e1, e2) = (**k1 == *k, **k2 == *k);
                let r = match (e1, e2) {
                    (true, true) => tt(),
                    (false, false) => ff(),
                    (true, false) => (**c).clone(),
                    (false, true) => not((**c).clone()),
                };
                return if op == BinOp::Eq { r } else { not(r) };
            }
        }
    }
    // x + c1 + c2 → x + (c1 + c2)
    if let (BinOp::Plus, SymExp::Bin(BinOp::Plus, x, c1), Some(c2)) = (op, &a, b.as_word()) {
        if let Some(c1) = c1.as_word() {
            return bin(BinOp::Plus, (**x).clone(), SymExp::Const(Value::Word(BinOp::Plus.apply(c1, c2))));
        }
    }
    SymExp::Bin(op, Arc::new(a), Arc::new(b))
}

pub fn and(a: SymExp, b: SymExp) -> SymExp {
    bin(BinOp::And, a, b)
}

pub fn eq(a: SymExp, b: SymExp) -> SymExp {
    bin(BinOp::Eq, a, b)
}

pub fn ite(c: SymExp, a: SymExp, b: SymExp) -> SymExp {
    if c.is_true() {
        return a;
    }
    if c.is_false() {
        return b;
    }
    if a == b {
        return a;
    }
    if a.is_true() && b.is_false() {
        return c;
    }
    if a.is_false() && b.is_true() {
        return not(c);
    }
    SymExp::Ite(Arc::new(c), Arc::new(a), Arc::new(b))
}

/// Folding load. Unmapped constant addresses stay as a `Load` node; see [`load_checked`].
pub fn load(m: SymExp, a: SymExp, w: u8) -> SymExp {
    if let Some(addr) = a.as_word().map(|x| x.value as u64) {
        let mut cur = &m;
        loop {
            match cur {
                SymExp::Mem(cells) => {
                    if let Some(v) = cells.get(&addr) {
                        if v.sort() == Sort::Word(w) {
                            return v.clone();
                        }
                    }
                    break;
                }
                SymExp::Store(inner, a2, v, _) => match a2.as_word() {
                    Some(x) if x.value as u64 == addr => {
                        if v.sort() == Sort::Word(w) {
                            return (**v).clone();
                        }
                        break;
                    }
                    Some(_) => cur = inner,
                    None => break,
                },
                _ => break,
            }
        }
    }
    SymExp::Load(Arc::new(m), Arc::new(a), w)
}

/// Load that reports a read of a cell that is certainly unmapped.
pub fn load_checked(m: SymExp, a: SymExp, w: u8) -> Result<SymExp, u64> {
    let r = load(m, a, w);
    if let SymExp::Load(mem, addr, _) = &r {
        if let (SymExp::Mem(cells), Some(x)) = (&**mem, addr.as_word()) {
            let addr = x.value as u64;
            if !cells.contains_key(&addr) {
                return Err(addr);
            }
        }
    }
    Ok(r)
}

pub fn store(m: SymExp, a: SymExp, v: SymExp, w: u8) -> SymExp {
    if let (SymExp::Mem(cells), Some(addr)) = (&m, a.as_word()) {
        let mut cells = cells.clone();
        cells.insert(addr.value as u64, v);
        return SymExp::Mem(cells);
    }
    SymExp::Store(Arc::new(m), Arc::new(a), Arc::new(v), w)
}

pub fn bitlen(b: SymExp) -> SymExp {
    match b.sort() {
        Sort::Bits(Some(n)) => SymExp::word(n as u128, 128),
        _ => SymExp::BitLen(Arc::new(b)),
    }
}

pub fn cell(b: SymExp, idx: usize, chunk: u8) -> SymExp {
    if let SymExp::Const(Value::Bits(bits)) = &b {
        return SymExp::word(bits.cell(idx, chunk as usize), chunk);
    }
    if let Sort::Bits(Some(n)) = b.sort() {
        if idx >= n.div_ceil(chunk as usize) {
            return SymExp::word(0, chunk);
        }
    }
    if let SymExp::FromCells(cells, c, len) = &b {
        if *c == chunk {
            return if idx < len.div_ceil(chunk as usize) { cells[idx].clone() } else { SymExp::word(0, chunk) };
        }
    }
    SymExp::Cell(Arc::new(b), idx, chunk)
}

pub fn from_cells(cells: Vec<SymExp>, chunk: u8, len: usize) -> SymExp {
    let consts: Option<Vec<u128>> = cells.iter().map(|c| c.as_word().map(|w| w.value)).collect();
    if let Some(vals) = consts {
        return SymExp::bits(Bits::from_cells(&vals, chunk as usize, len));
    }
    if let Some(SymExp::Cell(b, 0, c)) = cells.first() {
        let same = cells.iter().enumerate().all(|(i, x)| matches!(x, SymExp::Cell(b2, j, c2) if b2 == b && *j == i && c2 == c));
        if same && *c == chunk && b.sort() == Sort::Bits(Some(len)) {
            return (**b).clone();
        }
    }
    SymExp::FromCells(cells, chunk, len)
}

pub fn cast(e: SymExp, w: u8) -> SymExp {
    if let Some(x) = e.as_word() {
        return SymExp::word(x.value, w);
    }
    if e.sort() == Sort::Word(w) {
        return e;
    }
    SymExp::Cast(Arc::new(e), w)
}

/// Bounded quantifier; expands to a conjunction when the bound is constant.
pub fn forall(var: &str, upper: SymExp, body: SymExp) -> SymExp {
    if let Some(u) = upper.as_word() {
        let w = match upper.sort() {
            Sort::Word(w) => w,
            _ => 64,
        };
        let mut acc = tt();
        for j in 1..=u.value {
            acc = and(acc, body.subst(var, &SymExp::word(j, w)));
            if acc.is_false() {
                break;
            }
        }
        return acc;
    }
    if body.is_true() {
        return tt();
    }
    SymExp::Forall { var: var.to_string(), upper: Arc::new(upper), body: Arc::new(body) }
}

impl fmt::Display for SymExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExp::Const(v) => write!(f, "{v}"),
            SymExp::Sym(n, _) => write!(f, "{n}"),
            SymExp::Un(op, a) => write!(f, "{}{a}", op.symbol()),
            SymExp::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            SymExp::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
            SymExp::Mem(m) => {
                write!(f, "mem{{")?;
                for (i, (a, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a:#x}: {v}")?;
                }
                write!(f, "}}")
            }
            SymExp::Load(m, a, w) => write!(f, "load({m}, {a}, {w})"),
            SymExp::Store(m, a, v, w) => write!(f, "store({m}, {a}, {v}, {w})"),
            SymExp::App(op, args) => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            SymExp::BitLen(b) => write!(f, "len({b})"),
            SymExp::Cell(b, i, c) => write!(f, "cell({b}, {i}, {c})"),
            SymExp::FromCells(cs, c, len) => {
                write!(f, "cells{c}[")?;
                for (i, x) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]:{len}")
            }
            SymExp::Cast(e, w) => write!(f, "cast({e}, {w})"),
            SymExp::Forall { var, upper, body } => write!(f, "(forall {var} in 1..={upper}. {body})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(w: u8) -> SymExp {
        SymExp::sym("x", Sort::Word(w))
    }

    #[test]
    fn ground_folding_and_identity() {
        assert_eq!(bin(BinOp::Plus, SymExp::word(2, 64), SymExp::word(3, 64)), SymExp::word(5, 64));
        assert_eq!(bin(BinOp::Plus, x(64), SymExp::word(0, 64)), x(64));
        assert_eq!(ite(eq(x(8), SymExp::word(0, 8)), x(64), x(64)), x(64));
    }

    #[test]
    fn ite_equality_collapses() {
        let c = eq(x(1), SymExp::word(1, 1));
        let t = ite(c.clone(), SymExp::label(Label::Addr(1)), SymExp::label(Label::Addr(2)));
        assert_eq!(eq(t.clone(), SymExp::label(Label::Addr(1))), c);
        assert_eq!(eq(t, SymExp::label(Label::Addr(3))), ff());
    }

    #[test]
    fn memory_loads_fold() {
        let m = store(SymExp::Mem(BTreeMap::new()), SymExp::word(8, 64), x(8), 8);
        assert_eq!(load(m.clone(), SymExp::word(8, 64), 8), x(8));
        assert_eq!(load_checked(m, SymExp::word(9, 64), 8), Err(9));
    }

    #[test]
    fn cells_roundtrip_symbolically() {
        let b = SymExp::sym("b", Sort::Bits(Some(200)));
        let cells: Vec<_> = (0..2).map(|i| cell(b.clone(), i, 128)).collect();
        assert_eq!(from_cells(cells, 128, 200), b);
        assert_eq!(cell(b, 5, 128), SymExp::word(0, 128));
    }

    #[test]
    fn forall_expands_on_constant_bound() {
        let body = bin(BinOp::Lt, SymExp::sym("u", Sort::Word(64)), SymExp::word(3, 64));
        assert_eq!(forall("u", SymExp::word(2, 64), body.clone()), tt());
        assert_eq!(forall("u", SymExp::word(3, 64), body), ff());
    }
}
