//! Interpretations: partial maps from symbols to ground values.

use super::exp::{Sort, SymExp, Value};
use crate::bir::eval::apply_bin;
use crate::bir::syntax::{BirVal, Word};
use crate::bits::Bits;
use crate::ops::OpRegistry;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("symbol `{0}` is not bound")]
    Unbound(String),
    #[error("symbol `{0}` already bound to a different value")]
    Rebind(String),
    #[error("ill-sorted expression: {0}")]
    Sort(String),
    #[error("read of unmapped cell {0:#x}")]
    Unmapped(u64),
    #[error("library call failed: {0}")]
    Op(String),
}

/// Grows monotonically: a symbol is bound at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interpretation {
    map: BTreeMap<String, Value>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.map.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn bind(&mut self, name: &str, v: Value) -> Result<(), InterpError> {
        match self.map.get(name) {
            Some(old) if *old != v => Err(InterpError::Rebind(name.to_string())),
            Some(_) => Ok(()),
            None => {
                self.map.insert(name.to_string(), v);
                Ok(())
            }
        }
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.map.insert(name.to_string(), v);
        self
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.map.iter()
    }

    /// True when every binding of `self` appears unchanged in `other`.
    pub fn is_sub(&self, other: &Interpretation) -> bool {
        self.map.iter().all(|(k, v)| other.map.get(k) == Some(v))
    }
}

fn to_birval(v: Value) -> Result<BirVal, InterpError> {
    match v {
        Value::Word(w) => Ok(BirVal::Word(w)),
        Value::Label(l) => Ok(BirVal::Label(l)),
        Value::Mem(m) => Ok(BirVal::Memory(m)),
        Value::Bits(b) => Err(InterpError::Sort(format!("bitstring {b} used as a word"))),
    }
}

fn from_birval(v: BirVal) -> Value {
    match v {
        BirVal::Word(w) => Value::Word(w),
        BirVal::Label(l) => Value::Label(l),
        BirVal::Memory(m) => Value::Mem(m),
    }
}

fn want_word(v: Value) -> Result<Word, InterpError> {
    match v {
        Value::Word(w) => Ok(w),
        other => Err(InterpError::Sort(format!("expected a word, got {other}"))),
    }
}

fn want_bits(v: Value) -> Result<Bits, InterpError> {
    v.to_bits().ok_or_else(|| InterpError::Sort("memory used as a bitstring".into()))
}

/// Checks that a value fits a declared sort.
pub fn fits(v: &Value, s: Sort) -> bool {
    match (v, s) {
        (Value::Word(w), Sort::Word(x)) => w.width == x,
        (Value::Word(w), Sort::Count { max, width }) => w.width == width && w.value <= u128::from(max),
        (Value::Bits(b), Sort::Bits(Some(n))) => b.len() == n,
        (Value::Bits(_), Sort::Bits(None)) => true,
        (Value::Label(_), Sort::Label) => true,
        (Value::Mem(_), Sort::Mem) => true,
        _ => false,
    }
}

/// Grounds `e` under `h`. Library applications go through `ops`.
pub fn interpret(h: &Interpretation, ops: &OpRegistry, e: &SymExp) -> Result<Value, InterpError> {
    let go = |x: &SymExp| interpret(h, ops, x);
    match e {
        SymExp::Const(v) => Ok(v.clone()),
        SymExp::Sym(n, _) => h.get(n).cloned().ok_or_else(|| InterpError::Unbound(n.clone())),
        SymExp::Un(op, a) => Ok(Value::Word(op.apply(want_word(go(a)?)?))),
        SymExp::Bin(op, a, b) => {
            let r = apply_bin(*op, to_birval(go(a)?)?, to_birval(go(b)?)?).map_err(|e| InterpError::Sort(e.to_string()))?;
            Ok(from_birval(r))
        }
        SymExp::Ite(c, a, b) => {
            if want_word(go(c)?)?.is_true() {
                go(a)
            } else {
                go(b)
            }
        }
        SymExp::Mem(cells) => {
            let mut m = BTreeMap::new();
            for (a, v) in cells {
                m.insert(*a, want_word(go(v)?)?);
            }
            Ok(Value::Mem(m))
        }
        SymExp::Load(m, a, w) => {
            let Value::Mem(mem) = go(m)? else {
                return Err(InterpError::Sort("load from a non-memory".into()));
            };
            let addr = want_word(go(a)?)?.value as u64;
            match mem.get(&addr) {
                Some(c) if c.width == *w => Ok(Value::Word(*c)),
                Some(_) => Err(InterpError::Sort(format!("width mismatch at {addr:#x}"))),
                None => Err(InterpError::Unmapped(addr)),
            }
        }
        SymExp::Store(m, a, v, _) => {
            let Value::Mem(mut mem) = go(m)? else {
                return Err(InterpError::Sort("store into a non-memory".into()));
            };
            let addr = want_word(go(a)?)?.value as u64;
            mem.insert(addr, want_word(go(v)?)?);
            Ok(Value::Mem(mem))
        }
        SymExp::App(op, args) => {
            let args: Vec<Bits> = args.iter().map(|a| go(a).and_then(want_bits)).collect::<Result<_, _>>()?;
            ops.apply(op, &args).map(Value::Bits).map_err(|e| InterpError::Op(e.to_string()))
        }
        SymExp::BitLen(b) => Ok(Value::word(want_bits(go(b)?)?.len() as u128, 128)),
        SymExp::Cell(b, i, c) => Ok(Value::word(want_bits(go(b)?)?.cell(*i, *c as usize), *c)),
        SymExp::FromCells(cs, c, len) => {
            let vals: Vec<u128> = cs.iter().map(|x| go(x).and_then(want_word).map(|w| w.value)).collect::<Result<_, _>>()?;
            Ok(Value::Bits(Bits::from_cells(&vals, *c as usize, *len)))
        }
        SymExp::Cast(x, w) => Ok(Value::word(want_word(go(x)?)?.value, *w)),
        SymExp::Forall { var, upper, body } => {
            let u = want_word(go(upper)?)?;
            for j in 1..=u.value {
                let inner = h.clone().with(var, Value::word(j, u.width));
                if !want_word(interpret(&inner, ops, body)?)?.is_true() {
                    return Ok(Value::word(0, 1));
                }
            }
            Ok(Value::word(1, 1))
        }
    }
}

/// Interprets a 1-bit condition; errors count as false.
pub fn holds(h: &Interpretation, ops: &OpRegistry, e: &SymExp) -> bool {
    matches!(interpret(h, ops, e), Ok(Value::Word(w)) if w.is_true())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::syntax::BinOp;
    use crate::sym::exp::bin;

    #[test]
    fn symbol_plus_one() {
        let h = Interpretation::new().with("x", Value::word(5, 64));
        let e = bin(BinOp::Plus, SymExp::sym("x", Sort::Word(64)), SymExp::word(1, 64));
        assert_eq!(interpret(&h, &OpRegistry::default(), &e).unwrap(), Value::word(6, 64));
    }

    #[test]
    fn constants_ignore_h() {
        let c = SymExp::word(9, 8);
        assert_eq!(interpret(&Interpretation::new(), &OpRegistry::default(), &c).unwrap(), Value::word(9, 8));
    }

    #[test]
    fn app_matches_registry() {
        let ops = OpRegistry::default();
        let a = Bits::parse("0xf0").unwrap();
        let b = Bits::parse("0x3c").unwrap();
        let h = Interpretation::new().with("a", Value::Bits(a.clone()));
        let e = SymExp::App("xor".into(), vec![SymExp::sym("a", Sort::Bits(Some(8))), SymExp::bits(b.clone())]);
        assert_eq!(interpret(&h, &ops, &e).unwrap(), Value::Bits(ops.apply("xor", &[a, b]).unwrap()));
    }

    #[test]
    fn rebinding_is_rejected() {
        let mut h = Interpretation::new();
        h.bind("x", Value::word(1, 8)).unwrap();
        h.bind("x", Value::word(1, 8)).unwrap();
        assert_eq!(h.bind("x", Value::word(2, 8)), Err(InterpError::Rebind("x".into())));
    }
}
