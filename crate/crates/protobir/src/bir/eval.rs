//! Static typing and concrete evaluation of BIR expressions.

use super::env::BirEnv;
use super::syntax::{valid_width, BinOp, BirExp, BirVal, Ty, Word};
use super::BirError;
use std::collections::BTreeMap;

/// Result type of a binary operator given operand types.
pub fn bin_type(op: BinOp, a: Ty, b: Ty) -> Result<Ty, String> {
    match (a, b) {
        (Ty::Word(x), Ty::Word(y)) if x == y => Ok(if op.is_comparison() { Ty::Word(1) } else { Ty::Word(x) }),
        (Ty::Label, Ty::Label) if matches!(op, BinOp::Eq | BinOp::Neq) => Ok(Ty::Word(1)),
        _ => Err(format!("operator {} applied to {a} and {b}", op.symbol())),
    }
}

pub fn type_of(types: &BTreeMap<String, Ty>, e: &BirExp) -> Result<Ty, String> {
    match e {
        BirExp::Const(v) => Ok(v.ty()),
        BirExp::Var(v) => types.get(v).copied().ok_or_else(|| format!("undeclared variable `{v}`")),
        BirExp::Un(op, a) => match type_of(types, a)? {
            Ty::Word(w) => Ok(Ty::Word(w)),
            t => Err(format!("operator {} applied to {t}", op.symbol())),
        },
        BirExp::Bin(op, a, b) => bin_type(*op, type_of(types, a)?, type_of(types, b)?),
        BirExp::Ite(c, a, b) => {
            if type_of(types, c)? != Ty::Word(1) {
                return Err("ite condition must be 1 bit".into());
            }
            let (ta, tb) = (type_of(types, a)?, type_of(types, b)?);
            if ta != tb {
                return Err(format!("ite branches differ: {ta} vs {tb}"));
            }
            Ok(ta)
        }
        BirExp::Load(m, a, w) => {
            if !valid_width(*w) {
                return Err(format!("bad load width {w}"));
            }
            if type_of(types, m)? != Ty::Mem || type_of(types, a)? != Ty::Word(64) {
                return Err("load expects (mem, word64, width)".into());
            }
            Ok(Ty::Word(*w))
        }
        BirExp::Store(m, a, v, w) => {
            if !valid_width(*w) {
                return Err(format!("bad store width {w}"));
            }
            if type_of(types, m)? != Ty::Mem || type_of(types, a)? != Ty::Word(64) || type_of(types, v)? != Ty::Word(*w) {
                return Err("store expects (mem, word64, word_w, w)".into());
            }
            Ok(Ty::Mem)
        }
    }
}

fn want_word(v: BirVal) -> Result<Word, BirError> {
    match v {
        BirVal::Word(w) => Ok(w),
        other => Err(BirError::Type(format!("expected a word, got {:?}", other.ty()))),
    }
}

pub fn apply_bin(op: BinOp, a: BirVal, b: BirVal) -> Result<BirVal, BirError> {
    match (a, b) {
        (BirVal::Word(x), BirVal::Word(y)) if x.width == y.width => Ok(BirVal::Word(op.apply(x, y))),
        (BirVal::Label(x), BirVal::Label(y)) if op == BinOp::Eq => Ok(BirVal::Word(Word::bit(x == y))),
        (BirVal::Label(x), BirVal::Label(y)) if op == BinOp::Neq => Ok(BirVal::Word(Word::bit(x != y))),
        (a, b) => Err(BirError::Type(format!("{} on {} and {}", op.symbol(), a.ty(), b.ty()))),
    }
}

pub fn eval_exp(env: &BirEnv, e: &BirExp) -> Result<BirVal, BirError> {
    match e {
        BirExp::Const(v) => Ok(v.clone()),
        BirExp::Var(v) => env.get(v).cloned(),
        BirExp::Un(op, a) => Ok(BirVal::Word(op.apply(want_word(eval_exp(env, a)?)?))),
        BirExp::Bin(op, a, b) => apply_bin(*op, eval_exp(env, a)?, eval_exp(env, b)?),
        BirExp::Ite(c, a, b) => {
            let c = want_word(eval_exp(env, c)?)?;
            if c.width != 1 {
                return Err(BirError::Type("ite condition must be 1 bit".into()));
            }
            if c.value == 1 {
                eval_exp(env, a)
            } else {
                eval_exp(env, b)
            }
        }
        BirExp::Load(m, a, w) => {
            let BirVal::Memory(mem) = eval_exp(env, m)? else {
                return Err(BirError::Type("load from a non-memory".into()));
            };
            let addr = want_word(eval_exp(env, a)?)?.value as u64;
            match mem.get(&addr) {
                Some(cell) if cell.width == *w => Ok(BirVal::Word(*cell)),
                Some(cell) => Err(BirError::Type(format!("cell {addr:#x} has width {}, loaded as {w}", cell.width))),
                None => Err(BirError::LoadUnmapped(addr)),
            }
        }
        BirExp::Store(m, a, v, w) => {
            let BirVal::Memory(mut mem) = eval_exp(env, m)? else {
                return Err(BirError::Type("store into a non-memory".into()));
            };
            let addr = want_word(eval_exp(env, a)?)?.value as u64;
            let v = want_word(eval_exp(env, v)?)?;
            if v.width != *w {
                return Err(BirError::Type(format!("store width {w} but value has {}", v.width)));
            }
            mem.insert(addr, v);
            Ok(BirVal::Memory(mem))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::env::RandomTape;
    use crate::bir::syntax::{BinOp as B, Label};

    fn env() -> BirEnv {
        let mut decls = BTreeMap::new();
        decls.insert("m".to_string(), Ty::Mem);
        BirEnv::initial(&decls, RandomTape::empty(4))
    }

    #[test]
    fn ite_selects() {
        let e = BirExp::ite(BirExp::word(1, 1), BirExp::word(5, 64), BirExp::word(9, 64));
        assert_eq!(eval_exp(&env(), &e).unwrap(), BirVal::word(5, 64));
    }

    #[test]
    fn store_then_load() {
        let st = BirExp::store(BirExp::var("m"), BirExp::word(0x40, 64), BirExp::word(0xab, 8), 8);
        let ld = BirExp::load(st, BirExp::word(0x40, 64), 8);
        assert_eq!(eval_exp(&env(), &ld).unwrap(), BirVal::word(0xab, 8));
    }

    #[test]
    fn addition_table_8bit() {
        // brute-force oracle: modular addition computed in u16
        for a in 0..256u128 {
            for b in [0u128, 1, 7, 128, 255] {
                let e = BirExp::bin(B::Plus, BirExp::word(a, 8), BirExp::word(b, 8));
                assert_eq!(eval_exp(&env(), &e).unwrap(), BirVal::word((a + b) % 256, 8));
            }
        }
    }

    #[test]
    fn unmapped_load_and_unbound_var() {
        let ld = BirExp::load(BirExp::var("m"), BirExp::word(3, 64), 8);
        assert_eq!(eval_exp(&env(), &ld), Err(BirError::LoadUnmapped(3)));
        assert_eq!(eval_exp(&env(), &BirExp::var("zz")), Err(BirError::Unbound("zz".into())));
    }

    #[test]
    fn labels_compare() {
        let e = BirExp::bin(B::Eq, BirExp::label(Label::Addr(1)), BirExp::label(Label::Addr(1)));
        assert_eq!(eval_exp(&env(), &e).unwrap(), BirVal::word(1, 1));
        let types = crate::bir::reserved_types();
        assert!(type_of(&types, &BirExp::bin(B::Plus, BirExp::word(1, 8), BirExp::word(1, 16))).is_err());
    }
}
