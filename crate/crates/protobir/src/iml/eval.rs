//! Expression evaluation over bitstrings. Anything ill-formed evaluates to ⊥ (`None`).

use super::syntax::IExp;
use crate::bir::syntax::BinOp;
use crate::bits::Bits;
use crate::ops::OpRegistry;
use std::collections::BTreeMap;

/// Variable bindings. `None` is ⊥.
pub type IEnv = BTreeMap<String, Option<Bits>>;

fn infix_op(op: &str) -> Option<BinOp> {
    Some(match op {
        "∨" => BinOp::Or,
        "∧" => BinOp::And,
        "⊻" => BinOp::Xor,
        "=" => BinOp::Eq,
        "<>" => BinOp::Neq,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        "<<" => BinOp::Shl,
        ">>" => BinOp::Shr,
        "+" => BinOp::Plus,
        "-" => BinOp::Minus,
        "*" => BinOp::Mult,
        "/" => BinOp::Div,
        "%" => BinOp::Mod,
        _ => return None,
    })
}

/// Whether `b` is the one-bit true value.
pub fn truth(b: &Bits) -> Option<bool> {
    (b.len() == 1).then(|| b.bit(0))
}

fn as_num(b: &Bits) -> Option<u128> {
    b.to_u128()
}

fn binary(op: BinOp, a: &Bits, b: &Bits) -> Option<Bits> {
    match op {
        // equality is defined on bitstrings of any length
        BinOp::Eq => return Some(Bits::from_u128(u128::from(a == b), 1)),
        BinOp::Neq => return Some(Bits::from_u128(u128::from(a != b), 1)),
        _ => {}
    }
    if a.len() != b.len() {
        return None;
    }
    if matches!(op, BinOp::And | BinOp::Or | BinOp::Xor) && a.len() > 128 {
        let f = |x: bool, y: bool| match op {
            BinOp::And => x & y,
            BinOp::Or => x | y,
            _ => x ^ y,
        };
        return Some(Bits::from_bools(a.as_bools().iter().zip(b.as_bools()).map(|(x, y)| f(*x, *y)).collect()));
    }
    let (v, w) = op.apply_raw(as_num(a)?, as_num(b)?, a.len() as u32);
    Some(Bits::from_u128(v, w as usize))
}

/// Evaluates `e` in `env`. Library applications go through `ops`; ⊥ propagates.
pub fn eval(env: &IEnv, ops: &OpRegistry, e: &IExp) -> Option<Bits> {
    match e {
        IExp::Bits(b) => Some(b.clone()),
        IExp::Var(v) => env.get(v).cloned().flatten(),
        IExp::Bot => None,
        IExp::App(op, args) => {
            let vals: Vec<Bits> = args.iter().map(|a| eval(env, ops, a)).collect::<Option<_>>()?;
            apply(ops, op, &vals)
        }
    }
}

/// Applies a builtin or a registry operation to evaluated arguments.
pub fn apply(ops: &OpRegistry, op: &str, vals: &[Bits]) -> Option<Bits> {
    if let (Some(bop), [a, b]) = (infix_op(op), vals) {
        return binary(bop, a, b);
    }
    match (op, vals) {
        ("¬", [a]) => Some(Bits::from_bools(a.as_bools().iter().map(|x| !x).collect())),
        ("ite", [c, a, b]) => {
            if truth(c)? {
                Some(a.clone())
            } else {
                Some(b.clone())
            }
        }
        ("len", [a]) => Some(Bits::from_u128(a.len() as u128, 128)),
        ("read", [b, idx, w]) => {
            let chunk = as_num(w)? as usize;
            if chunk == 0 || chunk > 128 {
                return None;
            }
            Some(Bits::from_u128(b.cell(as_num(idx)? as usize, chunk), chunk))
        }
        ("pack", [len, chunk, cells @ ..]) => {
            let chunk = as_num(chunk)? as usize;
            let cells: Vec<u128> = cells.iter().map(as_num).collect::<Option<_>>()?;
            if chunk == 0 || chunk > 128 {
                return None;
            }
            Some(Bits::from_cells(&cells, chunk, as_num(len)? as usize))
        }
        ("cast", [a, w]) => {
            let w = as_num(w)? as usize;
            if w > 128 {
                return None;
            }
            let m = if w == 128 { u128::MAX } else { (1u128 << w) - 1 };
            Some(Bits::from_u128(as_num(a)? & m, w))
        }
        _ => ops.apply(op, vals).ok(),
    }
}
