//! Satisfiability backend. The built-in solver enumerates assignments to the free
//! symbols when their total width fits a budget, and answers `Unknown` otherwise.

use super::exp::{bin, Sort, SymExp, Value};
use super::interp::{holds, interpret, Interpretation};
use crate::bir::syntax::{BinOp, Label};
use crate::bits::Bits;
use crate::ops::OpRegistry;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Interpretation),
    Unsat,
    Unknown(String),
}

impl SolveResult {
    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveResult::Unsat)
    }
}

/// Anything that can decide a conjunction of 1-bit constraints.
pub trait Solver {
    /// Finds a model of `conjuncts` that also binds every symbol of `also`.
    fn solve_with(&self, conjuncts: &[SymExp], also: &[SymExp]) -> SolveResult;

    fn solve(&self, conjuncts: &[SymExp]) -> SolveResult {
        self.solve_with(conjuncts, &[])
    }
}

#[derive(Clone, Debug)]
pub struct EnumSolver {
    pub width_budget: u32,
    pub ops: OpRegistry,
}

impl Default for EnumSolver {
    fn default() -> Self {
        EnumSolver { width_budget: 20, ops: OpRegistry::default() }
    }
}

impl EnumSolver {
    pub fn new(width_budget: u32, ops: OpRegistry) -> Self {
        EnumSolver { width_budget, ops }
    }
}

type Decode = Box<dyn Fn(u128) -> Value>;

/// Bit count of a sort's domain and the decoder from its index.
fn domain(sort: Sort) -> Option<(u32, Decode)> {
    match sort {
        Sort::Word(w) => Some((u32::from(w), Box::new(move |v| Value::word(v, w)))),
        Sort::Bits(Some(n)) => Some((n as u32, Box::new(move |v| Value::Bits(Bits::from_u128(v, n))))),
        Sort::Count { max, width } => {
            let bits = 128 - u128::from(max).leading_zeros();
            Some((bits, Box::new(move |v| Value::word(v, width))))
        }
        Sort::Bits(None) | Sort::Label | Sort::Mem => None,
    }
}

impl Solver for EnumSolver {
    fn solve_with(&self, conjuncts: &[SymExp], also: &[SymExp]) -> SolveResult {
        let live: Vec<&SymExp> = conjuncts.iter().filter(|c| !c.is_true()).collect();
        if live.iter().any(|c| c.is_false()) {
            return SolveResult::Unsat;
        }
        let mut syms = BTreeMap::new();
        for c in live.iter().copied().chain(also) {
            c.symbols(&mut syms);
        }
        let mut doms = Vec::new();
        let mut total = 0u32;
        for (name, sort) in &syms {
            let Some((bits, mk)) = domain(*sort) else {
                return SolveResult::Unknown(format!("symbol `{name}` has no finite domain"));
            };
            total += bits;
            if total > self.width_budget {
                return SolveResult::Unknown(format!("{total} free bits exceed the budget of {}", self.width_budget));
            }
            let limit = match sort {
                Sort::Count { max, .. } => u128::from(*max) + 1,
                _ => 1u128 << bits,
            };
            doms.push((name.clone(), limit, mk));
        }
        let mut idx = vec![0u128; doms.len()];
        loop {
            let mut h = Interpretation::new();
            for ((name, _, mk), v) in doms.iter().zip(&idx) {
                h = h.with(name, mk(*v));
            }
            if live.iter().all(|c| holds(&h, &self.ops, c)) {
                return SolveResult::Sat(h);
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == doms.len() {
                    return SolveResult::Unsat;
                }
                idx[i] += 1;
                if idx[i] < doms[i].1 {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }
}

/// Conjuncts of `phi` transitively sharing symbols with `goal`.
pub fn slice(phi: &[SymExp], goal: &[SymExp]) -> Vec<SymExp> {
    let mut names: BTreeSet<String> = goal.iter().flat_map(SymExp::symbol_names).collect();
    let mut taken = vec![false; phi.len()];
    loop {
        let mut changed = false;
        for (i, c) in phi.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let cs = c.symbol_names();
            if cs.is_empty() || cs.iter().any(|n| names.contains(n)) {
                taken[i] = true;
                names.extend(cs);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    phi.iter().zip(taken).filter(|(_, t)| *t).map(|(c, _)| c.clone()).collect()
}

/// Checks `phi ∧ goal`, restricted to the relevant part of `phi`.
pub fn check(solver: &dyn Solver, phi: &[SymExp], goal: &SymExp) -> SolveResult {
    let mut q = slice(phi, std::slice::from_ref(goal));
    q.push(goal.clone());
    solver.solve(&q)
}

/// Possible values of a jump target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Targets {
    pub labels: Vec<Label>,
    /// False when the cap was hit or the solver gave up.
    pub complete: bool,
}

fn as_target(v: &Value) -> Option<Label> {
    match v {
        Value::Label(l) => Some(l.clone()),
        Value::Word(w) if w.width == 64 => Some(Label::Addr(w.value as u64)),
        _ => None,
    }
}

fn target_const(t: &SymExp, l: &Label) -> SymExp {
    match t.sort() {
        Sort::Word(64) => match l {
            Label::Addr(a) => SymExp::word(u128::from(*a), 64),
            Label::Name(_) => SymExp::label(l.clone()),
        },
        _ => SymExp::label(l.clone()),
    }
}

/// The equality `target == l` in the sort of `target`.
pub fn target_is(target: &SymExp, l: &Label) -> SymExp {
    bin(BinOp::Eq, target.clone(), target_const(target, l))
}

/// Constant leaves of a target built from nested `ite`s, or `None` if some leaf is
/// not constant.
fn ite_leaves(t: &SymExp, out: &mut Vec<Label>) -> Option<()> {
    match t {
        SymExp::Ite(_, a, b) => {
            ite_leaves(a, out)?;
            ite_leaves(b, out)
        }
        _ => {
            let l = t.as_const().and_then(as_target)?;
            if !out.contains(&l) {
                out.push(l);
            }
            Some(())
        }
    }
}

/// Enumerates the labels a symbolic jump target can take, by repeated solving with
/// the already-found targets excluded. When the solver gives up on a target made of
/// `ite`s over constants, its leaves are the candidates.
pub fn resolve_indirect(solver: &dyn Solver, ops: &OpRegistry, phi: &[SymExp], target: &SymExp, cap: usize) -> Targets {
    if let Some(l) = target.as_const().and_then(as_target) {
        return Targets { labels: vec![l], complete: true };
    }
    let mut q = slice(phi, std::slice::from_ref(target));
    let mut labels = Vec::new();
    let give_up = |mut labels: Vec<Label>| {
        let mut leaves = Vec::new();
        if ite_leaves(target, &mut leaves).is_some() && leaves.len() <= cap {
            for l in leaves {
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
            return Targets { labels, complete: true };
        }
        Targets { labels, complete: false }
    };
    loop {
        match solver.solve_with(&q, std::slice::from_ref(target)) {
            SolveResult::Sat(m) => {
                let Some(l) = interpret(&m, ops, target).ok().as_ref().and_then(as_target) else {
                    return give_up(labels);
                };
                if labels.len() == cap {
                    return Targets { labels, complete: false };
                }
                q.push(bin(BinOp::Neq, target.clone(), target_const(target, &l)));
                labels.push(l);
            }
            SolveResult::Unsat => return Targets { labels, complete: true },
            SolveResult::Unknown(_) => return give_up(labels),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::exp::{and, eq, ite, not};

    fn s(n: &str, w: u8) -> SymExp {
        SymExp::sym(n, Sort::Word(w))
    }

    #[test]
    fn contradiction_is_unsat() {
        let x = s("x", 1);
        assert_eq!(EnumSolver::default().solve(&[and(x.clone(), not(x))]), SolveResult::Unsat);
    }

    #[test]
    fn finds_constant_model() {
        let r = EnumSolver::default().solve(&[eq(s("x", 8), SymExp::word(42, 8))]);
        let SolveResult::Sat(m) = r else { panic!("{r:?}") };
        assert_eq!(m.get("x"), Some(&Value::word(42, 8)));
    }

    #[test]
    fn two_symbol_system() {
        // BIR has no 4-bit words, so this uses 8-bit operands; the oracle is a direct scan
        let expect = (0..=255u128).find(|y| (3 + y) % 256 == 0).unwrap();
        let sum = bin(BinOp::Plus, s("x", 8), s("y", 8));
        let r = EnumSolver::default().solve(&[eq(sum, SymExp::word(0, 8)), eq(s("x", 8), SymExp::word(3, 8))]);
        let SolveResult::Sat(m) = r else { panic!("{r:?}") };
        assert_eq!(m.get("y"), Some(&Value::word(expect, 8)));
    }

    #[test]
    fn budget_overflow_is_unknown() {
        let r = EnumSolver::default().solve(&[eq(s("x", 32), SymExp::word(1, 32))]);
        assert!(matches!(r, SolveResult::Unknown(_)));
    }

    #[test]
    fn indirect_targets() {
        let solver = EnumSolver::default();
        let ops = OpRegistry::default();
        let x = s("x", 1);
        let t = ite(eq(x.clone(), SymExp::word(0, 1)), SymExp::label(Label::Addr(100)), SymExp::label(Label::Addr(200)));
        let all = resolve_indirect(&solver, &ops, &[], &t, 8);
        assert_eq!(all.labels, vec![Label::Addr(100), Label::Addr(200)]);
        assert!(all.complete);
        let forced = resolve_indirect(&solver, &ops, &[eq(x, SymExp::word(0, 1))], &t, 8);
        assert_eq!(forced.labels, vec![Label::Addr(100)]);
        let c = resolve_indirect(&solver, &ops, &[], &SymExp::label(Label::Addr(100)), 8);
        assert_eq!(c.labels, vec![Label::Addr(100)]);
    }
}
