//! Loop summarization for simple counter loops.
//!
//! A loop entry `L` qualifies when its block ends in a conditional jump whose two
//! targets reach `L` again and the declared exit through chains of assignment-only
//! blocks joined by constant jumps. Every variable the iteration modifies must either
//! move by a constant step (`v ± c`) or be overwritten with a value computed from
//! stepped or unmodified variables.

use super::exp::{self, bin, cast, forall, ite, not, Sort, SymExp};
use super::interp::{holds, Interpretation};
use super::step::{sym_eval, SymEnv, SymState};
use crate::bir::eval::eval_exp;
use crate::bir::partition::LabelKind;
use crate::bir::step::{as_label, BirState};
use crate::bir::syntax::{BinOp, BirExp, BirStmt, Label, Ty, Word};
use crate::bir::Program;
use crate::ops::OpRegistry;
use std::collections::{BTreeMap, BTreeSet};

/// Static shape of a summarizable loop.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopShape {
    pub entry: Label,
    pub exit: Label,
    /// Assignments of the entry block, run before every test.
    pub header: Vec<(String, BirExp)>,
    /// Condition (after the header) under which another iteration starts.
    pub cond: BirExp,
    pub cond_negated: bool,
    /// Assignments on the way back to the entry.
    pub body: Vec<(String, BirExp)>,
    /// Assignments on the way from the test to the exit.
    pub tail: Vec<(String, BirExp)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Update {
    /// `v := v + step` (wrapping; subtraction is stored as its two's complement).
    Step(Word),
    /// `v := f` where `f` reads only stepped or unmodified variables.
    Overwrite(SymExp),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopSummary {
    pub counter: String,
    pub counter_sort: Sort,
    /// Modified variables as functions of the counter.
    pub iterated: SymEnv,
    /// Full environment at the exit label, as a function of the counter.
    pub exit_env: SymEnv,
    pub looping_cond: SymExp,
    pub exit: Label,
}

fn const_label(e: &BirExp) -> Option<Label> {
    match e {
        BirExp::Const(v) => as_label(v.clone()).ok(),
        _ => None,
    }
}

fn assigns(prog: &Program, l: &Label) -> Result<Vec<(String, BirExp)>, String> {
    let b = prog.block(l).ok_or_else(|| format!("no block {l}"))?;
    let mut out = Vec::new();
    for s in &b.stmts {
        match s {
            BirStmt::Assign(v, e) => out.push((v.clone(), e.clone())),
            BirStmt::Assert(_) => return Err(format!("block {l} asserts")),
            _ => {}
        }
    }
    Ok(out)
}

/// Follows constant jumps from `start` until `goal` or `other`, collecting assignments.
fn chase(prog: &Program, start: &Label, goals: [&Label; 2]) -> Result<(usize, Vec<(String, BirExp)>), String> {
    let mut cur = start.clone();
    let mut acc = Vec::new();
    let mut seen = BTreeSet::new();
    loop {
        if let Some(i) = goals.iter().position(|g| **g == cur) {
            return Ok((i, acc));
        }
        if prog.partition.kind(&cur) != LabelKind::Normal {
            return Err(format!("path reaches atomic call {cur}"));
        }
        if prog.partition.loops.contains(&cur) {
            return Err(format!("nested loop at {cur}"));
        }
        if !seen.insert(cur.clone()) {
            return Err(format!("inner cycle through {cur}"));
        }
        acc.extend(assigns(prog, &cur)?);
        let b = prog.block(&cur).ok_or_else(|| format!("no block {cur}"))?;
        match b.stmts.last() {
            Some(BirStmt::Jmp(t)) => cur = const_label(t).ok_or_else(|| format!("indirect jump in {cur}"))?,
            _ => return Err(format!("block {cur} does not end in a constant jump")),
        }
    }
}

/// Checks the static shape of the loop at `entry`.
pub fn loop_shape(prog: &Program, entry: &Label) -> Result<LoopShape, String> {
    if !prog.partition.loops.contains(entry) {
        return Err(format!("{entry} is not a loop entry"));
    }
    let exit = prog.partition.exits.get(entry).cloned().ok_or_else(|| format!("loop {entry} has no exit"))?;
    let b = prog.block(entry).ok_or_else(|| format!("no block {entry}"))?;
    let header = assigns(prog, entry)?;
    let Some(BirStmt::CJmp(c, a, bb)) = b.stmts.last() else {
        return Err(format!("loop entry {entry} does not end in cjmp"));
    };
    let (ta, tb) = (const_label(a).ok_or("indirect loop branch")?, const_label(bb).ok_or("indirect loop branch")?);
    let (ka, pa) = chase(prog, &ta, [entry, &exit])?;
    let (kb, pb) = chase(prog, &tb, [entry, &exit])?;
    let (cond_negated, body, tail) = match (ka, kb) {
        (0, 1) => (false, pa, pb),
        (1, 0) => (true, pb, pa),
        _ => return Err(format!("loop {entry} lacks one back path and one exit path")),
    };
    let types = prog.var_types();
    for (v, _) in header.iter().chain(&body).chain(&tail) {
        if types.get(v) == Some(&Ty::Mem) {
            return Err(format!("loop writes memory `{v}`"));
        }
    }
    Ok(LoopShape { entry: entry.clone(), exit, header, cond: c.clone(), cond_negated, body, tail })
}

fn run_assigns(env: &SymEnv, stmts: &[(String, BirExp)]) -> Result<SymEnv, String> {
    let mut env = env.clone();
    for (v, e) in stmts {
        let val = sym_eval(&env, e).map_err(|e| e.to_string())?;
        env.insert(v.clone(), val);
    }
    Ok(env)
}

fn placeholder(v: &str) -> String {
    format!("{v}@0")
}

/// Classifies the per-iteration update of every modified variable.
pub fn updates(prog: &Program, shape: &LoopShape) -> Result<BTreeMap<String, Update>, String> {
    let types = prog.var_types();
    let mut env = SymEnv::new();
    for (v, t) in &types {
        let sort = match t {
            Ty::Word(w) => Sort::Word(*w),
            Ty::Label => Sort::Label,
            Ty::Mem => Sort::Mem,
        };
        env.insert(v.clone(), SymExp::sym(&placeholder(v), sort));
    }
    let mut all = shape.header.clone();
    all.extend(shape.body.iter().cloned());
    let after = run_assigns(&env, &all)?;
    let modified: BTreeSet<String> = after.iter().filter(|(v, e)| env.get(*v) != Some(*e)).map(|(v, _)| v.clone()).collect();
    let mut out = BTreeMap::new();
    for v in &modified {
        let e = &after[v];
        let me = &env[v];
        let step = match e {
            SymExp::Bin(BinOp::Plus, a, b) if **a == *me => b.as_word(),
            SymExp::Bin(BinOp::Plus, a, b) if **b == *me => a.as_word(),
            SymExp::Bin(BinOp::Minus, a, b) if **a == *me => b.as_word().map(|c| Word::new(c.value.wrapping_neg(), c.width)),
            _ => None,
        };
        if let Some(c) = step {
            out.insert(v.clone(), Update::Step(c));
        }
    }
    // overwritten variables may read stepped or unmodified ones, but not each other
    let blocked: BTreeSet<String> = modified.iter().filter(|v| !out.contains_key(*v)).map(|v| placeholder(v)).collect();
    for v in &modified {
        if out.contains_key(v) {
            continue;
        }
        let e = &after[v];
        if e.symbol_names().is_disjoint(&blocked) {
            out.insert(v.clone(), Update::Overwrite(e.clone()));
        } else {
            return Err(format!("`{v}` is updated as {e}, which is neither a constant step nor computed from stepped or invariant values"));
        }
    }
    Ok(out)
}

fn stepped(v0: SymExp, c: Word, t: &SymExp) -> SymExp {
    let tw = cast(t.clone(), c.width);
    bin(BinOp::Plus, v0, bin(BinOp::Mult, tw, SymExp::Const(exp::Value::Word(c))))
}

/// Environment at the loop entry after `t` iterations, with `t` a 64-bit word expression.
fn iterate(env0: &SymEnv, ups: &BTreeMap<String, Update>, t: &SymExp) -> SymEnv {
    let t_prev = bin(BinOp::Minus, t.clone(), SymExp::word(1, 64));
    let mut before_last: BTreeMap<String, SymExp> = env0.iter().map(|(v, e)| (placeholder(v), e.clone())).collect();
    for (v, u) in ups {
        if let Update::Step(c) = u {
            before_last.insert(placeholder(v), stepped(env0[v].clone(), *c, &t_prev));
        }
    }
    let mut env = env0.clone();
    for (v, u) in ups {
        let v0 = env0[v].clone();
        let val = match u {
            Update::Step(c) => stepped(v0, *c, t),
            Update::Overwrite(f) => ite(exp::eq(t.clone(), SymExp::word(0, 64)), v0, f.subst_all(&before_last)),
        };
        env.insert(v.clone(), val);
    }
    env
}

fn continue_cond(shape: &LoopShape, env: &SymEnv) -> Result<SymExp, String> {
    let h = run_assigns(env, &shape.header)?;
    let c = sym_eval(&h, &shape.cond).map_err(|e| e.to_string())?;
    Ok(if shape.cond_negated { not(c) } else { c })
}

/// Summarizes the loop at `s.pc` under a fresh counter named `counter`.
pub fn summarize_loop(prog: &Program, s: &SymState, counter: &str, cap: u64) -> Result<LoopSummary, String> {
    let shape = loop_shape(prog, &s.pc)?;
    let ups = updates(prog, &shape)?;
    let sort = Sort::Count { max: cap, width: 64 };
    let t = SymExp::sym(counter, sort);
    let inner = format!("{counter}'");
    let ti = SymExp::sym(&inner, Sort::Word(64));
    let prev = bin(BinOp::Minus, ti, SymExp::word(1, 64));
    let body = continue_cond(&shape, &iterate(&s.env, &ups, &prev))?;
    let at_t = iterate(&s.env, &ups, &t);
    let stop = not(continue_cond(&shape, &at_t)?);
    let looping_cond = exp::and(forall(&inner, t.clone(), body), stop);
    let mut tail = shape.header.clone();
    tail.extend(shape.tail.iter().cloned());
    let exit_env = run_assigns(&at_t, &tail)?;
    let iterated = ups.keys().map(|v| (v.clone(), at_t[v].clone())).collect();
    Ok(LoopSummary { counter: counter.to_string(), counter_sort: sort, iterated, exit_env, looping_cond, exit: shape.exit })
}

impl LoopSummary {
    /// The summary with the counter fixed to `count`.
    pub fn instantiate(&self, count: u64) -> (SymEnv, SymExp) {
        let c = SymExp::word(u128::from(count), 64);
        let env = self.exit_env.iter().map(|(k, v)| (k.clone(), v.subst(&self.counter, &c))).collect();
        (env, self.looping_cond.subst(&self.counter, &c))
    }

    /// Smallest count in `0..=cap` whose looping condition holds under `h`.
    pub fn count_under(&self, h: &Interpretation, ops: &OpRegistry, cap: u64) -> Option<u64> {
        (0..=cap).find(|j| holds(h, ops, &self.looping_cond.subst(&self.counter, &SymExp::word(u128::from(*j), 64))))
    }
}

/// Runs a statically summarizable loop concretely, block by block, and returns the
/// state at its exit with the iteration count. `None` when the loop is not
/// summarizable, fails, or needs more than `cap` iterations.
pub fn concrete_loop(prog: &Program, s: &BirState, cap: u64) -> Option<(BirState, u64)> {
    let shape = loop_shape(prog, &s.pc).ok()?;
    updates(prog, &shape).ok()?;
    let mut cur = s.clone();
    let mut count = 0u64;
    let limit = (cap as usize + 2) * (prog.blocks.len() + 1);
    for _ in 0..limit {
        cur = crate::bir::step::exec_block(prog, &cur).ok()?;
        if cur.halted {
            return None;
        }
        if cur.pc == shape.exit {
            return Some((cur, count));
        }
        if cur.pc == shape.entry {
            count += 1;
            if count > cap {
                return None;
            }
        }
    }
    None
}

/// Concrete evaluation helper used by tests: value of `v` in a concrete state.
pub fn concrete_var(s: &BirState, v: &str) -> Option<crate::bir::BirVal> {
    eval_exp(&s.env, &BirExp::var(v)).ok()
}
