//! Execution trees: branch nodes for path splits, event nodes for steps.

use super::exp::SymExp;
use super::loops::summarize_loop;
use super::solver::{check, SolveResult, Solver};
use super::step::{Outcome, Stepper, SymConfig, SymEvent, SymState, Successor};
use super::exp::{self, Sort};
use crate::bir::syntax::Label;
use crate::bir::Program;
use crate::ops::OpRegistry;
use serde_json::{json, Value as Json};
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LeafKind {
    Halt,
    /// Assertion failure in the given block.
    Failed(Label),
    /// The step raised an error (tape exhausted, unmapped load, ...).
    Error(String),
    /// A bound ran out; the subtree is incomplete.
    Truncated(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecTree {
    Branch { pc: Label, cond: SymExp, then: Box<ExecTree>, else_: Box<ExecTree>, unknown: bool },
    Node { pc: Label, ev: SymEvent, child: Box<ExecTree> },
    Leaf(LeafKind),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuiltTree {
    pub tree: ExecTree,
    pub diagnostics: Vec<String>,
}

impl ExecTree {
    pub fn node_count(&self) -> usize {
        match self {
            ExecTree::Branch { then, else_, .. } => 1 + then.node_count() + else_.node_count(),
            ExecTree::Node { child, .. } => 1 + child.node_count(),
            ExecTree::Leaf(_) => 1,
        }
    }

    pub fn branch_count(&self) -> usize {
        match self {
            ExecTree::Branch { then, else_, .. } => 1 + then.branch_count() + else_.branch_count(),
            ExecTree::Node { child, .. } => child.branch_count(),
            ExecTree::Leaf(_) => 0,
        }
    }

    pub fn leaves(&self) -> Vec<&LeafKind> {
        match self {
            ExecTree::Branch { then, else_, .. } => {
                let mut v = then.leaves();
                v.extend(else_.leaves());
                v
            }
            ExecTree::Node { child, .. } => child.leaves(),
            ExecTree::Leaf(k) => vec![k],
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.leaves().iter().any(|l| matches!(l, LeafKind::Truncated(_)))
    }

    /// First subtree, in pre-order, rooted at `pc`.
    pub fn find(&self, pc: &Label) -> Option<&ExecTree> {
        match self {
            ExecTree::Branch { pc: p, then, else_, .. } => {
                if p == pc {
                    return Some(self);
                }
                then.find(pc).or_else(|| else_.find(pc))
            }
            ExecTree::Node { pc: p, child, .. } => {
                if p == pc {
                    Some(self)
                } else {
                    child.find(pc)
                }
            }
            ExecTree::Leaf(_) => None,
        }
    }

    /// Events along every root-to-leaf path, ignoring branch conditions.
    pub fn paths(&self) -> Vec<Vec<&SymEvent>> {
        match self {
            ExecTree::Branch { then, else_, .. } => {
                let mut v = then.paths();
                v.extend(else_.paths());
                v
            }
            ExecTree::Node { ev, child, .. } => child
                .paths()
                .into_iter()
                .map(|mut p| {
                    p.insert(0, ev);
                    p
                })
                .collect(),
            ExecTree::Leaf(_) => vec![vec![]],
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph exec_tree {\n  node [fontname=\"monospace\"];\n");
        let mut next = 0usize;
        self.dot_into(&mut out, &mut next);
        out.push_str("}\n");
        out
    }

    fn dot_into(&self, out: &mut String, next: &mut usize) -> usize {
        let id = *next;
        *next += 1;
        let esc = |s: String| s.replace('"', "\\\"");
        match self {
            ExecTree::Branch { pc, cond, then, else_, unknown } => {
                let mark = if *unknown { " ?" } else { "" };
                let _ = writeln!(out, "  n{id} [shape=diamond, label=\"{}\"];", esc(format!("{pc}: {cond}{mark}")));
                let t = then.dot_into(out, next);
                let e = else_.dot_into(out, next);
                let _ = writeln!(out, "  n{id} -> n{t} [label=\"T\"];\n  n{id} -> n{e} [label=\"F\"];");
            }
            ExecTree::Node { pc, ev, child } => {
                let _ = writeln!(out, "  n{id} [shape=box, label=\"{}\"];", esc(format!("{pc}: {ev}")));
                let c = child.dot_into(out, next);
                let _ = writeln!(out, "  n{id} -> n{c};");
            }
            ExecTree::Leaf(k) => {
                let _ = writeln!(out, "  n{id} [shape=ellipse, label=\"{}\"];", esc(format!("{k:?}")));
            }
        }
        id
    }

    pub fn to_json(&self) -> Json {
        match self {
            ExecTree::Branch { pc, cond, then, else_, unknown } => json!({
                "kind": "branch", "pc": pc.to_string(), "cond": cond.to_string(), "unknown": unknown,
                "then": then.to_json(), "else": else_.to_json(),
            }),
            ExecTree::Node { pc, ev, child } => json!({
                "kind": "node", "pc": pc.to_string(), "event": ev.to_string(), "child": child.to_json(),
            }),
            ExecTree::Leaf(k) => json!({ "kind": "leaf", "leaf": format!("{k:?}") }),
        }
    }
}

pub struct TreeBuilder<'a> {
    pub stepper: Stepper<'a>,
    pub depth: usize,
    pub diagnostics: Vec<String>,
}

/// Builds the execution tree from `s0`, exploring at most `depth` steps per path.
pub fn build_tree(prog: &Program, ops: &OpRegistry, cfg: &SymConfig, solver: &dyn Solver, s0: SymState, depth: usize) -> BuiltTree {
    let mut b = TreeBuilder { stepper: Stepper { prog, ops, cfg, solver }, depth, diagnostics: Vec::new() };
    let tree = b.build(s0, 0);
    BuiltTree { tree, diagnostics: b.diagnostics }
}

impl TreeBuilder<'_> {
    fn build(&mut self, s: SymState, depth: usize) -> ExecTree {
        if depth >= self.depth {
            return ExecTree::Leaf(LeafKind::Truncated(format!("depth {} reached at {}", self.depth, s.pc)));
        }
        if self.stepper.prog.partition.loops.contains(&s.pc) {
            if let Some((next, ev)) = self.try_loop(&s) {
                let pc = s.pc.clone();
                return ExecTree::Node { pc, ev, child: Box::new(self.build(next, depth + 1)) };
            }
        }
        match self.stepper.step(&s) {
            Ok(succs) => {
                for x in &succs {
                    if x.unknown {
                        let msg = format!("solver inconclusive at {}; both branches kept", s.pc);
                        if !self.diagnostics.contains(&msg) {
                            self.diagnostics.push(msg);
                        }
                    }
                }
                self.group(&s.pc, succs, 0, depth)
            }
            Err(e) => ExecTree::Node { pc: s.pc.clone(), ev: SymEvent::Tau, child: Box::new(ExecTree::Leaf(LeafKind::Error(e.to_string()))) },
        }
    }

    /// Tries to replace the loop at `s.pc` by its summary; succeeds when the iteration
    /// count is uniquely determined by the path condition.
    fn try_loop(&mut self, s: &SymState) -> Option<(SymState, SymEvent)> {
        let mut st = s.clone();
        let counter = st.fresh_name("t_loop");
        let cap = self.stepper.cfg.loop_cap;
        let sum = match summarize_loop(self.stepper.prog, &st, &counter, cap) {
            Ok(sum) => sum,
            Err(e) => {
                self.note(format!("loop at {} not summarized ({e}); unrolling", s.pc));
                return None;
            }
        };
        let solver = self.stepper.solver;
        let SolveResult::Sat(m) = check(solver, &st.phi, &sum.looping_cond) else {
            self.note(format!("loop at {}: no iteration count within {cap} found; unrolling", s.pc));
            return None;
        };
        let count = m.get(&counter)?.as_word()?.value as u64;
        let other = exp::and(
            sum.looping_cond.clone(),
            exp::bin(crate::bir::BinOp::Neq, SymExp::sym(&counter, Sort::Word(64)), SymExp::word(u128::from(count), 64)),
        );
        // rename so the Count-sorted and plain views of the counter coincide for the solver
        let other = other.subst(&counter, &SymExp::sym(&counter, sum.counter_sort));
        if !check(solver, &st.phi, &other).is_unsat() {
            self.note(format!("loop at {}: iteration count not unique; unrolling", s.pc));
            return None;
        }
        let (env, cond) = sum.instantiate(count);
        st.env = env;
        st.assume(cond);
        st.pc = sum.exit;
        Some((st, SymEvent::Loop { counter, count }))
    }

    fn note(&mut self, msg: String) {
        if !self.diagnostics.contains(&msg) {
            self.diagnostics.push(msg);
        }
    }

    fn group(&mut self, pc: &Label, mut succs: Vec<Successor>, i: usize, depth: usize) -> ExecTree {
        if succs.is_empty() {
            return ExecTree::Leaf(LeafKind::Truncated(format!("no feasible successor at {pc}")));
        }
        if succs.len() == 1 && succs[0].decisions.len() == i {
            let x = succs.pop().expect("one successor");
            return self.finish(pc, x, depth);
        }
        let cond = succs[0].decisions[i].0.clone();
        let unknown = succs.iter().any(|x| x.unknown);
        let (t, e): (Vec<_>, Vec<_>) = succs.into_iter().partition(|x| x.decisions[i].1);
        match (t.is_empty(), e.is_empty()) {
            (false, true) => self.group(pc, t, i + 1, depth),
            (true, false) => self.group(pc, e, i + 1, depth),
            _ => {
                let then = Box::new(self.group(pc, t, i + 1, depth));
                let else_ = Box::new(self.group(pc, e, i + 1, depth));
                ExecTree::Branch { pc: pc.clone(), cond, then, else_, unknown }
            }
        }
    }

    fn finish(&mut self, pc: &Label, x: Successor, depth: usize) -> ExecTree {
        let child = match x.outcome {
            Outcome::Halted => ExecTree::Leaf(LeafKind::Halt),
            Outcome::Failed(l) => ExecTree::Leaf(LeafKind::Failed(l)),
            Outcome::Continue => self.build(x.state, depth + 1),
        };
        ExecTree::Node { pc: pc.clone(), ev: x.event, child: Box::new(child) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::parse::parse_program;
    use crate::sym::solver::EnumSolver;

    fn build(text: &str, part: &str, start: u64) -> BuiltTree {
        let p = parse_program(text, part).unwrap();
        let s0 = SymState::initial(&p, Label::Addr(start));
        build_tree(&p, &OpRegistry::default(), &SymConfig::default(), &EnumSolver::default(), s0, 100)
    }

    #[test]
    fn halt_only() {
        let t = build("block 0:\n  halt\n", "", 0).tree;
        let expect = ExecTree::Node { pc: Label::Addr(0), ev: SymEvent::Tau, child: Box::new(ExecTree::Leaf(LeafKind::Halt)) };
        assert_eq!(t, expect);
    }

    #[test]
    fn fresh_bit_branch() {
        // the low bit of a fresh value decides the branch
        let text = "var b: 128\n\
                    block 0:\n  RET := @1\n  jmp @500\n\
                    block 1:\n  b := load(Mem, R0 + 1:64, 128)\n  cjmp ((b & 1:128) == 1:128), @2, @3\n\
                    block 2:\n  halt\nblock 3:\n  halt\n";
        let t = build(text, "rng = [500]", 0).tree;
        assert_eq!(t.branch_count(), 1);
        assert_eq!(t.leaves(), vec![&LeafKind::Halt, &LeafKind::Halt]);
    }

    #[test]
    fn counter_loop_becomes_one_node() {
        let text = "var i: 64\nblock 0:\n  jmp @10\nblock 10:\n  cjmp (i < 4:64), @11, @20\nblock 11:\n  i := i + 1:64\n  jmp @10\nblock 20:\n  halt\n";
        let b = build(text, "loops = [10]\n[exits]\n\"10\" = 20\n", 0);
        let ExecTree::Node { child, .. } = &b.tree else { panic!() };
        let ExecTree::Node { ev: SymEvent::Loop { count: 4, .. }, .. } = &**child else { panic!("{:?}", child) };
        assert_eq!(b.tree.node_count(), 4);
    }

    #[test]
    fn rebuild_is_identical() {
        let text = "block 0:\n  RET := @1\n  jmp @500\nblock 1:\n  halt\n";
        assert_eq!(build(text, "rng = [500]", 0), build(text, "rng = [500]", 0));
    }
}
