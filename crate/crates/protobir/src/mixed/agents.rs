//! Program participants for mixed systems: concrete BIR and symbolic BIR grounded by
//! a per-participant interpretation.

use crate::bir::env::RandomTape;
use crate::bir::partition::LabelKind;
use crate::bir::step::{bir_receive, bir_step, channel_ids, BirConfig, BirState, StepAction};
use crate::bir::syntax::Label;
use crate::bir::Program;
use crate::bits::Bits;
use crate::extract::value_bits;
use crate::iml::engine::{Agent, AgentStep, Spawner};
use crate::ops::OpRegistry;
use crate::sym::exp::Value;
use crate::sym::interp::interpret;
use crate::sym::loops::{concrete_loop, summarize_loop, LoopSummary};
use crate::sym::solver::Solver;
use crate::sym::step::{Outcome, Stepper, SymConfig, SymEvent, SymState};
use crate::sym::{Interpretation, SymExp};
use crate::trace::Event;
use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

/// A concrete program participant with its own random tape.
#[derive(Clone)]
pub struct BirAgent<'a> {
    pub prog: &'a Program,
    pub ops: &'a OpRegistry,
    pub cfg: BirConfig,
    /// Summarizable loops up to this many iterations run as one step.
    pub loop_cap: u64,
    pub state: BirState,
}

impl fmt::Debug for BirAgent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BirAgent@{}{}", self.state.pc, if self.state.halted { " (halted)" } else { "" })
    }
}

impl BirAgent<'_> {
    fn with(&self, state: BirState) -> Self {
        BirAgent { state, ..self.clone() }
    }
}

impl Agent for BirAgent<'_> {
    fn step(&self) -> AgentStep<Self> {
        if self.state.halted {
            return AgentStep::Halt;
        }
        if self.prog.partition.loops.contains(&self.state.pc) {
            if let Some((s, count)) = concrete_loop(self.prog, &self.state, self.loop_cap) {
                return AgentStep::Internal(self.with(s), Event::Loop(count));
            }
        }
        match bir_step(self.prog, self.ops, &self.cfg, &self.state) {
            Err(e) => AgentStep::Error(e.to_string()),
            Ok((s, StepAction::Internal(ev))) => AgentStep::Internal(self.with(s), ev),
            Ok((_, StepAction::Halted)) => AgentStep::Halt,
            Ok((s, StepAction::Send { chan, ids, payload })) => AgentStep::Send { next: self.with(s), chan, ids, payload },
            Ok((_, StepAction::Recv { .. })) => AgentStep::Block,
        }
    }

    fn fresh(&self, _: &Bits) -> Result<(Self, Event), String> {
        Err("concrete programs read randomness from their tape".into())
    }

    fn waiting_on(&self) -> Option<(String, Vec<Bits>)> {
        if self.state.halted {
            return None;
        }
        match self.prog.partition.kind(&self.state.pc) {
            LabelKind::Recv(spec) => Some((spec.chan.clone(), channel_ids(&self.state.env, spec).ok()?)),
            _ => None,
        }
    }

    fn deliver(&self, payload: &Bits) -> Result<(Self, Event), String> {
        let (s, ev) = bir_receive(self.prog, &self.state, payload).map_err(|e| e.to_string())?;
        Ok((self.with(s), ev))
    }
}

/// Memo of symbolic steps and loop summaries. Both depend only on the symbolic
/// state and never on `h`, so agents on different enumerated paths share them.
/// States are interned, so lookups after the first go by pointer.
#[derive(Default)]
pub struct SymCache {
    interned: RefCell<HashMap<SymState, Rc<SymState>>>,
    steps: RefCell<HashMap<*const SymState, (Rc<SymState>, Steps)>>,
    loops: RefCell<HashMap<*const SymState, (Rc<SymState>, LoopResult)>>,
}

type LoopResult = Rc<Option<(SymState, LoopSummary)>>;

type Steps = Rc<Result<Vec<Rc<Next>>, String>>;

/// A symbolic successor with its state shared.
struct Next {
    state: Rc<SymState>,
    event: SymEvent,
    decisions: Vec<(SymExp, bool)>,
    outcome: Outcome,
}

impl SymCache {
    fn intern(&self, s: SymState) -> Rc<SymState> {
        self.interned.borrow_mut().entry(s.clone()).or_insert_with(|| Rc::new(s)).clone()
    }
}

/// A symbolic participant. Every symbol it creates is bound in `h` as soon as the
/// concrete value is known, so its branches are always decided.
#[derive(Clone)]
pub struct SymAgent<'a> {
    pub prog: &'a Program,
    pub ops: &'a OpRegistry,
    pub cfg: &'a SymConfig,
    pub solver: &'a dyn Solver,
    pub loop_cap: u64,
    pub state: Rc<SymState>,
    pub h: Interpretation,
    pub halted: bool,
    /// Run site that started this participant.
    pub slot: usize,
    pub cache: Rc<SymCache>,
}

impl fmt::Debug for SymAgent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymAgent@{}{} |h|={}", self.state.pc, if self.halted { " (halted)" } else { "" }, self.h.len())
    }
}

/// Grounds a symbolic value as a bitstring.
pub fn ground(h: &Interpretation, ops: &OpRegistry, e: &SymExp) -> Result<Bits, String> {
    let v = interpret(h, ops, e).map_err(|e| e.to_string())?;
    value_bits(&v).ok_or_else(|| "memory used as a bitstring".to_string())
}

fn holds_as(h: &Interpretation, ops: &OpRegistry, c: &SymExp, want: bool) -> bool {
    matches!(interpret(h, ops, c), Ok(Value::Word(w)) if w.width == 1 && w.is_true() == want)
}

impl<'a> SymAgent<'a> {
    fn stepper(&self) -> Stepper<'a> {
        Stepper { prog: self.prog, ops: self.ops, cfg: self.cfg, solver: self.solver }
    }

    fn key(&self) -> *const SymState {
        Rc::as_ptr(&self.state)
    }

    fn steps(&self) -> Steps {
        if let Some((_, s)) = self.cache.steps.borrow().get(&self.key()) {
            return s.clone();
        }
        let succs = self.stepper().step(&self.state).map_err(|e| e.to_string()).map(|v| {
            v.into_iter()
                .map(|s| Rc::new(Next { state: self.cache.intern(s.state), event: s.event, decisions: s.decisions, outcome: s.outcome }))
                .collect()
        });
        let succs = Rc::new(succs);
        self.cache.steps.borrow_mut().insert(self.key(), (self.state.clone(), succs.clone()));
        succs
    }

    /// The unique symbolic successor whose branch decisions hold under `h`.
    fn successor(&self) -> Result<Rc<Next>, String> {
        let succs = self.steps();
        let succs = succs.as_ref().as_ref().map_err(Clone::clone)?;
        let mut ok = succs.iter().filter(|s| s.decisions.iter().all(|(c, b)| holds_as(&self.h, self.ops, c, *b)));
        let first = ok.next().ok_or_else(|| format!("no successor at {} agrees with the interpretation", self.state.pc))?;
        if ok.next().is_some() {
            return Err(format!("several successors at {} agree with the interpretation", self.state.pc));
        }
        Ok(first.clone())
    }

    fn advance(&self, s: &Next, h: Interpretation) -> Self {
        SymAgent { state: s.state.clone(), h, halted: s.outcome == Outcome::Halted, ..self.clone() }
    }

    fn try_loop(&self) -> Option<(Self, Event)> {
        let cached = self.cache.loops.borrow().get(&self.key()).map(|(_, e)| e.clone());
        let entry = match cached {
            Some(e) => e,
            None => {
                let mut st = (*self.state).clone();
                let counter = st.fresh_name("t_loop");
                let e = Rc::new(summarize_loop(self.prog, &st, &counter, self.loop_cap).ok().map(|sum| (st, sum)));
                self.cache.loops.borrow_mut().insert(self.key(), (self.state.clone(), e.clone()));
                e
            }
        };
        let (st, sum) = entry.as_ref().as_ref()?;
        let mut st = st.clone();
        let count = sum.count_under(&self.h, self.ops, self.loop_cap)?;
        let (env, cond) = sum.instantiate(count);
        st.env = env;
        st.assume(cond);
        st.pc = sum.exit.clone();
        Some((SymAgent { state: self.cache.intern(st), ..self.clone() }, Event::Loop(count)))
    }
}

impl Agent for SymAgent<'_> {
    fn step(&self) -> AgentStep<Self> {
        if self.halted {
            return AgentStep::Halt;
        }
        if self.prog.partition.loops.contains(&self.state.pc) {
            if let Some((a, ev)) = self.try_loop() {
                return AgentStep::Internal(a, ev);
            }
        }
        if matches!(self.prog.partition.kind(&self.state.pc), LabelKind::Recv(_)) {
            return AgentStep::Block;
        }
        let succ = match self.successor() {
            Ok(s) => s,
            Err(e) => return AgentStep::Error(e),
        };
        if let Outcome::Failed(l) = &succ.outcome {
            return AgentStep::Error(format!("assertion failed in block {l}"));
        }
        let g = |e: &SymExp| ground(&self.h, self.ops, e);
        let res = match &succ.event {
            SymEvent::Tau => Ok(AgentStep::Internal(self.advance(&succ, self.h.clone()), Event::Tau)),
            SymEvent::Fresh { bits, .. } => Ok(AgentStep::Fresh(*bits)),
            SymEvent::Crypto { var, def } => g(def).and_then(|v| {
                let mut h = self.h.clone();
                h.bind(var, Value::Bits(v.clone())).map_err(|e| e.to_string())?;
                Ok(AgentStep::Internal(self.advance(&succ, h), Event::Crypto(v)))
            }),
            SymEvent::Ev { name, args } => args
                .iter()
                .map(g)
                .collect::<Result<Vec<_>, _>>()
                .map(|args| AgentStep::Internal(self.advance(&succ, self.h.clone()), Event::Ev { name: name.clone(), args })),
            SymEvent::Out { chan, ids, payload } => (|| {
                let ids = ids.iter().map(g).collect::<Result<Vec<_>, _>>()?;
                let payload = g(payload)?;
                Ok(AgentStep::Send { next: self.advance(&succ, self.h.clone()), chan: chan.clone(), ids, payload })
            })(),
            SymEvent::In { .. } => Ok(AgentStep::Block),
            SymEvent::Loop { .. } => Err("unexpected loop event".into()),
        };
        res.unwrap_or_else(AgentStep::Error)
    }

    fn fresh(&self, value: &Bits) -> Result<(Self, Event), String> {
        let succ = self.successor()?;
        let SymEvent::Fresh { var, bits, index } = &succ.event else {
            return Err(format!("no random draw at {}", self.state.pc));
        };
        if value.len() != *bits {
            return Err(format!("drew {} bits, expected {bits}", value.len()));
        }
        if self.h.contains(var) {
            return Err(format!("fresh symbol {var} is already bound"));
        }
        let mut h = self.h.clone();
        h.bind(var, Value::Bits(value.clone())).map_err(|e| e.to_string())?;
        Ok((self.advance(&succ, h), Event::Fresh { value: value.clone(), index: Some(*index) }))
    }

    fn waiting_on(&self) -> Option<(String, Vec<Bits>)> {
        if self.halted {
            return None;
        }
        match self.prog.partition.kind(&self.state.pc) {
            LabelKind::Recv(spec) => {
                let ids = spec.ids.iter().map(|v| self.state.env.get(v).ok_or(()).and_then(|e| ground(&self.h, self.ops, e).map_err(|_| ())));
                Some((spec.chan.clone(), ids.collect::<Result<Vec<_>, _>>().ok()?))
            }
            _ => None,
        }
    }

    fn deliver(&self, payload: &Bits) -> Result<(Self, Event), String> {
        let succ = self.successor()?;
        let SymEvent::In { chan, ids, var } = &succ.event else {
            return Err(format!("{} is not a receive entry", self.state.pc));
        };
        if self.h.contains(var) {
            return Err(format!("input symbol {var} is already bound"));
        }
        let ids = ids.iter().map(|e| ground(&self.h, self.ops, e)).collect::<Result<Vec<_>, _>>()?;
        let mut h = self.h.clone();
        h.bind(var, Value::Bits(payload.clone())).map_err(|e| e.to_string())?;
        Ok((self.advance(&succ, h), Event::In { chan: chan.clone(), ids, payload: payload.clone() }))
    }
}

/// Starts concrete participants. Run site `slot` reads tape `tapes[slot]`.
#[derive(Clone)]
pub struct BirSpawner<'a> {
    pub prog: &'a Program,
    pub ops: &'a OpRegistry,
    pub cfg: BirConfig,
    pub loop_cap: u64,
    pub tapes: Vec<RandomTape>,
}

impl<'a> Spawner<BirAgent<'a>> for BirSpawner<'a> {
    fn spawn(&self, pc: &Label, args: &[Bits], slot: usize) -> Result<BirAgent<'a>, String> {
        let tape = self.tapes.get(slot).cloned().unwrap_or_else(|| RandomTape::empty(self.cfg.n));
        let state = BirState::start(self.prog, pc.clone(), args, tape).map_err(|e| e.to_string())?;
        Ok(BirAgent { prog: self.prog, ops: self.ops, cfg: self.cfg.clone(), loop_cap: self.loop_cap, state })
    }
}

/// Starts symbolic participants. Arguments bind the start's declared parameters.
#[derive(Clone)]
pub struct SymSpawner<'a> {
    pub prog: &'a Program,
    pub ops: &'a OpRegistry,
    pub cfg: &'a SymConfig,
    pub solver: &'a dyn Solver,
    pub loop_cap: u64,
    pub cache: Rc<SymCache>,
}

impl<'a> SymSpawner<'a> {
    pub fn new(prog: &'a Program, ops: &'a OpRegistry, cfg: &'a SymConfig, solver: &'a dyn Solver) -> Self {
        SymSpawner { prog, ops, cfg, solver, loop_cap: cfg.loop_cap, cache: Rc::default() }
    }
}

/// Parameter names for a run at `pc` with `argc` arguments.
pub fn run_params(prog: &Program, pc: &Label, argc: usize) -> Result<Vec<String>, String> {
    let params = SymState::params_of(prog, pc);
    if params.len() != argc {
        return Err(format!("run(@{pc}) passes {argc} arguments but the start declares {}", params.len()));
    }
    Ok(params)
}

impl<'a> Spawner<SymAgent<'a>> for SymSpawner<'a> {
    fn spawn(&self, pc: &Label, args: &[Bits], slot: usize) -> Result<SymAgent<'a>, String> {
        let params = run_params(self.prog, pc, args.len())?;
        let state = SymState::start(self.prog, pc.clone(), &params).map_err(|e| e.to_string())?;
        let mut h = Interpretation::new();
        for (p, a) in params.iter().zip(args) {
            h.bind(p, Value::Bits(a.clone())).map_err(|e| e.to_string())?;
        }
        Ok(SymAgent { prog: self.prog, ops: self.ops, cfg: self.cfg, solver: self.solver, loop_cap: self.loop_cap, state: self.cache.intern(state), h, halted: false, slot, cache: self.cache.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::parse::parse_program;
    use crate::sym::exp::{bin, Sort};
    use crate::sym::solver::EnumSolver;
    use crate::bir::BinOp;

    #[test]
    fn equal_states_are_interned_once() {
        let prog = parse_program("block 0:\n  halt\n", "").unwrap();
        let cache = SymCache::default();
        let a = cache.intern(SymState::initial(&prog, Label::Addr(0)));
        let b = cache.intern(SymState::initial(&prog, Label::Addr(0)));
        assert!(Rc::ptr_eq(&a, &b));
    }

    #[test]
    fn ground_evaluates_under_h() {
        let ops = OpRegistry::default();
        let h = Interpretation::new().with("x", Value::word(3, 8));
        let e = bin(BinOp::Plus, SymExp::sym("x", Sort::Word(8)), SymExp::word(4, 8));
        assert_eq!(ground(&h, &ops, &e).unwrap(), Bits::from_u128(7, 8));
        assert!(ground(&Interpretation::new(), &ops, &e).is_err());
    }

    #[test]
    fn spawned_agent_binds_parameters() {
        let prog = parse_program("block 100:\n  halt\n", "[starts.100]\nparams = [\"k\"]\n").unwrap();
        let ops = OpRegistry::default();
        let cfg = SymConfig::default();
        let solver = EnumSolver::default();
        let sp = SymSpawner::new(&prog, &ops, &cfg, &solver);
        let key = Bits::from_u128(5, 4);
        let a = sp.spawn(&Label::Addr(100), std::slice::from_ref(&key), 0).unwrap();
        assert_eq!(a.h.get("k"), Some(&Value::Bits(key)));
        assert!(sp.spawn(&Label::Addr(100), &[], 0).is_err());
    }
}
