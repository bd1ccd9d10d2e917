//! Probabilistic small-step execution of IML systems, optionally mixed with program
//! participants ("agents"), plus exhaustive trace enumeration.
//!
//! A system has one active member and a pool. The pool is kept in arrival order and
//! scheduling is first-in first-out, which makes every step either deterministic or a
//! uniform random choice.

use super::eval::{eval, truth, IEnv};
use super::syntax::Process;
use crate::bir::syntax::Label;
use crate::bits::Bits;
use crate::ops::OpRegistry;
use crate::trace::Event;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_MAXLEN: usize = 1 << 16;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub maxlen: usize,
    pub chan_maxlen: BTreeMap<String, usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { maxlen: DEFAULT_MAXLEN, chan_maxlen: BTreeMap::new() }
    }
}

impl EngineConfig {
    pub fn maxlen(&self, chan: &str) -> usize {
        self.chan_maxlen.get(chan).copied().unwrap_or(self.maxlen)
    }
}

/// What a program participant wants to do next.
#[derive(Clone, Debug)]
pub enum AgentStep<A> {
    Internal(A, Event),
    /// Needs a uniformly random value of this many bits; see [`Agent::fresh`].
    Fresh(usize),
    Send { next: A, chan: String, ids: Vec<Bits>, payload: Bits },
    /// Waiting for input.
    Block,
    Halt,
    Error(String),
}

pub trait Agent: Clone + fmt::Debug {
    fn step(&self) -> AgentStep<Self>;
    fn fresh(&self, value: &Bits) -> Result<(Self, Event), String>;
    /// The channel and ids this participant is blocked on, if any.
    fn waiting_on(&self) -> Option<(String, Vec<Bits>)>;
    fn deliver(&self, payload: &Bits) -> Result<(Self, Event), String>;
}

/// Creates program participants for `run` sites.
pub trait Spawner<A> {
    fn spawn(&self, pc: &Label, args: &[Bits], slot: usize) -> Result<A, String>;
}

/// Participant type of pure IML systems.
#[derive(Clone, Debug)]
pub enum NoAgent {}

impl Agent for NoAgent {
    fn step(&self) -> AgentStep<Self> {
        match *self {}
    }
    fn fresh(&self, _: &Bits) -> Result<(Self, Event), String> {
        match *self {}
    }
    fn waiting_on(&self) -> Option<(String, Vec<Bits>)> {
        match *self {}
    }
    fn deliver(&self, _: &Bits) -> Result<(Self, Event), String> {
        match *self {}
    }
}

/// Spawner for pure IML: every `run` is an error.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoSpawn;

impl Spawner<NoAgent> for NoSpawn {
    fn spawn(&self, pc: &Label, _: &[Bits], _: usize) -> Result<NoAgent, String> {
        Err(format!("run(@{pc}) needs a program"))
    }
}

#[derive(Clone, Debug)]
pub enum Member<A> {
    Proc(IEnv, Arc<Process>),
    Agent(A),
}

#[derive(Clone, Debug)]
pub struct System<A> {
    pub active: Option<Member<A>>,
    pub pool: Vec<Member<A>>,
}

impl<A> System<A> {
    pub fn new(p: Process) -> Self {
        System { active: Some(Member::Proc(IEnv::new(), Arc::new(p))), pool: Vec::new() }
    }

    pub fn with_env(env: IEnv, p: Process) -> Self {
        System { active: Some(Member::Proc(env, Arc::new(p))), pool: Vec::new() }
    }

    pub fn members(&self) -> impl Iterator<Item = &Member<A>> {
        self.active.iter().chain(&self.pool)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum End {
    /// Nothing left to schedule.
    Done,
    Stuck(String),
    Error(String),
    /// Depth bound reached.
    Depth,
    /// A `new` wider than the enumeration budget.
    Budget(String),
}

impl End {
    pub fn is_partial(&self) -> bool {
        matches!(self, End::Depth | End::Budget(_))
    }
}

pub enum Step<A> {
    /// A probability-1 transition.
    Move(System<A>, Event),
    /// The active member draws `bits` random bits; finish with [`Engine::fresh`].
    Fresh(System<A>, usize),
    End(End),
}

pub struct Engine<'a, S> {
    pub ops: &'a OpRegistry,
    pub cfg: EngineConfig,
    pub spawner: S,
}

fn is_true(env: &IEnv, ops: &OpRegistry, e: &super::syntax::IExp) -> Option<bool> {
    eval(env, ops, e).map(|b| truth(&b) == Some(true))
}

impl<'a, S> Engine<'a, S> {
    pub fn new(ops: &'a OpRegistry, spawner: S) -> Self {
        Engine { ops, cfg: EngineConfig::default(), spawner }
    }

    /// Silently runs `p` up to its first communication, randomness, event or run.
    /// `If` and `Assume` on ⊥ drop the member.
    pub fn reduce<A>(&self, env: IEnv, p: &Arc<Process>, out: &mut Vec<Member<A>>) {
        let (mut env, mut p) = (env, p.clone());
        loop {
            match &*p {
                Process::Nil => return,
                Process::Par(a, b) => {
                    self.reduce(env.clone(), a, out);
                    p = b.clone();
                }
                Process::Let { var, exp, cont } => {
                    let v = eval(&env, self.ops, exp);
                    env.insert(var.clone(), v);
                    p = cont.clone();
                }
                Process::Assume { cond, cont } => match is_true(&env, self.ops, cond) {
                    Some(true) => p = cont.clone(),
                    _ => return,
                },
                Process::If { cond, then, else_ } => match is_true(&env, self.ops, cond) {
                    Some(true) => p = then.clone(),
                    Some(false) => p = else_.clone(),
                    None => return,
                },
                Process::Repl { counter, bound, body, cont } => {
                    for i in 1..=*bound {
                        let mut e = env.clone();
                        e.insert(counter.clone(), Some(Bits::from_u128(u128::from(i), 64)));
                        self.reduce(e, body, out);
                    }
                    p = cont.clone();
                }
                Process::In { .. } | Process::New { .. } | Process::Out { .. } | Process::Event { .. } | Process::Run { .. } => {
                    out.push(Member::Proc(env, p));
                    return;
                }
            }
        }
    }
}

fn schedulable<A: Agent>(m: &Member<A>) -> bool {
    match m {
        Member::Proc(_, p) => !matches!(**p, Process::In { .. }),
        Member::Agent(a) => a.waiting_on().is_none(),
    }
}

impl<S> Engine<'_, S> {
    fn receivers<A: Agent>(&self, sys: &System<A>, chan: &str, ids: &[Bits]) -> Vec<usize> {
        sys.pool
            .iter()
            .enumerate()
            .filter(|(_, m)| match m {
                Member::Proc(env, p) => match &**p {
                    Process::In { chan: c, ids: rids, .. } if c == chan && rids.len() == ids.len() => {
                        rids.iter().zip(ids).all(|(e, b)| eval(env, self.ops, e).as_ref() == Some(b))
                    }
                    _ => false,
                },
                Member::Agent(a) => a.waiting_on().is_some_and(|(c, i)| c == chan && i == ids),
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Hands `payload` to the unique receiver, which becomes active.
    fn rendezvous<A: Agent>(&self, mut sys: System<A>, chan: &str, ids: Vec<Bits>, payload: Bits) -> Step<A> {
        let payload = payload.truncate(self.cfg.maxlen(chan));
        let rs = self.receivers(&sys, chan, &ids);
        let r = match rs.as_slice() {
            [] => return Step::End(End::Stuck(format!("no receiver on {chan}"))),
            [r] => *r,
            _ => return Step::End(End::Error(format!("{} receivers on {chan}", rs.len()))),
        };
        let active = match sys.pool.remove(r) {
            Member::Proc(mut env, p) => {
                let Process::In { var, cont, .. } = &*p else { unreachable!("receiver is input-headed") };
                env.insert(var.clone(), Some(payload.clone()));
                Member::Proc(env, cont.clone())
            }
            Member::Agent(a) => match a.deliver(&payload) {
                Ok((a, _)) => Member::Agent(a),
                Err(e) => return Step::End(End::Error(e)),
            },
        };
        sys.active = Some(active);
        Step::Move(sys, Event::Msg { chan: chan.to_string(), ids, payload })
    }

    /// One labelled step. Scheduling, termination of members and blocking are silent.
    pub fn step<A: Agent>(&self, sys: &System<A>) -> Step<A>
    where
        S: Spawner<A>,
    {
        let mut sys = sys.clone();
        loop {
            let Some(active) = sys.active.take() else {
                match sys.pool.iter().position(schedulable) {
                    Some(i) => {
                        sys.active = Some(sys.pool.remove(i));
                        continue;
                    }
                    None => return Step::End(End::Done),
                }
            };
            match active {
                Member::Agent(a) => match a.step() {
                    AgentStep::Internal(a, ev) => {
                        sys.active = Some(Member::Agent(a));
                        return Step::Move(sys, ev);
                    }
                    AgentStep::Fresh(n) => {
                        sys.active = Some(Member::Agent(a));
                        return Step::Fresh(sys, n);
                    }
                    AgentStep::Send { next, chan, ids, payload } => {
                        sys.pool.push(Member::Agent(next));
                        return self.rendezvous(sys, &chan, ids, payload);
                    }
                    AgentStep::Block => sys.pool.push(Member::Agent(a)),
                    AgentStep::Halt | AgentStep::Error(_) => {}
                },
                Member::Proc(mut env, p) => match &*p {
                    Process::Nil => {}
                    Process::Par(..) => self.reduce(env, &p, &mut sys.pool),
                    Process::In { .. } => sys.pool.push(Member::Proc(env, p)),
                    Process::Let { var, exp, cont } => {
                        let v = eval(&env, self.ops, exp);
                        env.insert(var.clone(), v);
                        sys.active = Some(Member::Proc(env, cont.clone()));
                        return Step::Move(sys, Event::Tau);
                    }
                    Process::If { cond, then, else_ } => {
                        let next = match is_true(&env, self.ops, cond) {
                            Some(true) => then,
                            Some(false) => else_,
                            None => return Step::End(End::Stuck(format!("condition {cond} is ⊥"))),
                        };
                        sys.active = Some(Member::Proc(env, next.clone()));
                        return Step::Move(sys, Event::Tau);
                    }
                    Process::Assume { cond, cont } => {
                        match is_true(&env, self.ops, cond) {
                            Some(true) => sys.active = Some(Member::Proc(env, cont.clone())),
                            Some(false) => {}
                            None => return Step::End(End::Stuck(format!("assumption {cond} is ⊥"))),
                        }
                        return Step::Move(sys, Event::Tau);
                    }
                    Process::Repl { counter, bound, body, cont } => {
                        for i in 1..=*bound {
                            let mut e = env.clone();
                            e.insert(counter.clone(), Some(Bits::from_u128(u128::from(i), 64)));
                            self.reduce(e, body, &mut sys.pool);
                        }
                        sys.active = Some(Member::Proc(env, cont.clone()));
                        return Step::Move(sys, Event::Tau);
                    }
                    Process::New { bits, .. } => {
                        let n = *bits;
                        sys.active = Some(Member::Proc(env, p));
                        return Step::Fresh(sys, n);
                    }
                    Process::Event { name, args, cont } => {
                        let Some(vals) = args.iter().map(|a| eval(&env, self.ops, a)).collect::<Option<Vec<_>>>() else {
                            return Step::End(End::Stuck(format!("event {name} has a ⊥ argument")));
                        };
                        sys.active = Some(Member::Proc(env, cont.clone()));
                        return Step::Move(sys, Event::Ev { name: name.clone(), args: vals });
                    }
                    Process::Out { chan, ids, payload, cont } => {
                        let ids: Option<Vec<Bits>> = ids.iter().map(|e| eval(&env, self.ops, e)).collect();
                        let (Some(ids), Some(payload)) = (ids, eval(&env, self.ops, payload)) else {
                            return Step::End(End::Stuck(format!("output on {chan} is ⊥")));
                        };
                        self.reduce(env, cont, &mut sys.pool);
                        return self.rendezvous(sys, chan, ids, payload);
                    }
                    Process::Run { pc, args, slot } => {
                        let Some(vals) = args.iter().map(|a| eval(&env, self.ops, a)).collect::<Option<Vec<_>>>() else {
                            return Step::End(End::Stuck(format!("run(@{pc}) has a ⊥ argument")));
                        };
                        match self.spawner.spawn(pc, &vals, *slot) {
                            Ok(a) => {
                                sys.active = Some(Member::Agent(a));
                                return Step::Move(sys, Event::Tau);
                            }
                            Err(e) => return Step::End(End::Error(e)),
                        }
                    }
                },
            }
        }
    }

    /// Completes a [`Step::Fresh`] with the drawn value.
    pub fn fresh<A: Agent>(&self, sys: &System<A>, value: &Bits) -> Result<(System<A>, Event), String> {
        let mut sys = sys.clone();
        match sys.active.take() {
            Some(Member::Proc(mut env, p)) => {
                let Process::New { var, bits, cont } = &*p else {
                    return Err("active process is not at `new`".into());
                };
                if value.len() != *bits {
                    return Err(format!("value of {} bits for fixed_{bits}", value.len()));
                }
                env.insert(var.clone(), Some(value.clone()));
                sys.active = Some(Member::Proc(env, cont.clone()));
                Ok((sys, Event::Fresh { value: value.clone(), index: None }))
            }
            Some(Member::Agent(a)) => {
                let (a, ev) = a.fresh(value)?;
                sys.active = Some(Member::Agent(a));
                Ok((sys, ev))
            }
            None => Err("no active member".into()),
        }
    }
}

/// Probability of one fresh draw.
pub fn fresh_prob(bits: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << bits)
}

/// A trace prefix with its per-step probabilities and random choices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Path {
    pub events: Vec<Event>,
    pub probs: Vec<BigRational>,
    pub choices: Vec<Bits>,
}

impl Path {
    /// Product of the step probabilities.
    pub fn pr(&self) -> BigRational {
        self.probs.iter().fold(BigRational::one(), |acc, p| acc * p)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn push(&mut self, ev: Event, p: BigRational) {
        self.events.push(ev);
        self.probs.push(p);
    }

    fn pop(&mut self) {
        self.events.pop();
        self.probs.pop();
    }
}

#[derive(Clone, Debug)]
pub struct Trace<A> {
    pub path: Path,
    pub end: End,
    pub last: System<A>,
}

#[derive(Clone, Copy, Debug)]
pub struct EnumConfig {
    /// Maximum number of labelled steps per trace.
    pub depth: usize,
    /// Widest `new` that is enumerated.
    pub max_fresh_bits: usize,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig { depth: 64, max_fresh_bits: 12 }
    }
}

/// Decision of a prefix visitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visit {
    Continue,
    /// Do not explore below this prefix.
    Prune,
}

impl<S> Engine<'_, S> {
    /// Depth-first exploration of every trace. `prefix` sees each new prefix and may
    /// prune; `leaf` receives each maximal (or cut-off) trace.
    pub fn explore<A: Agent>(
        &self,
        sys: &System<A>,
        cfg: EnumConfig,
        prefix: &mut dyn FnMut(&Path) -> Visit,
        leaf: &mut dyn FnMut(&Path, &End, &System<A>),
    ) where
        S: Spawner<A>,
    {
        let mut path = Path::default();
        self.dfs(sys, cfg, &mut path, prefix, leaf);
    }

    fn dfs<A: Agent>(
        &self,
        sys: &System<A>,
        cfg: EnumConfig,
        path: &mut Path,
        prefix: &mut dyn FnMut(&Path) -> Visit,
        leaf: &mut dyn FnMut(&Path, &End, &System<A>),
    ) where
        S: Spawner<A>,
    {
        if path.len() >= cfg.depth {
            leaf(path, &End::Depth, sys);
            return;
        }
        match self.step(sys) {
            Step::End(end) => leaf(path, &end, sys),
            Step::Move(next, ev) => self.descend(&next, ev, BigRational::one(), None, cfg, path, prefix, leaf),
            Step::Fresh(pending, n) => {
                if n > cfg.max_fresh_bits {
                    leaf(path, &End::Budget(format!("fixed_{n} exceeds the enumeration budget of {} bits", cfg.max_fresh_bits)), sys);
                    return;
                }
                let p = fresh_prob(n);
                for b in Bits::all_of_width(n) {
                    match self.fresh(&pending, &b) {
                        Ok((next, ev)) => self.descend(&next, ev, p.clone(), Some(b), cfg, path, prefix, leaf),
                        Err(e) => leaf(path, &End::Error(e), sys),
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn descend<A: Agent>(
        &self,
        next: &System<A>,
        ev: Event,
        p: BigRational,
        choice: Option<Bits>,
        cfg: EnumConfig,
        path: &mut Path,
        prefix: &mut dyn FnMut(&Path) -> Visit,
        leaf: &mut dyn FnMut(&Path, &End, &System<A>),
    ) where
        S: Spawner<A>,
    {
        path.push(ev, p);
        let chose = choice.is_some();
        if let Some(c) = choice {
            path.choices.push(c);
        }
        if prefix(path) == Visit::Continue {
            self.dfs(next, cfg, path, prefix, leaf);
        }
        if chose {
            path.choices.pop();
        }
        path.pop();
    }

    /// Every maximal trace up to the depth bound.
    pub fn enumerate<A: Agent>(&self, sys: &System<A>, cfg: EnumConfig) -> Vec<Trace<A>>
    where
        S: Spawner<A>,
    {
        let mut out = Vec::new();
        self.explore(sys, cfg, &mut |_| Visit::Continue, &mut |p, e, s| {
            out.push(Trace { path: p.clone(), end: e.clone(), last: s.clone() })
        });
        out
    }

    /// A single run where `choose(n)` supplies every random draw.
    pub fn run<A: Agent>(&self, sys: &System<A>, depth: usize, choose: &mut dyn FnMut(usize) -> Bits) -> Trace<A>
    where
        S: Spawner<A>,
    {
        let mut path = Path::default();
        let mut cur = sys.clone();
        loop {
            if path.len() >= depth {
                return Trace { path, end: End::Depth, last: cur };
            }
            match self.step(&cur) {
                Step::End(end) => return Trace { path, end, last: cur },
                Step::Move(next, ev) => {
                    path.push(ev, BigRational::one());
                    cur = next;
                }
                Step::Fresh(pending, n) => {
                    let b = choose(n);
                    match self.fresh(&pending, &b) {
                        Ok((next, ev)) => {
                            path.push(ev, fresh_prob(n));
                            path.choices.push(b);
                            cur = next;
                        }
                        Err(e) => return Trace { path, end: End::Error(e), last: cur },
                    }
                }
            }
        }
    }
}

/// Pure-IML engine with default settings.
pub fn pure(ops: &OpRegistry) -> Engine<'_, NoSpawn> {
    Engine::new(ops, NoSpawn)
}

/// Sum of trace probabilities.
pub fn total_pr<A>(traces: &[Trace<A>]) -> BigRational {
    traces.iter().fold(BigRational::from_integer(0.into()), |acc, t| acc + t.path.pr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iml::parse::parse_process;
    use crate::trace::observable;

    fn traces(src: &str) -> Vec<Trace<NoAgent>> {
        let ops = OpRegistry::default();
        pure(&ops).enumerate(&System::new(parse_process(src).unwrap()), EnumConfig::default())
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn nil_has_one_empty_trace() {
        let t = traces("0");
        assert_eq!(t.len(), 1);
        assert!(t[0].path.is_empty());
        assert_eq!(t[0].path.pr(), BigRational::one());
        assert_eq!(t[0].end, End::Done);
    }

    #[test]
    fn uniform_new() {
        let t = traces("new x: fixed_2; 0");
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|t| t.path.pr() == r(1, 4)));
        let t = traces("new x: fixed_3; 0");
        assert_eq!(t[0].path.pr(), r(1, 8));
    }

    #[test]
    fn independent_draws_multiply() {
        let t = traces("new x: fixed_2; new y: fixed_2; 0");
        assert_eq!(t.len(), 16);
        assert!(t.iter().all(|t| t.path.pr() == r(1, 16)));
        assert_eq!(total_pr(&t), BigRational::one());
    }

    #[test]
    fn selector_binds_value() {
        let ops = OpRegistry::default();
        let sys = System::new(parse_process("new x: fixed_2; event got(x); 0").unwrap());
        let t = pure(&ops).run(&sys, 10, &mut |_| Bits::parse("0b10").unwrap());
        assert_eq!(
            t.path.events,
            vec![
                Event::Fresh { value: Bits::parse("0b10").unwrap(), index: None },
                Event::Ev { name: "got".into(), args: vec![Bits::parse("0b10").unwrap()] }
            ]
        );
        assert_eq!(t.path.pr(), r(1, 4));
    }

    #[test]
    fn rendezvous_truncates_and_transfers_control() {
        let ops = OpRegistry::default();
        let mut e = pure(&ops);
        e.cfg.chan_maxlen.insert("c".into(), 4);
        let sys = System::new(parse_process("(in(c, y); event got(y); 0 | out(c, 0xab); 0)").unwrap());
        let t = e.run(&sys, 10, &mut |_| unreachable!());
        assert_eq!(
            observable(&t.path.events),
            vec![
                crate::trace::Obs::Msg("c".into(), vec![], Bits::parse("0xa").unwrap()),
                crate::trace::Obs::Ev("got".into(), vec![Bits::parse("0xa").unwrap()])
            ]
        );
        assert_eq!(t.end, End::Done);
    }

    #[test]
    fn xor_client_with_listener() {
        let src = "(in(c, z); 0 | new x: fixed_4; let a = conc1(x) in let b = exclusive_or(a, pad) in out(c, b); 0)";
        let ops = OpRegistry::default();
        let mut env = IEnv::new();
        env.insert("pad".into(), Some(Bits::parse("0x000").unwrap()));
        let sys: System<NoAgent> = System::with_env(env, parse_process(src).unwrap());
        let t = pure(&ops).enumerate(&sys, EnumConfig::default());
        assert_eq!(t.len(), 16);
        let kinds: Vec<String> = t[0].path.events.iter().map(|e| e.to_string().split('(').next().unwrap().to_string()).collect();
        assert_eq!(kinds, vec!["fr", "tau", "tau", "msg:c"]);
    }

    #[test]
    fn if_on_truth() {
        let t = traces("if (1:8 = 1:8) then (event a(); 0) else (event b(); 0)");
        assert_eq!(t[0].path.events, vec![Event::Tau, Event::Ev { name: "a".into(), args: vec![] }]);
    }

    #[test]
    fn stuck_and_ambiguous_outputs() {
        assert!(matches!(traces("out(c, 0x1); 0")[0].end, End::Stuck(_)));
        assert!(matches!(traces("(in(c, x); 0 | in(c, y); 0 | out(c, 0x1); 0)")[0].end, End::Error(_)));
        assert!(matches!(traces("if ⊥ then (0) else (0)")[0].end, End::Stuck(_)));
    }

    #[test]
    fn reduce_examples() {
        let ops = OpRegistry::default();
        let e = pure(&ops);
        let mut out: Vec<Member<NoAgent>> = Vec::new();
        e.reduce(IEnv::new(), &Arc::new(parse_process("(in(c, x); 0 | in(d, y); 0)").unwrap()), &mut out);
        assert_eq!(out.len(), 2);
        out.clear();
        e.reduce(IEnv::new(), &Arc::new(Process::Nil), &mut out);
        assert!(out.is_empty());
        e.reduce(IEnv::new(), &Arc::new(parse_process("let x = 5:8 in in(c, y); 0").unwrap()), &mut out);
        let Member::Proc(env, _) = &out[0] else { panic!() };
        assert_eq!(env["x"], Some(Bits::from_u128(5, 8)));
        // idempotent on its own output
        let mut again: Vec<Member<NoAgent>> = Vec::new();
        for m in out.clone() {
            let Member::Proc(env, p) = m;
            e.reduce(env, &p, &mut again);
        }
        assert_eq!(again.len(), out.len());
    }

    #[test]
    fn budget_is_flagged() {
        let t = traces("new x: fixed_40; 0");
        assert!(matches!(t[0].end, End::Budget(_)));
    }

    #[test]
    fn replication_spawns_copies() {
        let t = traces("(!^{i<=3} (event tick(i); 0); 0)");
        let ticks = t[0].path.events.iter().filter(|e| matches!(e, Event::Ev { .. })).count();
        assert_eq!(ticks, 3);
    }
}
