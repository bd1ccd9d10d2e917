//! Differential simulation checks between the concrete, symbolic and model layers.
//!
//! How `h` grows during a concrete/symbolic lockstep run, per step kind:
//!
//! | step at            | binding added                         |
//! |--------------------|---------------------------------------|
//! | normal block       | none                                  |
//! | RNG call           | fresh symbol to the concrete tape word |
//! | library call       | result symbol to the registry value   |
//! | event function     | none                                  |
//! | attacker send      | none                                  |
//! | attacker receive   | input symbol to the delivered payload |
//! | run                | start parameters to the arguments     |

use super::agents::{run_params, BirAgent, BirSpawner, SymAgent, SymSpawner};
use crate::bir::env::RandomTape;
use crate::bir::step::BirConfig;
use crate::bir::syntax::{BirVal, Label};
use crate::bir::Program;
use crate::bits::Bits;
use crate::extract::{bind_params, tree_to_iml, value_bits, ExtractConfig};
use crate::iml::engine::{pure, End, Engine, EnumConfig, Member, Step, System, Visit};
use crate::iml::{IEnv, Process};
use crate::ops::OpRegistry;
use crate::sym::exp::Value;
use crate::sym::interp::{holds, interpret};
use crate::sym::solver::Solver;
use crate::sym::step::{SymConfig, SymState};
use crate::sym::tree::{build_tree, ExecTree};
use crate::sym::Interpretation;
use crate::trace::{observable, Event};
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub step: usize,
    /// What the lower layer did.
    pub concrete: String,
    /// What the upper layer did.
    pub other: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub ok: bool,
    /// Steps (lockstep) or traces (enumeration) that were compared.
    pub checked: usize,
    pub witness: Option<Witness>,
    /// Final interpretation, keyed `run<slot>.<symbol>`, values in hex.
    pub h_final: BTreeMap<String, String>,
}

impl SimReport {
    fn pass(checked: usize, h_final: BTreeMap<String, String>) -> Self {
        SimReport { ok: true, checked, witness: None, h_final }
    }

    fn fail(checked: usize, w: Witness, h_final: BTreeMap<String, String>) -> Self {
        SimReport { ok: false, checked, witness: Some(w), h_final }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("ok: {}\nchecked: {}\n", self.ok, self.checked);
        if let Some(w) = &self.witness {
            s += &format!("witness.step: {}\nwitness.concrete: {}\nwitness.other: {}\nwitness.reason: {}\n", w.step, w.concrete, w.other, w.reason);
        }
        for (k, v) in &self.h_final {
            s += &format!("h.{k} = {v}\n");
        }
        s
    }
}

fn value_text(v: &Value) -> String {
    match value_bits(v) {
        Some(b) => b.to_hex(),
        None => format!("{v:?}"),
    }
}

fn concrete_value(v: &BirVal) -> Value {
    match v {
        BirVal::Word(w) => Value::Word(*w),
        BirVal::Label(l) => Value::Label(l.clone()),
        BirVal::Memory(m) => Value::Mem(m.clone()),
    }
}

/// Whether a concrete participant and a symbolic one are related through `h`: same pc,
/// every concrete variable equals the interpretation of its symbolic counterpart, and
/// the path condition holds.
pub fn related(h: &Interpretation, ops: &OpRegistry, c: &crate::bir::step::BirState, s: &SymState) -> Result<(), String> {
    if c.pc != s.pc {
        return Err(format!("pc {} vs {}", c.pc, s.pc));
    }
    for (name, cv) in &c.env.vars {
        let Some(se) = s.env.get(name) else {
            return Err(format!("{name} has no symbolic counterpart"));
        };
        match interpret(h, ops, se) {
            Ok(v) if v == concrete_value(cv) => {}
            Ok(v) => return Err(format!("{name}: concrete {:?} vs interpreted {}", cv, value_text(&v))),
            Err(e) => return Err(format!("{name}: {e}")),
        }
    }
    if let Some(c) = s.phi.iter().find(|c| !holds(h, ops, c)) {
        return Err(format!("path condition conjunct {c} is false"));
    }
    Ok(())
}

/// Simulation relation between a concrete and a symbolic mixed state. Members
/// correspond by position; program participants are related through their own
/// interpretation.
pub fn check_sim_state(ops: &OpRegistry, cb: &System<BirAgent>, cs: &System<SymAgent>) -> Result<(), String> {
    let (a, b): (Vec<_>, Vec<_>) = (cb.members().collect(), cs.members().collect());
    if a.len() != b.len() || cb.active.is_some() != cs.active.is_some() {
        return Err(format!("{} members vs {}", a.len(), b.len()));
    }
    for (i, (x, y)) in a.into_iter().zip(b).enumerate() {
        match (x, y) {
            (Member::Proc(e1, p1), Member::Proc(e2, p2)) => {
                if e1 != e2 || !(Arc::ptr_eq(p1, p2) || p1 == p2) {
                    return Err(format!("process member {i} differs"));
                }
            }
            (Member::Agent(c), Member::Agent(s)) => {
                if c.state.halted != s.halted {
                    return Err(format!("participant {i}: halted {} vs {}", c.state.halted, s.halted));
                }
                related(&s.h, ops, &c.state, &s.state).map_err(|e| format!("participant {i}: {e}"))?;
            }
            _ => return Err(format!("member {i} is a process on one side only")),
        }
    }
    Ok(())
}

/// Relation between a symbolic participant and the model process standing for it: the
/// model is the translation of the subtree at the participant's pc, and every model
/// variable the interpretation knows has the same value.
pub fn check_sim_iml(
    h: &Interpretation,
    s: &SymState,
    env: &IEnv,
    p: &Process,
    tree: &ExecTree,
) -> Result<bool, String> {
    let sub = tree.find(&s.pc).ok_or_else(|| format!("pc {} is not in the tree", s.pc))?;
    let want = tree_to_iml(sub, &ExtractConfig::default()).map_err(|e| e.to_string())?.process;
    if want.alpha_normal() != p.alpha_normal() {
        return Ok(false);
    }
    for (name, v) in env {
        if let (Some(hv), Some(b)) = (h.get(name), v) {
            if value_bits(hv).as_ref() != Some(b) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn collect_h(sys: &System<SymAgent>, acc: &mut BTreeMap<String, String>) -> Result<(), String> {
    for m in sys.members() {
        if let Member::Agent(a) = m {
            for (k, v) in a.h.iter() {
                let key = format!("run{}.{k}", a.slot);
                let val = value_text(v);
                match acc.get(&key) {
                    Some(old) if *old != val => return Err(format!("{key} rebound from {old} to {val}")),
                    Some(_) => {}
                    None => {
                        acc.insert(key, val);
                    }
                }
            }
        }
    }
    Ok(())
}

fn describe<A>(s: &Step<A>) -> String {
    match s {
        Step::Move(_, ev) => ev.to_string(),
        Step::Fresh(_, n) => format!("draw {n} bits"),
        Step::End(e) => format!("end {e:?}"),
    }
}

fn same_end(a: &End, b: &End) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// Settings shared by the differential runs.
#[derive(Clone, Debug)]
pub struct DiffConfig {
    pub sym: SymConfig,
    /// Maximum number of lockstep steps or enumerated events.
    pub depth: usize,
    /// Depth of the execution trees used for the model side.
    pub tree_depth: usize,
    pub max_fresh_bits: usize,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig { sym: SymConfig::default(), depth: 64, tree_depth: 64, max_fresh_bits: 8 }
    }
}

/// Runs `system` with concrete participants on `tapes` (one per run site) and mirrors
/// every step with symbolic participants, checking the simulation relation throughout.
/// Model-level `new` draws come from `seed` and are shared by both sides.
pub fn differential_run_bir_sbir(
    prog: &Program,
    ops: &OpRegistry,
    solver: &dyn Solver,
    system: &Process,
    tapes: &[RandomTape],
    cfg: &DiffConfig,
    seed: u64,
) -> SimReport {
    let loop_cap = cfg.sym.loop_cap;
    let bir_cfg = BirConfig { n: cfg.sym.n };
    let eb = Engine::new(ops, BirSpawner { prog, ops, cfg: bir_cfg, loop_cap, tapes: tapes.to_vec() });
    let es = Engine::new(ops, SymSpawner { loop_cap, ..SymSpawner::new(prog, ops, &cfg.sym, solver) });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cb: System<BirAgent> = System::new(system.clone());
    let mut cs: System<SymAgent> = System::new(system.clone());
    let mut h_acc = BTreeMap::new();
    for step in 0..cfg.depth {
        let (sb, ss) = (eb.step(&cb), es.step(&cs));
        let fail = |h: &BTreeMap<String, String>, reason: String| {
            SimReport::fail(step, Witness { step, concrete: describe(&sb), other: describe(&ss), reason }, h.clone())
        };
        let (nb, ns, evb, evs) = match (&sb, &ss) {
            (Step::End(x), Step::End(y)) => {
                if same_end(x, y) {
                    return SimReport::pass(step, h_acc);
                }
                return fail(&h_acc, "runs end differently".into());
            }
            (Step::Move(nb, evb), Step::Move(ns, evs)) => (nb.clone(), ns.clone(), evb.clone(), evs.clone()),
            (Step::Move(nb, evb @ Event::Fresh { value, .. }), Step::Fresh(ps, n)) => {
                if value.len() != *n {
                    return fail(&h_acc, "draw widths differ".into());
                }
                match es.fresh(ps, value) {
                    Ok((ns, evs)) => (nb.clone(), ns, evb.clone(), evs),
                    Err(e) => return fail(&h_acc, e),
                }
            }
            (Step::Fresh(pb, n), Step::Fresh(ps, m)) if n == m => {
                let v = Bits::from_bools((0..*n).map(|_| rng.gen()).collect());
                match (eb.fresh(pb, &v), es.fresh(ps, &v)) {
                    (Ok((nb, evb)), Ok((ns, evs))) => (nb, ns, evb, evs),
                    (Err(e), _) | (_, Err(e)) => return fail(&h_acc, e),
                }
            }
            _ => return fail(&h_acc, "step kinds differ".into()),
        };
        if evb != evs {
            return fail(&h_acc, "events differ".into());
        }
        if let Err(e) = check_sim_state(ops, &nb, &ns) {
            return fail(&h_acc, e);
        }
        if let Err(e) = collect_h(&ns, &mut h_acc) {
            return fail(&h_acc, e);
        }
        cb = nb;
        cs = ns;
    }
    SimReport::pass(cfg.depth, h_acc)
}

/// Concrete-only mixed run, for the CLI and for insecurity over tapes.
pub fn bir_engine<'a>(prog: &'a Program, ops: &'a OpRegistry, n: usize, loop_cap: u64, tapes: Vec<RandomTape>) -> Engine<'a, BirSpawner<'a>> {
    Engine::new(ops, BirSpawner { prog, ops, cfg: BirConfig { n }, loop_cap, tapes })
}

/// Run sites of `p` with their targets and argument counts, in slot order.
pub fn run_sites(p: &Process) -> Vec<(usize, Label, usize)> {
    let mut out = Vec::new();
    fn go(p: &Process, out: &mut Vec<(usize, Label, usize)>) {
        match p {
            Process::Nil => {}
            Process::Par(a, b) => {
                go(a, out);
                go(b, out);
            }
            Process::Repl { body, cont, .. } => {
                go(body, out);
                go(cont, out);
            }
            Process::If { then, else_, .. } => {
                go(then, out);
                go(else_, out);
            }
            Process::New { cont, .. }
            | Process::In { cont, .. }
            | Process::Out { cont, .. }
            | Process::Event { cont, .. }
            | Process::Let { cont, .. }
            | Process::Assume { cont, .. } => go(cont, out),
            Process::Run { pc, args, slot } => out.push((*slot, pc.clone(), args.len())),
        }
    }
    go(p, &mut out);
    out.sort_by_key(|(s, _, _)| *s);
    out
}

/// Models for every program started by `system`, one per distinct start label.
pub fn extract_runs(
    prog: &Program,
    ops: &OpRegistry,
    solver: &dyn Solver,
    system: &Process,
    sym: &SymConfig,
    tree_depth: usize,
) -> Result<BTreeMap<Label, (Vec<String>, Process)>, String> {
    let mut out = BTreeMap::new();
    for (_, pc, argc) in run_sites(system) {
        if out.contains_key(&pc) {
            continue;
        }
        let params = run_params(prog, &pc, argc)?;
        let s0 = SymState::start(prog, pc.clone(), &params).map_err(|e| e.to_string())?;
        let built = build_tree(prog, ops, sym, solver, s0, tree_depth);
        let x = tree_to_iml(&built.tree, &ExtractConfig::default()).map_err(|e| format!("run(@{pc}): {e}"))?;
        out.insert(pc, (params, x.process));
    }
    Ok(out)
}

/// Replaces every `run(@pc, args)` by the model of the program at `pc` with its
/// parameters bound to `args`.
pub fn inline_runs(p: &Process, models: &BTreeMap<Label, (Vec<String>, Process)>) -> Result<Process, String> {
    let r = |q: &Arc<Process>| inline_runs(q, models).map(Arc::new);
    Ok(match p {
        Process::Nil => Process::Nil,
        Process::Par(a, b) => Process::Par(r(a)?, r(b)?),
        Process::Repl { counter, bound, body, cont } => {
            Process::Repl { counter: counter.clone(), bound: *bound, body: r(body)?, cont: r(cont)? }
        }
        Process::New { var, bits, cont } => Process::New { var: var.clone(), bits: *bits, cont: r(cont)? },
        Process::In { chan, ids, var, cont } => Process::In { chan: chan.clone(), ids: ids.clone(), var: var.clone(), cont: r(cont)? },
        Process::Out { chan, ids, payload, cont } => {
            Process::Out { chan: chan.clone(), ids: ids.clone(), payload: payload.clone(), cont: r(cont)? }
        }
        Process::Event { name, args, cont } => Process::Event { name: name.clone(), args: args.clone(), cont: r(cont)? },
        Process::If { cond, then, else_ } => Process::If { cond: cond.clone(), then: r(then)?, else_: r(else_)? },
        Process::Let { var, exp, cont } => Process::Let { var: var.clone(), exp: exp.clone(), cont: r(cont)? },
        Process::Assume { cond, cont } => Process::Assume { cond: cond.clone(), cont: r(cont)? },
        Process::Run { pc, args, .. } => {
            let (params, body) = models.get(pc).ok_or_else(|| format!("no model for run(@{pc})"))?;
            if body.has_run() {
                return Err(format!("model of @{pc} contains a run"));
            }
            bind_params(params, args, body.clone())
        }
    })
}

fn fresh_bits(events: &[Event]) -> (usize, usize) {
    events.iter().fold((0, 0), |(n, w), e| match e {
        Event::Fresh { value, .. } => (n + 1, w + value.len()),
        _ => (n, w),
    })
}

/// Enumerates every trace of `system` with symbolic participants and replays each one
/// in the pure model where every `run` is replaced by its extracted model, checking
/// equal observable events, equal draw counts and equal probabilities.
pub fn differential_run_sbir_iml(prog: &Program, ops: &OpRegistry, solver: &dyn Solver, system: &Process, cfg: &DiffConfig) -> SimReport {
    let witness = |reason: String| Witness { step: 0, concrete: String::new(), other: String::new(), reason };
    let models = match extract_runs(prog, ops, solver, system, &cfg.sym, cfg.tree_depth) {
        Ok(m) => m,
        Err(e) => return SimReport::fail(0, witness(e), BTreeMap::new()),
    };
    let model = match inline_runs(system, &models) {
        Ok(m) => m,
        Err(e) => return SimReport::fail(0, witness(e), BTreeMap::new()),
    };
    let es = Engine::new(ops, SymSpawner::new(prog, ops, &cfg.sym, solver));
    let ei = pure(ops);
    let enum_cfg = EnumConfig { depth: cfg.depth, max_fresh_bits: cfg.max_fresh_bits };
    let model_sys: System<crate::iml::NoAgent> = System::new(model);
    // model-side Tau steps (lets, ifs) are not mirrored one-for-one, so give it room
    let model_depth = cfg.depth * 8 + 64;
    let mut checked = 0;
    let mut failure: Option<Witness> = None;
    let mut h_final = BTreeMap::new();
    let stop = std::cell::Cell::new(false);
    let mut prefix = |_: &crate::iml::Path| if stop.get() { Visit::Prune } else { Visit::Continue };
    es.explore(&System::<SymAgent>::new(system.clone()), enum_cfg, &mut prefix, &mut |path, end, last| {
        if failure.is_some() {
            return;
        }
        checked += 1;
        let mut choices = path.choices.iter();
        let replay = ei.run(&model_sys, model_depth, &mut |n| choices.next().cloned().unwrap_or_else(|| Bits::zeros(n)));
        let (os, oi) = (observable(&path.events), observable(&replay.path.events));
        let partial = end.is_partial();
        let mismatch = if partial {
            (!oi.starts_with(&os)).then(|| "model trace does not extend the cut-off trace".to_string())
        } else if os != oi {
            Some("observable events differ".into())
        } else if replay.end.is_partial() {
            Some("model replay was cut off".into())
        } else {
            let (fs, ws) = fresh_bits(&path.events);
            let (fi, wi) = fresh_bits(&replay.path.events);
            let expected = BigRational::new(BigRational::one().numer().clone(), num_bigint::BigInt::one() << wi);
            if fs != fi {
                Some(format!("{fs} draws vs {fi}"))
            } else if ws != wi || path.pr() != replay.path.pr() {
                Some(format!("probability {} vs {}", path.pr(), replay.path.pr()))
            } else if replay.path.pr() != expected {
                Some(format!("model probability {} is not 2^-{wi}", replay.path.pr()))
            } else if !same_end(end, &replay.end) && !matches!((end, &replay.end), (End::Done, End::Stuck(_)) | (End::Stuck(_), End::Done)) {
                Some(format!("ends differ: {end:?} vs {:?}", replay.end))
            } else {
                None
            }
        };
        match mismatch {
            Some(reason) => {
                stop.set(true);
                failure = Some(Witness {
                    step: checked - 1,
                    concrete: crate::trace::dump_plain(&path.events),
                    other: crate::trace::dump_plain(&replay.path.events),
                    reason,
                })
            }
            None => {
                let _ = collect_h(last, &mut h_final);
            }
        }
    });
    match failure {
        Some(w) => SimReport::fail(checked, w, h_final),
        None => SimReport::pass(checked, h_final),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::parse::parse_program;
    use crate::iml::parse_process;
    use crate::sym::solver::EnumSolver;
    use crate::sym::Fault;

    const RNG_EVENT: &str = "\
block 100:
  RET := @101
  jmp @9000
block 101:
  R1 := R0
  RET := @102
  jmp @8000
block 102:
  halt
";
    const RNG_EVENT_PART: &str = "rng = [9000]\n[events.seen]\nlabels = [8000]\narity = 1\n[starts.100]\nparams = []\n";

    fn prog(text: &str, part: &str) -> Program {
        parse_program(text, part).unwrap()
    }

    fn cfg() -> DiffConfig {
        DiffConfig { sym: SymConfig { n: 4, tape_width: 4, max_rng: Some(2), ..SymConfig::default() }, ..DiffConfig::default() }
    }

    #[test]
    fn lockstep_rng_and_event() {
        let p = prog(RNG_EVENT, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let sys = parse_process("run(@100, ())").unwrap();
        let tape = RandomTape::new(4, vec![Bits::from_u128(9, 4), Bits::from_u128(3, 4)]);
        let r = differential_run_bir_sbir(&p, &ops, &EnumSolver::default(), &sys, &[tape], &cfg(), 1);
        assert!(r.ok, "{}", r.to_text());
        assert!(r.h_final.values().any(|v| v == "0x9" || v == "0b1001"), "{:?}", r.h_final);
    }

    #[test]
    fn sbir_vs_model_rng_and_event() {
        let p = prog(RNG_EVENT, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let sys = parse_process("run(@100, ())").unwrap();
        let r = differential_run_sbir_iml(&p, &ops, &EnumSolver::default(), &sys, &cfg());
        assert!(r.ok, "{}", r.to_text());
        assert_eq!(r.checked, 16);
    }

    const BRANCHY: &str = "\
var b: 1
block 100:
  RET := @101
  jmp @9000
block 101:
  b := (load(Mem, (R0 + 1:64), 128) < 8:128)
  cjmp b, @102, @103
block 102:
  R1 := R0
  RET := @103
  jmp @8000
block 103:
  halt
";

    #[test]
    fn swapped_branches_are_caught() {
        let p = prog(BRANCHY, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let sys = parse_process("run(@100, ())").unwrap();
        let tape = RandomTape::new(4, vec![Bits::from_u128(2, 4)]);
        let good = differential_run_bir_sbir(&p, &ops, &EnumSolver::default(), &sys, std::slice::from_ref(&tape), &cfg(), 1);
        assert!(good.ok, "{}", good.to_text());
        assert!(good.checked >= 5, "{}", good.to_text());
        let mut bad_cfg = cfg();
        bad_cfg.sym.fault = Some(Fault::SwapBranches);
        let bad = differential_run_bir_sbir(&p, &ops, &EnumSolver::default(), &sys, &[tape], &bad_cfg, 1);
        assert!(!bad.ok, "{}", bad.to_text());
        assert!(bad.witness.is_some());
    }

    #[test]
    fn one_branch_gives_matched_paths() {
        let p = prog(BRANCHY, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let sys = parse_process("run(@100, ())").unwrap();
        let r = differential_run_sbir_iml(&p, &ops, &EnumSolver::default(), &sys, &cfg());
        assert!(r.ok, "{}", r.to_text());
        assert_eq!(r.checked, 16);
    }

    #[test]
    fn empty_system() {
        let p = prog(RNG_EVENT, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let r = differential_run_sbir_iml(&p, &ops, &EnumSolver::default(), &Process::Nil, &cfg());
        assert!(r.ok);
        assert_eq!(r.checked, 1);
    }

    #[test]
    fn model_relation_at_start() {
        let p = prog(RNG_EVENT, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let c = cfg();
        let s0 = SymState::start(&p, Label::Addr(100), &[]).unwrap();
        let t = build_tree(&p, &ops, &c.sym, &EnumSolver::default(), s0.clone(), 32).tree;
        let model = tree_to_iml(&t, &ExtractConfig::default()).unwrap().process;
        assert!(check_sim_iml(&Interpretation::new(), &s0, &IEnv::new(), &model, &t).unwrap());
        assert!(!check_sim_iml(&Interpretation::new(), &s0, &IEnv::new(), &Process::Nil, &t).unwrap());
    }

    #[test]
    fn mismatched_pc_is_unrelated() {
        let p = prog(RNG_EVENT, RNG_EVENT_PART);
        let ops = OpRegistry::default();
        let c = crate::bir::step::BirState::start(&p, Label::Addr(100), &[], RandomTape::empty(4)).unwrap();
        let mut s = SymState::start(&p, Label::Addr(100), &[]).unwrap();
        assert!(related(&Interpretation::new(), &ops, &c, &s).is_ok());
        s.pc = Label::Addr(101);
        assert!(related(&Interpretation::new(), &ops, &c, &s).is_err());
    }
}
