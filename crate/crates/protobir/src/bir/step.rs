//! Small-step semantics. A normal block executes as one step; atomic calls at
//! special labels execute as one step and return to the label held in `RET`.

use super::env::{self, mload, mstore, rng_read, BirEnv, CALL_CHUNK, HEAP_A, HEAP_OP, MEM_A, MEM_OP, RET};
use super::eval::eval_exp;
use super::partition::{ChannelSpec, LabelKind};
use super::syntax::{BirStmt, BirVal, Label, Word};
use super::{BirError, Program};
use crate::bits::Bits;
use crate::ops::OpRegistry;
use crate::trace::Event;
use std::collections::{BTreeMap, VecDeque};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BirState {
    pub env: BirEnv,
    pub pc: Label,
    pub halted: bool,
}

impl BirState {
    pub fn new(env: BirEnv, pc: Label) -> Self {
        BirState { env, pc, halted: false }
    }
}

impl BirState {
    /// State for a run at `pc`: arguments are marshalled into `Mem` and their
    /// addresses placed in R0, R1, ...
    pub fn start(prog: &Program, pc: Label, args: &[Bits], tape: env::RandomTape) -> Result<BirState, BirError> {
        let mut e = BirEnv::initial(&prog.decls, tape);
        if args.len() > env::NUM_REGS {
            return Err(BirError::Other(format!("{} run arguments exceed the registers", args.len())));
        }
        for (i, b) in args.iter().enumerate() {
            let (e2, a) = mstore(&e, env::HEAP, env::MEM, b, CALL_CHUNK)?;
            e = e2;
            e.set(&env::reg(i), BirVal::Word(Word::w64(a)));
        }
        Ok(BirState::new(e, pc))
    }
}

/// Static knobs of the concrete semantics.
#[derive(Clone, Debug)]
pub struct BirConfig {
    /// Security parameter: bits drawn per RNG call.
    pub n: usize,
}

impl Default for BirConfig {
    fn default() -> Self {
        BirConfig { n: 4 }
    }
}

/// What one step did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepAction {
    /// Normal block, RNG, library call or event function.
    Internal(Event),
    /// Attacker send: the state has already moved past the call.
    Send { chan: String, ids: Vec<Bits>, payload: Bits },
    /// Attacker receive: the state is unchanged until [`bir_receive`] delivers.
    Recv { chan: String, ids: Vec<Bits> },
    Halted,
}

/// Encodes a value for use as a channel identifier or message.
pub fn val_bits(v: &BirVal) -> Bits {
    match v {
        BirVal::Word(w) => Bits::from_u128(w.value, w.width as usize),
        BirVal::Label(l) => crate::trace::label_bits(l),
        BirVal::Memory(_) => Bits::empty(),
    }
}

pub fn channel_ids(env: &BirEnv, spec: &ChannelSpec) -> Result<Vec<Bits>, BirError> {
    spec.ids.iter().map(|v| env.get(v).map(val_bits)).collect()
}

fn ret_pc(env: &BirEnv) -> Result<Label, BirError> {
    match env.get(RET)? {
        BirVal::Label(l) => Ok(l.clone()),
        _ => Err(BirError::Type("RET does not hold a label".into())),
    }
}

fn reg_addr(env: &BirEnv, i: usize) -> Result<u64, BirError> {
    Ok(env.word(&env::reg(i))?.value as u64)
}

/// Loads the arguments of an `arity`-ary call from R1..R_arity.
pub fn call_args(env: &BirEnv, arity: usize) -> Result<Vec<Bits>, BirError> {
    (1..=arity).map(|i| mload(env, reg_addr(env, i)?)).collect()
}

/// Runs the statements of one normal block.
pub fn exec_block(prog: &Program, state: &BirState) -> Result<BirState, BirError> {
    let block = prog.block(&state.pc).ok_or_else(|| BirError::UnknownLabel(state.pc.clone()))?;
    let mut env = state.env.clone();
    for s in &block.stmts {
        match s {
            BirStmt::Assign(v, e) => {
                let val = eval_exp(&env, e)?;
                env.set(v, val);
            }
            BirStmt::Assert(e) => {
                if !matches!(eval_exp(&env, e)?, BirVal::Word(w) if w.is_true()) {
                    return Err(BirError::AssertFailed(block.label.clone()));
                }
            }
            BirStmt::Halt => return Ok(BirState { env, pc: state.pc.clone(), halted: true }),
            BirStmt::Jmp(t) => return Ok(BirState::new(env.clone(), as_label(eval_exp(&env, t)?)?)),
            BirStmt::CJmp(c, a, b) => {
                let c = eval_exp(&env, c)?;
                let target = match c {
                    BirVal::Word(w) if w.width == 1 => {
                        if w.value == 1 {
                            a
                        } else {
                            b
                        }
                    }
                    _ => return Err(BirError::Type("cjmp condition must be 1 bit".into())),
                };
                return Ok(BirState::new(env.clone(), as_label(eval_exp(&env, target)?)?));
            }
        }
    }
    Err(BirError::NoTerminator(block.label.clone()))
}

/// Jump targets are labels or 64-bit addresses.
pub fn as_label(v: BirVal) -> Result<Label, BirError> {
    match v {
        BirVal::Label(l) => Ok(l),
        BirVal::Word(w) if w.width == 64 => Ok(Label::Addr(w.value as u64)),
        _ => Err(BirError::Type("jump target is not a label".into())),
    }
}

/// One step of the program. Receives do not consume input here; see [`bir_receive`].
pub fn bir_step(prog: &Program, ops: &OpRegistry, cfg: &BirConfig, s: &BirState) -> Result<(BirState, StepAction), BirError> {
    if s.halted {
        return Ok((s.clone(), StepAction::Halted));
    }
    let env = &s.env;
    match prog.partition.kind(&s.pc) {
        LabelKind::Normal => {
            let next = exec_block(prog, s)?;
            Ok((next, StepAction::Internal(Event::Tau)))
        }
        LabelKind::Rng => {
            let (x, index, env1) = rng_read(env, cfg.n)?;
            let (mut env2, a) = mstore(&env1, env::HEAP, env::MEM, &x, CALL_CHUNK)?;
            env2.set(&env::reg(0), BirVal::Word(Word::w64(a)));
            let pc = ret_pc(env)?;
            Ok((BirState::new(env2, pc), StepAction::Internal(Event::Fresh { value: x, index: Some(index) })))
        }
        LabelKind::Op(name) => {
            let arity = ops.arity(name)?;
            let args = call_args(env, arity)?;
            let v = ops.apply(name, &args)?;
            let (mut env2, a) = mstore(env, HEAP_OP, MEM_OP, &v, CALL_CHUNK)?;
            env2.set(&env::reg(0), BirVal::Word(Word::w64(a)));
            Ok((BirState::new(env2, ret_pc(env)?), StepAction::Internal(Event::Crypto(v))))
        }
        LabelKind::Event(name, arity) => {
            let args = call_args(env, arity)?;
            let ev = Event::Ev { name: name.to_string(), args };
            Ok((BirState::new(env.clone(), ret_pc(env)?), StepAction::Internal(ev)))
        }
        LabelKind::Send(spec) => {
            let payload = mload(env, reg_addr(env, 0)?)?;
            let ids = channel_ids(env, spec)?;
            let next = BirState::new(env.clone(), ret_pc(env)?);
            Ok((next, StepAction::Send { chan: spec.chan.clone(), ids, payload }))
        }
        LabelKind::Recv(spec) => {
            let ids = channel_ids(env, spec)?;
            Ok((s.clone(), StepAction::Recv { chan: spec.chan.clone(), ids }))
        }
    }
}

/// Completes a receive: stores the payload in the attacker region and returns.
pub fn bir_receive(prog: &Program, s: &BirState, payload: &Bits) -> Result<(BirState, Event), BirError> {
    let LabelKind::Recv(spec) = prog.partition.kind(&s.pc) else {
        return Err(BirError::Other(format!("{} is not a receive entry", s.pc)));
    };
    let ids = channel_ids(&s.env, spec)?;
    let (mut env2, a) = mstore(&s.env, HEAP_A, MEM_A, payload, CALL_CHUNK)?;
    env2.set(&env::reg(0), BirVal::Word(Word::w64(a)));
    let ev = Event::In { chan: spec.chan.clone(), ids, payload: payload.clone() };
    Ok((BirState::new(env2, ret_pc(&s.env)?), ev))
}

/// FIFO queue per channel instance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChannelBank {
    queues: BTreeMap<(String, Vec<Bits>), VecDeque<Bits>>,
}

impl ChannelBank {
    pub fn push(&mut self, chan: &str, ids: &[Bits], m: Bits) {
        self.queues.entry((chan.to_string(), ids.to_vec())).or_default().push_back(m);
    }

    pub fn pop(&mut self, chan: &str, ids: &[Bits]) -> Option<Bits> {
        self.queues.get_mut(&(chan.to_string(), ids.to_vec()))?.pop_front()
    }

    pub fn pending(&self, chan: &str, ids: &[Bits]) -> usize {
        self.queues.get(&(chan.to_string(), ids.to_vec())).map_or(0, VecDeque::len)
    }
}

/// Step with channel queues: sends enqueue, receives dequeue or report that a scheduler is needed.
pub fn bir_step_chans(
    prog: &Program,
    ops: &OpRegistry,
    cfg: &BirConfig,
    s: &BirState,
    chans: &mut ChannelBank,
) -> Result<(BirState, Event), BirError> {
    let (next, act) = bir_step(prog, ops, cfg, s)?;
    match act {
        StepAction::Internal(ev) => Ok((next, ev)),
        StepAction::Halted => Ok((next, Event::Tau)),
        StepAction::Send { chan, ids, payload } => {
            chans.push(&chan, &ids, payload.clone());
            Ok((next, Event::Out { chan, ids, payload }))
        }
        StepAction::Recv { chan, ids } => match chans.pop(&chan, &ids) {
            Some(m) => bir_receive(prog, s, &m),
            None => Err(BirError::NeedsScheduler(chan)),
        },
    }
}

/// Supplies attacker input when a concrete run blocks on a receive.
pub trait Driver {
    fn provide(&mut self, chan: &str, ids: &[Bits]) -> Option<Bits>;
}

/// Feeds a fixed list of messages in order.
#[derive(Clone, Debug, Default)]
pub struct ScriptDriver {
    pub messages: VecDeque<Bits>,
}

impl ScriptDriver {
    pub fn new(messages: impl IntoIterator<Item = Bits>) -> Self {
        ScriptDriver { messages: messages.into_iter().collect() }
    }
}

impl Driver for ScriptDriver {
    fn provide(&mut self, _chan: &str, _ids: &[Bits]) -> Option<Bits> {
        self.messages.pop_front()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Halted,
    Error(BirError),
    StepBound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BirTrace {
    /// (pc the step started at, event)
    pub steps: Vec<(Label, Event)>,
    pub end: RunEnd,
    pub final_state: BirState,
}

impl BirTrace {
    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.steps.iter().map(|(_, e)| e)
    }
}

/// Runs to halt, error, or `max_steps`. Sends are recorded and kept in a channel bank;
/// receives are served from the bank first, then from the driver.
pub fn run_concrete(
    prog: &Program,
    ops: &OpRegistry,
    cfg: &BirConfig,
    s0: BirState,
    driver: &mut dyn Driver,
    max_steps: usize,
) -> BirTrace {
    let mut s = s0;
    let mut steps = Vec::new();
    let mut bank = ChannelBank::default();
    for _ in 0..max_steps {
        if s.halted {
            return BirTrace { steps, end: RunEnd::Halted, final_state: s };
        }
        let pc = s.pc.clone();
        let res = match bir_step(prog, ops, cfg, &s) {
            Ok((_, StepAction::Recv { chan, ids })) => {
                let msg = bank.pop(&chan, &ids).or_else(|| driver.provide(&chan, &ids));
                match msg {
                    Some(m) => bir_receive(prog, &s, &m),
                    None => Err(BirError::NeedsScheduler(chan)),
                }
            }
            Ok((next, StepAction::Send { chan, ids, payload })) => {
                bank.push(&chan, &ids, payload.clone());
                Ok((next, Event::Out { chan, ids, payload }))
            }
            Ok((next, StepAction::Internal(ev))) => Ok((next, ev)),
            Ok((next, StepAction::Halted)) => Ok((next, Event::Tau)),
            Err(e) => Err(e),
        };
        match res {
            Ok((next, ev)) => {
                steps.push((pc, ev));
                s = next;
            }
            Err(e) => return BirTrace { steps, end: RunEnd::Error(e), final_state: s },
        }
    }
    let end = if s.halted { RunEnd::Halted } else { RunEnd::StepBound };
    BirTrace { steps, end, final_state: s }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::env::RandomTape;
    use crate::bir::parse::parse_program;

    fn state(prog: &Program, tape: RandomTape) -> BirState {
        BirState::new(BirEnv::initial(&prog.decls, tape), prog.entry().unwrap().clone())
    }

    #[test]
    fn halt_program_has_one_silent_step() {
        let p = parse_program("block 0:\n  halt\n", "").unwrap();
        let t = run_concrete(&p, &OpRegistry::default(), &BirConfig::default(), state(&p, RandomTape::empty(4)), &mut ScriptDriver::default(), 10);
        assert_eq!(t.end, RunEnd::Halted);
        assert!(t.events().all(|e| *e == Event::Tau));
    }

    #[test]
    fn failing_assert_is_an_error() {
        let p = parse_program("block 0:\n  assert 0:1\n  halt\n", "").unwrap();
        let t = run_concrete(&p, &OpRegistry::default(), &BirConfig::default(), state(&p, RandomTape::empty(4)), &mut ScriptDriver::default(), 10);
        assert_eq!(t.end, RunEnd::Error(BirError::AssertFailed(Label::Addr(0))));
    }

    const CALLS: &str = "block 1:\n  RET := @2\n  jmp @500\n\
                         block 2:\n  R1 := R0\n  RET := @3\n  jmp @700\n\
                         block 3:\n  RET := @4\n  jmp @800\n\
                         block 4:\n  halt\n";
    const CALLS_PART: &str = "rng = [500]\n[events.mark]\nlabels = [700]\narity = 1\n\
                              [attacker_send.\"800\"]\nchan = \"c\"\n";

    #[test]
    fn event_call_leaves_env_and_send_enqueues() {
        let p = parse_program(CALLS, CALLS_PART).unwrap();
        let ops = OpRegistry::default();
        let cfg = BirConfig { n: 4 };
        let tape = RandomTape::new(4, vec![Bits::from_u128(9, 4)]);
        let mut s = state(&p, tape);
        let mut bank = ChannelBank::default();
        let mut evs = Vec::new();
        while !s.halted {
            let before = s.clone();
            let (next, ev) = bir_step_chans(&p, &ops, &cfg, &s, &mut bank).unwrap();
            if matches!(ev, Event::Ev { .. }) {
                assert_eq!(next.env, before.env);
            }
            evs.push(ev);
            s = next;
        }
        let x = Bits::from_u128(9, 4);
        assert!(evs.contains(&Event::Fresh { value: x.clone(), index: Some(1) }));
        assert!(evs.contains(&Event::Ev { name: "mark".into(), args: vec![x.clone()] }));
        assert_eq!(bank.pending("c", &[]), 1);
    }

    #[test]
    fn receive_without_message_needs_scheduler() {
        let p = parse_program("block 1:\n  RET := @2\n  jmp @900\nblock 2:\n  halt\n", "[attacker_recv.\"900\"]\nchan = \"c\"\n").unwrap();
        let ops = OpRegistry::default();
        let mut s = state(&p, RandomTape::empty(4));
        let mut bank = ChannelBank::default();
        s = bir_step_chans(&p, &ops, &BirConfig::default(), &s, &mut bank).unwrap().0;
        let err = bir_step_chans(&p, &ops, &BirConfig::default(), &s, &mut bank).unwrap_err();
        assert_eq!(err, BirError::NeedsScheduler("c".into()));
        bank.push("c", &[], Bits::parse("0xab").unwrap());
        let (s2, ev) = bir_step_chans(&p, &ops, &BirConfig::default(), &s, &mut bank).unwrap();
        assert!(matches!(ev, Event::In { .. }));
        assert_eq!(mload(&s2.env, s2.env.word("R0").unwrap().value as u64).unwrap().to_hex(), "0xab");
    }
}
