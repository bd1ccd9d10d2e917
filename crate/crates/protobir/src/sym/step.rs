//! Crypto-aware symbolic stepping: one block, or one atomic call, per step.

use super::exp::{self, bin, bitlen, cell, from_cells, ite, load_checked, not, store, Sort, SymExp, Value};
use super::solver::{check, resolve_indirect, target_is, SolveResult, Solver};
use crate::bir::env::{self, record_stride, region_of, CALL_CHUNK, CTR, HEAP, HEAP_A, HEAP_OP, MEM, MEM_A, MEM_OP, RECORD_BITS, RET};
use crate::bir::partition::{ChannelSpec, LabelKind};
use crate::bir::syntax::{BirExp, BirStmt, BirVal, Label, Ty};
use crate::bir::Program;
use crate::ops::OpRegistry;
use std::collections::BTreeMap;
use std::fmt;

pub type SymEnv = BTreeMap<String, SymExp>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SymError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("sort error: {0}")]
    Sort(String),
    #[error("load from unmapped cell {0:#x}")]
    LoadUnmapped(u64),
    #[error("no record at {0:#x}")]
    Unwritten(u64),
    #[error("cannot read back a record at {0:#x}: {1}")]
    Record(u64, String),
    #[error("region {0} exhausted")]
    RegionExhausted(String),
    #[error("payload of {0} bits exceeds the record slot")]
    PayloadTooLong(usize),
    #[error("random tape exhausted")]
    TapeExhausted,
    #[error("pointer is not concrete: {0}")]
    SymbolicPointer(String),
    #[error("no block or entry point at {0}")]
    UnknownLabel(Label),
    #[error("block {0} has no terminator")]
    NoTerminator(Label),
    #[error("unknown library operation `{0}`")]
    UnknownOp(String),
}

/// Deliberate mis-implementations, used to check that the differential checkers notice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Conditional jumps take the opposite branch.
    SwapBranches,
    /// RNG calls do not advance the tape counter.
    SkipCounter,
}

#[derive(Clone, Debug)]
pub struct SymConfig {
    /// Bits per RNG call.
    pub n: usize,
    /// Width of one tape word; an RNG call consumes `n / tape_width` words.
    pub tape_width: usize,
    /// Maximum RNG calls per run, if bounded.
    pub max_rng: Option<u64>,
    pub jump_cap: usize,
    /// Largest iteration count a loop summary may take.
    pub loop_cap: u64,
    pub fault: Option<Fault>,
}

impl Default for SymConfig {
    fn default() -> Self {
        SymConfig { n: 4, tape_width: 4, max_rng: None, jump_cap: 16, loop_cap: 64, fault: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymState {
    pub env: SymEnv,
    pub pc: Label,
    /// Path condition as a list of conjuncts.
    pub phi: Vec<SymExp>,
    /// Per-path counter for fresh symbol names.
    pub fresh: u64,
}

impl SymState {
    /// Concrete initial state mirroring [`crate::bir::BirEnv::initial`].
    pub fn initial(prog: &Program, pc: Label) -> SymState {
        let mut env = SymEnv::new();
        for i in 0..env::NUM_REGS {
            env.insert(env::reg(i), SymExp::word(0, 64));
        }
        env.insert(RET.into(), SymExp::label(Label::Addr(0)));
        env.insert(CTR.into(), SymExp::word(0, 64));
        for (mem, heap, base) in env::REGIONS {
            env.insert(mem.into(), SymExp::Mem(BTreeMap::new()));
            env.insert(heap.into(), SymExp::word(u128::from(base), 64));
        }
        for (name, ty) in &prog.decls {
            env.insert(name.clone(), zero_of(*ty));
        }
        SymState { env, pc, phi: Vec::new(), fresh: 0 }
    }

    /// State for a run at `pc` whose arguments are the symbols `params`, marshalled as
    /// call records with their addresses in R0, R1, ...
    pub fn start(prog: &Program, pc: Label, params: &[String]) -> Result<SymState, SymError> {
        let mut s = SymState::initial(prog, pc);
        if params.len() > env::NUM_REGS {
            return Err(SymError::Sort(format!("{} run arguments exceed the registers", params.len())));
        }
        for (i, p) in params.iter().enumerate() {
            let a = sym_mstore(&mut s, HEAP, MEM, SymExp::sym(p, Sort::Bits(None)), CALL_CHUNK)?;
            s.env.insert(env::reg(i), SymExp::word(u128::from(a), 64));
        }
        Ok(s)
    }

    /// Parameter names declared for a start label; none when undeclared.
    pub fn params_of(prog: &Program, pc: &Label) -> Vec<String> {
        prog.partition.starts.get(pc).map(|s| s.params.clone()).unwrap_or_default()
    }

    pub fn get(&self, v: &str) -> Result<&SymExp, SymError> {
        self.env.get(v).ok_or_else(|| SymError::Unbound(v.to_string()))
    }

    /// Canonical fresh name `<kind>_<pc>_<counter>`.
    pub fn fresh_name(&mut self, kind: &str) -> String {
        self.fresh += 1;
        format!("{kind}_{}_{}", self.pc, self.fresh)
    }

    pub fn assume(&mut self, c: SymExp) {
        if !c.is_true() && !self.phi.contains(&c) {
            self.phi.push(c);
        }
    }

    pub fn concrete_word(&self, v: &str) -> Result<u64, SymError> {
        let e = self.get(v)?;
        e.as_word().map(|w| w.value as u64).ok_or_else(|| SymError::SymbolicPointer(format!("{v} = {e}")))
    }
}

pub fn zero_of(ty: Ty) -> SymExp {
    match ty {
        Ty::Word(w) => SymExp::word(0, w),
        Ty::Label => SymExp::label(Label::Addr(0)),
        Ty::Mem => SymExp::Mem(BTreeMap::new()),
    }
}

pub fn const_of(v: &BirVal) -> SymExp {
    match v {
        BirVal::Word(w) => SymExp::Const(Value::Word(*w)),
        BirVal::Label(l) => SymExp::label(l.clone()),
        BirVal::Memory(m) => SymExp::Mem(m.iter().map(|(a, w)| (*a, SymExp::Const(Value::Word(*w)))).collect()),
    }
}

/// Symbolic counterpart of `eval_exp`; agrees with it on ground inputs.
pub fn sym_eval(env: &SymEnv, e: &BirExp) -> Result<SymExp, SymError> {
    Ok(match e {
        BirExp::Const(v) => const_of(v),
        BirExp::Var(v) => env.get(v).cloned().ok_or_else(|| SymError::Unbound(v.clone()))?,
        BirExp::Un(op, a) => exp::un(*op, sym_eval(env, a)?),
        BirExp::Bin(op, a, b) => bin(*op, sym_eval(env, a)?, sym_eval(env, b)?),
        BirExp::Ite(c, a, b) => ite(sym_eval(env, c)?, sym_eval(env, a)?, sym_eval(env, b)?),
        BirExp::Load(m, a, w) => load_checked(sym_eval(env, m)?, sym_eval(env, a)?, *w).map_err(SymError::LoadUnmapped)?,
        BirExp::Store(m, a, v, w) => store(sym_eval(env, m)?, sym_eval(env, a)?, sym_eval(env, v)?, *w),
    })
}

/// Writes a bitstring-valued expression as a record, mirroring the concrete `mstore`.
pub fn sym_mstore(s: &mut SymState, heap_var: &str, region: &str, b: SymExp, chunk: u8) -> Result<u64, SymError> {
    if let Sort::Bits(Some(n)) = b.sort() {
        if n > RECORD_BITS {
            return Err(SymError::PayloadTooLong(n));
        }
    }
    let base = env::REGIONS.iter().find(|(m, _, _)| *m == region).map(|(_, _, b)| *b).expect("known region");
    let addr = s.concrete_word(heap_var)?;
    let stride = record_stride(chunk);
    if addr < base || addr + stride > base + 0x1000_0000 {
        return Err(SymError::RegionExhausted(region.into()));
    }
    let SymExp::Mem(mut cells) = s.get(region)?.clone() else {
        return Err(SymError::Sort(format!("{region} has symbolic addresses")));
    };
    cells.insert(addr, bitlen(b.clone()));
    for i in 0..stride - 1 {
        cells.insert(addr + 1 + i, cell(b.clone(), i as usize, chunk));
    }
    s.env.insert(region.into(), SymExp::Mem(cells));
    s.env.insert(heap_var.into(), SymExp::word(u128::from(addr + stride), 64));
    Ok(addr)
}

/// Reads back a record. Succeeds when the length is concrete or the record was written
/// by [`sym_mstore`].
pub fn sym_mload(s: &SymState, addr: u64) -> Result<SymExp, SymError> {
    let region = region_of(addr).ok_or(SymError::Unwritten(addr))?;
    let SymExp::Mem(cells) = s.get(region)? else {
        return Err(SymError::Record(addr, format!("{region} has symbolic addresses")));
    };
    let len = cells.get(&addr).ok_or(SymError::Unwritten(addr))?;
    if let Some(l) = len.as_word() {
        if l.width != 128 || l.value > RECORD_BITS as u128 {
            return Err(SymError::Record(addr, "implausible length".into()));
        }
        let l = l.value as usize;
        if l == 0 {
            return Ok(SymExp::bits(crate::bits::Bits::empty()));
        }
        let first = cells.get(&(addr + 1)).ok_or(SymError::Unwritten(addr + 1))?;
        let Sort::Word(chunk) = first.sort() else {
            return Err(SymError::Record(addr, "cell is not a word".into()));
        };
        let mut cs = Vec::new();
        for i in 0..l.div_ceil(chunk as usize) as u64 {
            cs.push(cells.get(&(addr + 1 + i)).cloned().ok_or(SymError::Unwritten(addr + 1 + i))?);
        }
        return Ok(from_cells(cs, chunk, l));
    }
    if let SymExp::BitLen(b) = len {
        if let Some(SymExp::Cell(b2, 0, _)) = cells.get(&(addr + 1)) {
            if b2 == b {
                return Ok((**b).clone());
            }
        }
    }
    Err(SymError::Record(addr, format!("length {len} is symbolic")))
}

/// Symbolic transition labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymEvent {
    Tau,
    Fresh { var: String, bits: usize, index: u64 },
    Crypto { var: String, def: SymExp },
    Ev { name: String, args: Vec<SymExp> },
    Out { chan: String, ids: Vec<SymExp>, payload: SymExp },
    In { chan: String, ids: Vec<SymExp>, var: String },
    Loop { counter: String, count: u64 },
}

impl fmt::Display for SymEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[SymExp]| xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        match self {
            SymEvent::Tau => write!(f, "tau"),
            SymEvent::Fresh { var, bits, index } => write!(f, "fresh {var}: fixed_{bits} #{index}"),
            SymEvent::Crypto { var, def } => write!(f, "{var} = {def}"),
            SymEvent::Ev { name, args } => write!(f, "event {name}({})", list(args)),
            SymEvent::Out { chan, ids, payload } => write!(f, "out {chan}[{}] {payload}", list(ids)),
            SymEvent::In { chan, ids, var } => write!(f, "in {chan}[{}] {var}", list(ids)),
            SymEvent::Loop { counter, count } => write!(f, "loop {counter} = {count}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Continue,
    Halted,
    Failed(Label),
}

/// One symbolic successor. `decisions` lists the branch conditions taken inside the
/// step, in order, so the tree builder can nest them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor {
    pub state: SymState,
    pub event: SymEvent,
    pub decisions: Vec<(SymExp, bool)>,
    pub outcome: Outcome,
    /// Some feasibility check along the way was inconclusive.
    pub unknown: bool,
}

pub struct Stepper<'a> {
    pub prog: &'a Program,
    pub ops: &'a OpRegistry,
    pub cfg: &'a SymConfig,
    pub solver: &'a dyn Solver,
}

fn ret_label(s: &SymState) -> Result<Label, SymError> {
    match s.get(RET)?.as_const() {
        Some(Value::Label(l)) => Ok(l.clone()),
        _ => Err(SymError::Sort("RET is not a concrete label".into())),
    }
}

fn channel_ids(s: &SymState, spec: &ChannelSpec) -> Result<Vec<SymExp>, SymError> {
    spec.ids.iter().map(|v| s.get(v).cloned()).collect()
}

fn call_args(s: &SymState, arity: usize) -> Result<Vec<SymExp>, SymError> {
    (1..=arity).map(|i| sym_mload(s, s.concrete_word(&env::reg(i))?)).collect()
}

/// Partial path inside a block: state so far plus decisions taken.
struct Partial {
    state: SymState,
    decisions: Vec<(SymExp, bool)>,
    unknown: bool,
}

impl Stepper<'_> {
    fn feasible(&self, phi: &[SymExp], c: &SymExp) -> Option<bool> {
        match check(self.solver, phi, c) {
            SolveResult::Sat(_) => Some(true),
            SolveResult::Unsat => Some(false),
            SolveResult::Unknown(_) => None,
        }
    }

    /// Splits `p` on condition `c`. Returns the (then, else) partials that are not
    /// provably infeasible.
    fn split(&self, p: &Partial, c: &SymExp) -> (Option<Partial>, Option<Partial>) {
        if c.is_true() {
            return (Some(Partial { state: p.state.clone(), decisions: p.decisions.clone(), unknown: p.unknown }), None);
        }
        if c.is_false() {
            return (None, Some(Partial { state: p.state.clone(), decisions: p.decisions.clone(), unknown: p.unknown }));
        }
        let side = |cond: SymExp, val: bool| {
            let f = self.feasible(&p.state.phi, &cond);
            if f == Some(false) {
                return None;
            }
            let mut st = p.state.clone();
            st.assume(cond);
            let mut d = p.decisions.clone();
            d.push((c.clone(), val));
            Some(Partial { state: st, decisions: d, unknown: p.unknown || f.is_none() })
        };
        (side(c.clone(), true), side(not(c.clone()), false))
    }

    fn jump(&self, p: Partial, target: &SymExp, out: &mut Vec<Successor>) {
        let targets = resolve_indirect(self.solver, self.ops, &p.state.phi, target, self.cfg.jump_cap);
        let n = targets.labels.len();
        let mut rest = Some(p);
        for (i, l) in targets.labels.iter().enumerate() {
            let Some(cur) = rest.take() else { break };
            let last = i + 1 == n && targets.complete;
            if last {
                let mut st = cur.state;
                st.pc = l.clone();
                out.push(Successor { state: st, event: SymEvent::Tau, decisions: cur.decisions, outcome: Outcome::Continue, unknown: cur.unknown });
                break;
            }
            let (t, e) = self.split(&cur, &target_is(target, l));
            if let Some(t) = t {
                let mut st = t.state;
                st.pc = l.clone();
                out.push(Successor { state: st, event: SymEvent::Tau, decisions: t.decisions, outcome: Outcome::Continue, unknown: t.unknown || !targets.complete });
            }
            rest = e;
        }
    }

    fn normal(&self, s: &SymState) -> Result<Vec<Successor>, SymError> {
        let block = self.prog.block(&s.pc).ok_or_else(|| SymError::UnknownLabel(s.pc.clone()))?;
        let mut out = Vec::new();
        let mut cur = Partial { state: s.clone(), decisions: Vec::new(), unknown: false };
        for st in &block.stmts {
            match st {
                BirStmt::Assign(v, e) => {
                    let val = sym_eval(&cur.state.env, e)?;
                    cur.state.env.insert(v.clone(), val);
                }
                BirStmt::Assert(e) => {
                    let c = sym_eval(&cur.state.env, e)?;
                    let (t, f) = self.split(&cur, &c);
                    if let Some(f) = f {
                        out.push(Successor {
                            state: f.state,
                            event: SymEvent::Tau,
                            decisions: f.decisions,
                            outcome: Outcome::Failed(block.label.clone()),
                            unknown: f.unknown,
                        });
                    }
                    match t {
                        Some(t) => cur = t,
                        None => return Ok(out),
                    }
                }
                BirStmt::Halt => {
                    out.push(Successor { state: cur.state, event: SymEvent::Tau, decisions: cur.decisions, outcome: Outcome::Halted, unknown: cur.unknown });
                    return Ok(out);
                }
                BirStmt::Jmp(t) => {
                    let t = sym_eval(&cur.state.env, t)?;
                    self.jump(cur, &t, &mut out);
                    return Ok(out);
                }
                BirStmt::CJmp(c, a, b) => {
                    let mut c = sym_eval(&cur.state.env, c)?;
                    if self.cfg.fault == Some(Fault::SwapBranches) {
                        c = not(c);
                    }
                    let (a, b) = (sym_eval(&cur.state.env, a)?, sym_eval(&cur.state.env, b)?);
                    let (t, e) = self.split(&cur, &c);
                    for (side, target) in [(t, a), (e, b)] {
                        if let Some(p) = side {
                            self.jump(p, &target, &mut out);
                        }
                    }
                    return Ok(out);
                }
            }
        }
        Err(SymError::NoTerminator(block.label.clone()))
    }

    /// All symbolic successors of `s`.
    pub fn step(&self, s: &SymState) -> Result<Vec<Successor>, SymError> {
        let single = |state: SymState, event: SymEvent| {
            Ok(vec![Successor { state, event, decisions: Vec::new(), outcome: Outcome::Continue, unknown: false }])
        };
        match self.prog.partition.kind(&s.pc) {
            LabelKind::Normal => self.normal(s),
            LabelKind::Rng => {
                let w = self.cfg.tape_width.max(1);
                let l = (self.cfg.n / w).max(1) as u64;
                let ctr = s.concrete_word(CTR)?;
                if let Some(k) = self.cfg.max_rng {
                    if ctr + l > k * l {
                        return Err(SymError::TapeExhausted);
                    }
                }
                let mut st = s.clone();
                let var = st.fresh_name("x_r");
                let x = SymExp::sym(&var, Sort::Bits(Some(self.cfg.n)));
                let a = sym_mstore(&mut st, HEAP, MEM, x, CALL_CHUNK)?;
                st.env.insert(env::reg(0), SymExp::word(u128::from(a), 64));
                let bump = if self.cfg.fault == Some(Fault::SkipCounter) { 0 } else { l };
                st.env.insert(CTR.into(), SymExp::word(u128::from(ctr + bump), 64));
                st.pc = ret_label(s)?;
                single(st, SymEvent::Fresh { var, bits: self.cfg.n, index: ctr / l + 1 })
            }
            LabelKind::Op(name) => {
                let arity = self.ops.arity(name).map_err(|_| SymError::UnknownOp(name.to_string()))?;
                let args = call_args(s, arity)?;
                let mut st = s.clone();
                let var = st.fresh_name(name);
                let def = SymExp::App(name.to_string(), args);
                let a = sym_mstore(&mut st, HEAP_OP, MEM_OP, SymExp::sym(&var, Sort::Bits(None)), CALL_CHUNK)?;
                st.env.insert(env::reg(0), SymExp::word(u128::from(a), 64));
                st.pc = ret_label(s)?;
                single(st, SymEvent::Crypto { var, def })
            }
            LabelKind::Event(name, arity) => {
                let args = call_args(s, arity)?;
                let mut st = s.clone();
                st.pc = ret_label(s)?;
                single(st, SymEvent::Ev { name: name.to_string(), args })
            }
            LabelKind::Send(spec) => {
                let payload = sym_mload(s, s.concrete_word(&env::reg(0))?)?;
                let ids = channel_ids(s, spec)?;
                let mut st = s.clone();
                st.pc = ret_label(s)?;
                single(st, SymEvent::Out { chan: spec.chan.clone(), ids, payload })
            }
            LabelKind::Recv(spec) => {
                let ids = channel_ids(s, spec)?;
                let mut st = s.clone();
                let var = st.fresh_name("e_in");
                let a = sym_mstore(&mut st, HEAP_A, MEM_A, SymExp::sym(&var, Sort::Bits(None)), CALL_CHUNK)?;
                st.env.insert(env::reg(0), SymExp::word(u128::from(a), 64));
                st.pc = ret_label(s)?;
                single(st, SymEvent::In { chan: spec.chan.clone(), ids, var })
            }
        }
    }
}
