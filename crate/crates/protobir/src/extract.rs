//! Model extraction: execution trees become IML processes.

use crate::bir::syntax::{BinOp, UnOp};
use crate::iml::syntax::{IExp, Process};
use crate::sym::exp::Value;
use crate::sym::step::SymEvent;
use crate::sym::tree::{ExecTree, LeafKind};
use crate::sym::SymExp;
use crate::trace::label_bits;
use crate::bits::Bits;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("tree is truncated: {0}")]
    Truncated(String),
}

#[derive(Clone, Debug, Default)]
pub struct ExtractConfig {
    /// Replication bound for summarized loops; the recorded iteration count when unset.
    pub repl_bound: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub process: Process,
    /// Notes about untranslatable expressions and other oddities.
    pub diagnostics: Vec<String>,
}

pub fn infix_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::And => "∧",
        BinOp::Or => "∨",
        BinOp::Xor => "⊻",
        BinOp::Eq => "=",
        BinOp::Neq => "<>",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Shl => "<<",
        BinOp::Shr => ">>",
        BinOp::Plus => "+",
        BinOp::Minus => "-",
        BinOp::Mult => "*",
        BinOp::Div => "/",
        BinOp::Mod => "%",
    }
}

/// Ground value as an IML bitstring. Labels use their 64-bit encoding.
pub fn value_bits(v: &Value) -> Option<Bits> {
    match v {
        Value::Word(w) => Some(Bits::from_u128(w.value, usize::from(w.width))),
        Value::Label(l) => Some(label_bits(l)),
        Value::Bits(b) => Some(b.clone()),
        Value::Mem(_) => None,
    }
}

struct Ctx<'a> {
    cfg: &'a ExtractConfig,
    diagnostics: Vec<String>,
}

impl Ctx<'_> {
    fn note(&mut self, msg: String) {
        if !self.diagnostics.contains(&msg) {
            self.diagnostics.push(msg);
        }
    }

    fn exp(&mut self, e: &SymExp) -> IExp {
        let w = |v: usize, width: usize| IExp::word(v as u128, width);
        match e {
            SymExp::Const(v) => match value_bits(v) {
                Some(b) => IExp::Bits(b),
                None => {
                    self.note("memory constant has no IML counterpart; using ⊥".into());
                    IExp::Bot
                }
            },
            SymExp::Sym(n, _) => IExp::var(n),
            SymExp::Un(UnOp::Not, a) => IExp::app("¬", vec![self.exp(a)]),
            SymExp::Un(op, _) => {
                self.note(format!("unary `{}` has no IML counterpart; using ⊥", op.symbol()));
                IExp::Bot
            }
            SymExp::Bin(op, a, b) => IExp::bin(infix_symbol(*op), self.exp(a), self.exp(b)),
            SymExp::Ite(c, a, b) => IExp::app("ite", vec![self.exp(c), self.exp(a), self.exp(b)]),
            SymExp::Mem(_) => {
                self.note("symbolic memory has no IML counterpart; using ⊥".into());
                IExp::Bot
            }
            SymExp::Load(m, a, width) => {
                self.note("memory load survives in the model and evaluates to ⊥".into());
                IExp::app("load", vec![self.exp(m), self.exp(a), w(usize::from(*width), 8)])
            }
            SymExp::Store(m, a, v, width) => {
                self.note("memory store survives in the model and evaluates to ⊥".into());
                IExp::app("store", vec![self.exp(m), self.exp(a), self.exp(v), w(usize::from(*width), 8)])
            }
            SymExp::App(op, args) => IExp::App(op.clone(), args.iter().map(|a| self.exp(a)).collect()),
            SymExp::BitLen(b) => IExp::app("len", vec![self.exp(b)]),
            SymExp::Cell(b, idx, chunk) => IExp::app("read", vec![self.exp(b), w(*idx, 64), w(usize::from(*chunk), 8)]),
            SymExp::FromCells(cells, chunk, len) => {
                let mut args = vec![w(*len, 128), w(usize::from(*chunk), 8)];
                args.extend(cells.iter().map(|c| self.exp(c)));
                IExp::app("pack", args)
            }
            SymExp::Cast(x, width) => IExp::app("cast", vec![self.exp(x), w(usize::from(*width), 8)]),
            SymExp::Forall { .. } => {
                self.note("quantified loop condition has no IML counterpart; using ⊥".into());
                IExp::Bot
            }
        }
    }

    fn tree(&mut self, t: &ExecTree, under_branch: bool) -> Result<Process, ExtractError> {
        Ok(match t {
            ExecTree::Leaf(LeafKind::Halt | LeafKind::Failed(_)) => Process::Nil,
            ExecTree::Leaf(LeafKind::Error(e)) => {
                self.note(format!("error leaf ({e}) translated to 0"));
                Process::Nil
            }
            ExecTree::Leaf(LeafKind::Truncated(why)) => return Err(ExtractError::Truncated(why.clone())),
            ExecTree::Branch { cond, then, else_, .. } => {
                let c = self.exp(cond);
                let a = self.tree(then, true)?;
                Process::if_(c, a, self.tree(else_, true)?)
            }
            ExecTree::Node { pc, ev, child } => match ev {
                SymEvent::Tau => self.tree(child, under_branch)?,
                SymEvent::Fresh { var, bits, .. } => Process::new_(var, *bits, self.tree(child, under_branch)?),
                SymEvent::Crypto { var, def } => {
                    let d = self.exp(def);
                    Process::let_(var, d, self.tree(child, under_branch)?)
                }
                SymEvent::Ev { name, args } => {
                    let args = args.iter().map(|a| self.exp(a)).collect();
                    Process::event(name, args, self.tree(child, under_branch)?)
                }
                SymEvent::Out { chan, ids, payload } => {
                    let ids = ids.iter().map(|a| self.exp(a)).collect();
                    let p = self.exp(payload);
                    Process::output(chan, ids, p, self.tree(child, under_branch)?)
                }
                SymEvent::In { chan, ids, var } => {
                    let ids = ids.iter().map(|a| self.exp(a)).collect();
                    Process::input(chan, ids, var, self.tree(child, under_branch)?)
                }
                SymEvent::Loop { counter, count } => {
                    if under_branch {
                        self.note(format!("loop at {pc} sits under a branch; translated in place"));
                    }
                    let bound = self.cfg.repl_bound.unwrap_or(*count);
                    Process::repl(counter, bound, loop_proc(), self.tree(child, under_branch)?)
                }
            },
        })
    }
}

/// Process for the body of a summarized loop. Summarized loops contain no special
/// labels, so their bodies emit nothing.
pub fn loop_proc() -> Process {
    Process::Nil
}

/// Translates an execution tree.
pub fn tree_to_iml(t: &ExecTree, cfg: &ExtractConfig) -> Result<Extraction, ExtractError> {
    let mut ctx = Ctx { cfg, diagnostics: Vec::new() };
    let process = ctx.tree(t, false)?;
    Ok(Extraction { process, diagnostics: ctx.diagnostics })
}

/// Translates one expression, with diagnostics for the parts that became ⊥.
pub fn exp_to_iml(e: &SymExp) -> (IExp, Vec<String>) {
    let cfg = ExtractConfig::default();
    let mut ctx = Ctx { cfg: &cfg, diagnostics: Vec::new() };
    let x = ctx.exp(e);
    (x, ctx.diagnostics)
}

/// Wraps a translated program body so that its parameters are bound from `args`,
/// as a replacement for `run(@pc, args)`.
pub fn bind_params(params: &[String], args: &[IExp], body: Process) -> Process {
    params.iter().zip(args).rev().fold(body, |acc, (p, a)| Process::let_(p, a.clone(), acc))
}
