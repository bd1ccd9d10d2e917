//! Concrete BIR: syntax, parsing, evaluation, and the crypto-aware step relation.

pub mod env;
pub mod eval;
pub mod parse;
pub mod partition;
pub mod step;
pub mod syntax;

pub use env::{BirEnv, RandomTape};
pub use partition::{LabelKind, LabelPartition};
pub use step::{BirState, StepAction};
pub use syntax::{BinOp, BirExp, BirStmt, BirVal, Block, Label, Ty, UnOp, Word};

use crate::ops::OpError;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BirError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("load from unmapped cell {0:#x}")]
    LoadUnmapped(u64),
    #[error("no record at {0:#x}")]
    Unwritten(u64),
    #[error("implausible record length at {0:#x}")]
    ImplausibleLength(u64),
    #[error("region {0} exhausted")]
    RegionExhausted(String),
    #[error("chunk size {0} not allowed")]
    BadChunk(u8),
    #[error("payload of {0} bits exceeds the record slot")]
    PayloadTooLong(usize),
    #[error("random tape exhausted")]
    TapeExhausted,
    #[error("assertion failed in block {0}")]
    AssertFailed(Label),
    #[error("no block or entry point at {0}")]
    UnknownLabel(Label),
    #[error("receive on {0} blocked: needs a scheduler")]
    NeedsScheduler(String),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error("block {0} has no terminator")]
    NoTerminator(Label),
    #[error("{0}")]
    Other(String),
}

/// A parsed program with its label partition and cached loop classification.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub decls: BTreeMap<String, Ty>,
    pub blocks: Vec<Block>,
    pub partition: LabelPartition,
    index: BTreeMap<Label, usize>,
}

impl Program {
    pub fn new(decls: BTreeMap<String, Ty>, blocks: Vec<Block>, mut partition: LabelPartition) -> Result<Program, String> {
        let mut index = BTreeMap::new();
        for (i, b) in blocks.iter().enumerate() {
            if index.insert(b.label.clone(), i).is_some() {
                return Err(format!("duplicate label {}", b.label));
            }
        }
        let labels: BTreeSet<Label> = index.keys().cloned().collect();
        partition.finish(&labels).map_err(|e| e.to_string())?;
        for (l, exit) in &partition.exits {
            if !labels.contains(exit) && !partition.is_special(exit) {
                return Err(format!("exit {exit} of loop {l} is not a block"));
            }
        }
        Ok(Program { decls, blocks, partition, index })
    }

    pub fn block(&self, l: &Label) -> Option<&Block> {
        self.index.get(l).map(|i| &self.blocks[*i])
    }

    pub fn entry(&self) -> Option<&Label> {
        self.blocks.first().map(|b| &b.label)
    }

    /// True when `l` is either a block or an atomic-call entry point.
    pub fn resolves(&self, l: &Label) -> bool {
        self.index.contains_key(l) || self.partition.is_special(l)
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.index.keys()
    }

    /// Type of every variable, reserved ones included.
    pub fn var_types(&self) -> BTreeMap<String, Ty> {
        let mut m = reserved_types();
        m.extend(self.decls.iter().map(|(k, v)| (k.clone(), *v)));
        m
    }
}

pub fn reserved_types() -> BTreeMap<String, Ty> {
    let mut m = BTreeMap::new();
    for i in 0..env::NUM_REGS {
        m.insert(env::reg(i), Ty::Word(64));
    }
    m.insert(env::RET.into(), Ty::Label);
    m.insert(env::CTR.into(), Ty::Word(64));
    for (mem, heap, _) in env::REGIONS {
        m.insert(mem.into(), Ty::Mem);
        m.insert(heap.into(), Ty::Word(64));
    }
    m
}
