//! Concrete environments, the random tape, and bitstring marshalling into memory.

use super::syntax::{valid_width, BirVal, Label, Memory, Ty, Word};
use super::BirError;
use crate::bits::Bits;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

pub const MEM: &str = "Mem";
pub const MEM_OP: &str = "Mem_Op";
pub const MEM_A: &str = "Mem_A";
pub const HEAP: &str = "heap";
pub const HEAP_OP: &str = "heap_Op";
pub const HEAP_A: &str = "heap_A";
pub const CTR: &str = "ctr";
/// Shadow return register holding the call-site continuation.
pub const RET: &str = "RET";
pub const NUM_REGS: usize = 8;

/// Largest payload, in bits, that one marshalled record may hold.
pub const RECORD_BITS: usize = 1024;
/// Chunk size used by the atomic calls.
pub const CALL_CHUNK: u8 = 128;

const REGION_SIZE: u64 = 0x1000_0000;

pub fn reg(i: usize) -> String {
    format!("R{i}")
}

/// (memory variable, heap cursor variable, base address)
pub const REGIONS: [(&str, &str, u64); 3] = [
    (MEM, HEAP, 0x1000_0000),
    (MEM_OP, HEAP_OP, 0x2000_0000),
    (MEM_A, HEAP_A, 0x3000_0000),
];

pub fn region_of(addr: u64) -> Option<&'static str> {
    REGIONS
        .iter()
        .find(|(_, _, base)| addr >= *base && addr < base + REGION_SIZE)
        .map(|(m, _, _)| *m)
}

fn region_base(mem: &str) -> Option<u64> {
    REGIONS.iter().find(|(m, _, _)| *m == mem).map(|(_, _, b)| *b)
}

/// Cells occupied by one record: the length word plus a fixed payload slot.
pub fn record_stride(chunk: u8) -> u64 {
    1 + RECORD_BITS.div_ceil(chunk as usize) as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomTape {
    /// Width w of one tape word; a read of n bits consumes n / w words.
    pub word_width: usize,
    pub words: Vec<Bits>,
}

impl RandomTape {
    pub fn new(word_width: usize, words: Vec<Bits>) -> Self {
        debug_assert!(words.iter().all(|w| w.len() == word_width));
        RandomTape { word_width, words }
    }

    pub fn empty(word_width: usize) -> Self {
        RandomTape { word_width, words: Vec::new() }
    }

    /// Every tape of `count` words of width `w`, in numeric order.
    pub fn all(w: usize, count: usize) -> Vec<RandomTape> {
        let total = w * count;
        Bits::all_of_width(total)
            .map(|b| RandomTape::new(w, (0..count).map(|i| b.slice(i * w, w)).collect()))
            .collect()
    }

    /// Parses whitespace- or line-separated `0x`/`0b` words.
    pub fn parse(text: &str) -> Option<RandomTape> {
        let words: Vec<Bits> = text.split_whitespace().map(Bits::parse).collect::<Option<_>>()?;
        let w = words.first().map_or(1, Bits::len);
        if words.iter().any(|x| x.len() != w) {
            return None;
        }
        Some(RandomTape::new(w, words))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BirEnv {
    pub vars: BTreeMap<String, BirVal>,
    pub tape: Arc<RandomTape>,
}

impl BirEnv {
    /// Registers, regions and cursors at their initial values, plus declared variables at zero.
    pub fn initial(decls: &BTreeMap<String, Ty>, tape: RandomTape) -> BirEnv {
        let mut vars = BTreeMap::new();
        for i in 0..NUM_REGS {
            vars.insert(reg(i), BirVal::Word(Word::w64(0)));
        }
        vars.insert(RET.to_string(), BirVal::Label(Label::Addr(0)));
        vars.insert(CTR.to_string(), BirVal::Word(Word::w64(0)));
        for (mem, heap, base) in REGIONS {
            vars.insert(mem.to_string(), BirVal::Memory(Memory::new()));
            vars.insert(heap.to_string(), BirVal::Word(Word::w64(base)));
        }
        for (name, ty) in decls {
            vars.insert(name.clone(), zero_of(*ty));
        }
        BirEnv { vars, tape: Arc::new(tape) }
    }

    pub fn get(&self, name: &str) -> Result<&BirVal, BirError> {
        self.vars.get(name).ok_or_else(|| BirError::Unbound(name.to_string()))
    }

    pub fn word(&self, name: &str) -> Result<Word, BirError> {
        match self.get(name)? {
            BirVal::Word(w) => Ok(*w),
            other => Err(BirError::Type(format!("{name} holds {:?}, expected a word", other.ty()))),
        }
    }

    pub fn memory(&self, name: &str) -> Result<&Memory, BirError> {
        match self.get(name)? {
            BirVal::Memory(m) => Ok(m),
            _ => Err(BirError::Type(format!("{name} is not a memory"))),
        }
    }

    pub fn set(&mut self, name: &str, v: BirVal) {
        self.vars.insert(name.to_string(), v);
    }

    pub fn ctr(&self) -> u64 {
        self.word(CTR).map(|w| w.value as u64).unwrap_or(0)
    }
}

pub fn zero_of(ty: Ty) -> BirVal {
    match ty {
        Ty::Word(w) => BirVal::Word(Word::new(0, w)),
        Ty::Label => BirVal::Label(Label::Addr(0)),
        Ty::Mem => BirVal::Memory(Memory::new()),
    }
}

/// Writes `b` as a record at the cursor held in `heap_var`: one 128-bit word with the
/// bit length of `b`, then a fixed slot of `chunk`-bit cells (zero padded). Returns the
/// record address, which is the cursor before the call.
pub fn mstore(env: &BirEnv, heap_var: &str, region: &str, b: &Bits, chunk: u8) -> Result<(BirEnv, u64), BirError> {
    if !valid_width(chunk) {
        return Err(BirError::BadChunk(chunk));
    }
    if b.len() > RECORD_BITS {
        return Err(BirError::PayloadTooLong(b.len()));
    }
    let base = region_base(region).ok_or_else(|| BirError::Type(format!("{region} is not a region")))?;
    let addr = env.word(heap_var)?.value as u64;
    let stride = record_stride(chunk);
    if addr < base || addr + stride > base + REGION_SIZE {
        return Err(BirError::RegionExhausted(region.to_string()));
    }
    let mut mem = env.memory(region)?.clone();
    mem.insert(addr, Word::new(b.len() as u128, 128));
    let cells = b.cells(chunk as usize);
    for i in 0..stride - 1 {
        let v = cells.get(i as usize).copied().unwrap_or(0);
        mem.insert(addr + 1 + i, Word::new(v, chunk));
    }
    let mut out = env.clone();
    out.set(region, BirVal::Memory(mem));
    out.set(heap_var, BirVal::Word(Word::w64(addr + stride)));
    Ok((out, addr))
}

/// Reads back the record at `addr`.
pub fn mload(env: &BirEnv, addr: u64) -> Result<Bits, BirError> {
    let region = region_of(addr).ok_or(BirError::Unwritten(addr))?;
    let mem = env.memory(region)?;
    mload_mem(mem, addr)
}

pub fn mload_mem(mem: &Memory, addr: u64) -> Result<Bits, BirError> {
    let len_word = mem.get(&addr).ok_or(BirError::Unwritten(addr))?;
    if len_word.width != 128 || len_word.value > RECORD_BITS as u128 {
        return Err(BirError::ImplausibleLength(addr));
    }
    let len = len_word.value as usize;
    if len == 0 {
        return Ok(Bits::empty());
    }
    let chunk = mem.get(&(addr + 1)).ok_or(BirError::Unwritten(addr + 1))?.width as usize;
    let count = len.div_ceil(chunk);
    let mut cells = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let c = mem.get(&(addr + 1 + i)).ok_or(BirError::Unwritten(addr + 1 + i))?;
        cells.push(c.value);
    }
    Ok(Bits::from_cells(&cells, chunk, len))
}

/// Reads the next `n` random bits from the tape. Returns the value, the fresh index
/// `floor(ctr / l) + 1`, and the environment with `ctr` advanced by `l`.
pub fn rng_read(env: &BirEnv, n: usize) -> Result<(Bits, u64, BirEnv), BirError> {
    let w = env.tape.word_width;
    if w == 0 || n == 0 || !n.is_multiple_of(w) {
        return Err(BirError::Type(format!("security parameter {n} is not a multiple of tape width {w}")));
    }
    let l = n / w;
    let ctr = env.ctr() as usize;
    if ctr + l > env.tape.words.len() {
        return Err(BirError::TapeExhausted);
    }
    let value = env.tape.words[ctr..ctr + l]
        .iter()
        .fold(Bits::empty(), |acc, x| acc.concat(x));
    let index = (ctr / l) as u64 + 1;
    let mut out = env.clone();
    out.set(CTR, BirVal::Word(Word::w64((ctr + l) as u64)));
    Ok((value, index, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_with_tape(words: &[u128], w: usize) -> BirEnv {
        let tape = RandomTape::new(w, words.iter().map(|v| Bits::from_u128(*v, w)).collect());
        BirEnv::initial(&BTreeMap::new(), tape)
    }

    #[test]
    fn rng_reads_sequentially_then_exhausts() {
        let env = env_with_tape(&[0x3, 0x7], 4);
        let (v1, i1, env) = rng_read(&env, 4).unwrap();
        assert_eq!((v1, i1, env.ctr()), (Bits::from_u128(3, 4), 1, 1));
        let (v2, i2, env) = rng_read(&env, 4).unwrap();
        assert_eq!((v2, i2, env.ctr()), (Bits::from_u128(7, 4), 2, 2));
        assert_eq!(rng_read(&env, 4).unwrap_err(), BirError::TapeExhausted);
    }

    #[test]
    fn rng_multiword_reads_concatenate() {
        let env = env_with_tape(&[0x1, 0x2, 0x3, 0x4], 4);
        let (v, i, env) = rng_read(&env, 8).unwrap();
        assert_eq!((v.to_hex(), i), ("0x12".to_string(), 1));
        let (v, i, _) = rng_read(&env, 8).unwrap();
        assert_eq!((v.to_hex(), i), ("0x34".to_string(), 2));
    }

    #[test]
    fn mstore_mload_roundtrip() {
        let env = env_with_tape(&[], 4);
        let b = Bits::parse("0xbeef").unwrap();
        let (env2, a) = mstore(&env, HEAP, MEM, &b, 8).unwrap();
        assert_eq!(mload(&env2, a).unwrap(), b);
        let (env3, a2) = mstore(&env2, HEAP, MEM, &Bits::empty(), 8).unwrap();
        assert!(a2 > a);
        assert_eq!(mload(&env3, a2).unwrap(), Bits::empty());
    }

    #[test]
    fn mload_unwritten_is_error() {
        let env = env_with_tape(&[], 4);
        assert!(matches!(mload(&env, 0x1000_0000), Err(BirError::Unwritten(_))));
        assert!(matches!(mload(&env, 5), Err(BirError::Unwritten(5))));
    }

    #[test]
    fn store_into_op_region_leaves_mem() {
        let env = env_with_tape(&[], 4);
        let (env2, _) = mstore(&env, HEAP_OP, MEM_OP, &Bits::parse("0x12").unwrap(), 128).unwrap();
        assert_eq!(env.get(MEM).unwrap(), env2.get(MEM).unwrap());
        assert_eq!(env.get(MEM_A).unwrap(), env2.get(MEM_A).unwrap());
        assert_ne!(env.get(MEM_OP).unwrap(), env2.get(MEM_OP).unwrap());
    }

    #[test]
    fn oversized_payload_rejected() {
        let env = env_with_tape(&[], 4);
        let big = Bits::zeros(RECORD_BITS + 1);
        assert!(matches!(mstore(&env, HEAP, MEM, &big, 8), Err(BirError::PayloadTooLong(_))));
        assert!(matches!(mstore(&env, HEAP, MEM, &Bits::empty(), 7), Err(BirError::BadChunk(7))));
    }
}
