use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Widths a BIR word may have.
pub const WIDTHS: [u8; 6] = [1, 8, 16, 32, 64, 128];

pub fn valid_width(w: u8) -> bool {
    WIDTHS.contains(&w)
}

pub fn mask(width: u8) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    pub value: u128,
    pub width: u8,
}

impl Word {
    pub fn new(value: u128, width: u8) -> Word {
        debug_assert!(valid_width(width), "bad width {width}");
        Word { value: value & mask(width), width }
    }

    pub fn bit(b: bool) -> Word {
        Word::new(u128::from(b), 1)
    }

    pub fn w64(v: u64) -> Word {
        Word::new(u128::from(v), 64)
    }

    pub fn is_true(&self) -> bool {
        self.width == 1 && self.value == 1
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.value, self.width)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value > 9 {
            write!(f, "{:#x}:{}", self.value, self.width)
        } else {
            write!(f, "{}:{}", self.value, self.width)
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Addr(u64),
    Name(String),
}

impl Label {
    pub fn parse(s: &str) -> Label {
        let s = s.strip_prefix('@').unwrap_or(s);
        if let Some(hex) = s.strip_prefix("0x") {
            if let Ok(v) = u64::from_str_radix(hex, 16) {
                return Label::Addr(v);
            }
        }
        match s.parse::<u64>() {
            Ok(v) => Label::Addr(v),
            Err(_) => Label::Name(s.to_string()),
        }
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Addr(a) => write!(f, "{a}"),
            Label::Name(n) => write!(f, "{n}"),
        }
    }
}

/// Cell-addressed memory. Each cell holds one word of its own width.
pub type Memory = BTreeMap<u64, Word>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BirVal {
    Word(Word),
    Label(Label),
    Memory(Memory),
}

impl BirVal {
    pub fn word(value: u128, width: u8) -> BirVal {
        BirVal::Word(Word::new(value, width))
    }

    pub fn as_word(&self) -> Option<Word> {
        match self {
            BirVal::Word(w) => Some(*w),
            _ => None,
        }
    }

    pub fn ty(&self) -> Ty {
        match self {
            BirVal::Word(w) => Ty::Word(w.width),
            BirVal::Label(_) => Ty::Label,
            BirVal::Memory(_) => Ty::Mem,
        }
    }
}

impl fmt::Debug for BirVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BirVal::Word(w) => write!(f, "{w:?}"),
            BirVal::Label(l) => write!(f, "@{l}"),
            BirVal::Memory(m) => write!(f, "mem{m:?}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ty {
    Word(u8),
    Label,
    Mem,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Word(w) => write!(f, "word{w}"),
            Ty::Label => write!(f, "label"),
            Ty::Mem => write!(f, "mem"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Plus,
    Minus,
    Mult,
    Div,
    Mod,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Eq,
    Neq,
    Lt,
    Le,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Plus => "+",
            BinOp::Minus => "-",
            BinOp::Mult => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Eq => "==",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le)
    }

    pub const ALL: [BinOp; 14] = [
        BinOp::Plus,
        BinOp::Minus,
        BinOp::Mult,
        BinOp::Div,
        BinOp::Mod,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::Eq,
        BinOp::Neq,
        BinOp::Lt,
        BinOp::Le,
    ];

    /// Word-level semantics. Operands must share a width; comparisons yield one bit.
    pub fn apply(self, a: Word, b: Word) -> Word {
        let (v, w) = self.apply_raw(a.value, b.value, u32::from(a.width));
        Word::new(v, w as u8)
    }

    /// The same semantics on raw values of any width up to 128. Returns the result
    /// and its width.
    pub fn apply_raw(self, a: u128, b: u128, w: u32) -> (u128, u32) {
        let m = if w >= 128 { u128::MAX } else { (1u128 << w) - 1 };
        let v = match self {
            BinOp::Plus => a.wrapping_add(b),
            BinOp::Minus => a.wrapping_sub(b),
            BinOp::Mult => a.wrapping_mul(b),
            BinOp::Div => a.checked_div(b).unwrap_or(m),
            // SMT-LIB convention: remainder by zero is the dividend.
            BinOp::Mod => {
                if b == 0 {
                    a
                } else {
                    a % b
                }
            }
            BinOp::And => a & b,
            BinOp::Or => a | b,
            BinOp::Xor => a ^ b,
            BinOp::Shl => {
                if b >= u128::from(w) {
                    0
                } else {
                    a << b
                }
            }
            BinOp::Shr => {
                if b >= u128::from(w) {
                    0
                } else {
                    a >> b
                }
            }
            BinOp::Eq => return (u128::from(a == b), 1),
            BinOp::Neq => return (u128::from(a != b), 1),
            BinOp::Lt => return (u128::from(a < b), 1),
            BinOp::Le => return (u128::from(a <= b), 1),
        };
        (v & m, w)
    }
}

impl UnOp {
    pub fn apply(self, a: Word) -> Word {
        match self {
            UnOp::Not => Word::new(!a.value, a.width),
            UnOp::Neg => Word::new(a.value.wrapping_neg(), a.width),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BirExp {
    Const(BirVal),
    Var(String),
    Un(UnOp, Box<BirExp>),
    Bin(BinOp, Box<BirExp>, Box<BirExp>),
    Ite(Box<BirExp>, Box<BirExp>, Box<BirExp>),
    Load(Box<BirExp>, Box<BirExp>, u8),
    Store(Box<BirExp>, Box<BirExp>, Box<BirExp>, u8),
}

impl BirExp {
    pub fn word(value: u128, width: u8) -> BirExp {
        BirExp::Const(BirVal::word(value, width))
    }

    pub fn label(l: Label) -> BirExp {
        BirExp::Const(BirVal::Label(l))
    }

    pub fn var(name: &str) -> BirExp {
        BirExp::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: BirExp, b: BirExp) -> BirExp {
        BirExp::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnOp, a: BirExp) -> BirExp {
        BirExp::Un(op, Box::new(a))
    }

    pub fn ite(c: BirExp, a: BirExp, b: BirExp) -> BirExp {
        BirExp::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    pub fn load(m: BirExp, a: BirExp, w: u8) -> BirExp {
        BirExp::Load(Box::new(m), Box::new(a), w)
    }

    pub fn store(m: BirExp, a: BirExp, v: BirExp, w: u8) -> BirExp {
        BirExp::Store(Box::new(m), Box::new(a), Box::new(v), w)
    }

    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            BirExp::Const(_) => {}
            BirExp::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            BirExp::Un(_, a) => a.vars(out),
            BirExp::Bin(_, a, b) | BirExp::Load(a, b, _) => {
                a.vars(out);
                b.vars(out);
            }
            BirExp::Ite(a, b, c) | BirExp::Store(a, b, c, _) => {
                a.vars(out);
                b.vars(out);
                c.vars(out);
            }
        }
    }
}

impl fmt::Display for BirExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BirExp::Const(BirVal::Word(w)) => write!(f, "{w}"),
            BirExp::Const(BirVal::Label(l)) => write!(f, "@{l}"),
            BirExp::Const(BirVal::Memory(_)) => write!(f, "<memory>"),
            BirExp::Var(v) => write!(f, "{v}"),
            BirExp::Un(op, a) => write!(f, "{}{a}", op.symbol()),
            BirExp::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            BirExp::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
            BirExp::Load(m, a, w) => write!(f, "load({m}, {a}, {w})"),
            BirExp::Store(m, a, v, w) => write!(f, "store({m}, {a}, {v}, {w})"),
        }
    }
}

impl fmt::Debug for BirExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BirStmt {
    Assign(String, BirExp),
    Assert(BirExp),
    Halt,
    Jmp(BirExp),
    CJmp(BirExp, BirExp, BirExp),
}

impl BirStmt {
    pub fn is_terminator(&self) -> bool {
        matches!(self, BirStmt::Halt | BirStmt::Jmp(_) | BirStmt::CJmp(..))
    }
}

impl fmt::Display for BirStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BirStmt::Assign(v, e) => write!(f, "{v} := {e}"),
            BirStmt::Assert(e) => write!(f, "assert {e}"),
            BirStmt::Halt => write!(f, "halt"),
            BirStmt::Jmp(e) => write!(f, "jmp {e}"),
            BirStmt::CJmp(c, a, b) => write!(f, "cjmp {c}, {a}, {b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub label: Label,
    pub stmts: Vec<BirStmt>,
}
