//! Registry of abstract cryptographic operations over bitstrings.
//!
//! The built-in set is idealized: encryption prepends a tag and the key so that
//! decryption can recognise well-formed ciphertexts, and fails (empty output) on
//! anything else.

use crate::bits::Bits;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

const ENC_TAG: u128 = 0xEC;
const MAC_TAG: u128 = 0xAC;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Enc,
    Dec,
    Xor,
    Conc,
    Conc1,
    Mac,
    Verify,
    Id,
}

impl Builtin {
    pub fn arity(self) -> usize {
        match self {
            Builtin::Conc1 | Builtin::Id => 1,
            Builtin::Verify => 3,
            _ => 2,
        }
    }

    fn apply(self, args: &[Bits]) -> Bits {
        match self {
            Builtin::Enc => {
                let (k, m) = (&args[0], &args[1]);
                Bits::from_u128(ENC_TAG, 8)
                    .concat(&Bits::from_u128(k.len() as u128, 16))
                    .concat(k)
                    .concat(m)
            }
            Builtin::Dec => {
                let (k, c) = (&args[0], &args[1]);
                let header = Bits::from_u128(ENC_TAG, 8)
                    .concat(&Bits::from_u128(k.len() as u128, 16))
                    .concat(k);
                if c.starts_with(&header) {
                    c.slice(header.len(), c.len() - header.len())
                } else {
                    Bits::empty()
                }
            }
            Builtin::Xor => args[0].xor(&args[1]),
            Builtin::Conc => args[0].concat(&args[1]),
            Builtin::Conc1 => Bits::from_u128(1, 8).concat(&args[0]),
            Builtin::Mac => Bits::from_u128(MAC_TAG, 8).concat(&args[0]).concat(&args[1]),
            Builtin::Verify => {
                let expect = Builtin::Mac.apply(&args[..2]);
                Bits::from_u128(u128::from(expect == args[2]), 1)
            }
            Builtin::Id => args[0].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpDef {
    pub builtin: Builtin,
    pub arity: usize,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum OpError {
    #[error("unknown operation `{0}`")]
    Unknown(String),
    #[error("operation `{op}` expects {expected} arguments, got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("bad op registry config: {0}")]
    Config(String),
}

#[derive(Clone, Debug)]
pub struct OpRegistry {
    ops: BTreeMap<String, OpDef>,
}

#[derive(Deserialize)]
struct RegistryFile {
    #[serde(default)]
    ops: BTreeMap<String, OpEntry>,
}

#[derive(Deserialize)]
struct OpEntry {
    builtin: Builtin,
}

impl Default for OpRegistry {
    fn default() -> Self {
        let mut r = OpRegistry { ops: BTreeMap::new() };
        for (name, b) in [
            ("enc", Builtin::Enc),
            ("dec", Builtin::Dec),
            ("xor", Builtin::Xor),
            ("exclusive_or", Builtin::Xor),
            ("conc", Builtin::Conc),
            ("conc1", Builtin::Conc1),
            ("mac", Builtin::Mac),
            ("verify", Builtin::Verify),
            ("id", Builtin::Id),
        ] {
            r.insert(name, b);
        }
        r
    }
}

impl OpRegistry {
    pub fn empty() -> Self {
        OpRegistry { ops: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &str, builtin: Builtin) {
        self.ops.insert(name.to_string(), OpDef { builtin, arity: builtin.arity() });
    }

    /// Parses a TOML registry: `[ops.<name>] builtin = "enc"`. Entries extend the defaults.
    pub fn from_toml(text: &str) -> Result<Self, OpError> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| OpError::Config(e.to_string()))?;
        let mut r = OpRegistry::default();
        for (name, entry) in file.ops {
            r.insert(&name, entry.builtin);
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self, OpError> {
        let text = std::fs::read_to_string(path).map_err(|e| OpError::Config(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn get(&self, name: &str) -> Option<&OpDef> {
        self.ops.get(name)
    }

    pub fn arity(&self, name: &str) -> Result<usize, OpError> {
        self.get(name).map(|d| d.arity).ok_or_else(|| OpError::Unknown(name.to_string()))
    }

    pub fn apply(&self, name: &str, args: &[Bits]) -> Result<Bits, OpError> {
        let def = self.get(name).ok_or_else(|| OpError::Unknown(name.to_string()))?;
        if def.arity != args.len() {
            return Err(OpError::Arity { op: name.to_string(), expected: def.arity, got: args.len() });
        }
        Ok(def.builtin.apply(args))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ops.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> Bits {
        Bits::parse(s).unwrap()
    }

    #[test]
    fn dec_inverts_enc() {
        let r = OpRegistry::default();
        let c = r.apply("enc", &[b("0xa5"), b("0b101")]).unwrap();
        assert_eq!(r.apply("dec", &[b("0xa5"), c.clone()]).unwrap(), b("0b101"));
        assert!(r.apply("dec", &[b("0xa4"), c]).unwrap().is_empty());
    }

    #[test]
    fn dec_fails_on_untagged() {
        let r = OpRegistry::default();
        for junk in Bits::all_of_width(8) {
            assert!(r.apply("dec", &[b("0xa5"), junk]).unwrap().is_empty());
        }
    }

    #[test]
    fn arity_checked() {
        let r = OpRegistry::default();
        assert!(matches!(r.apply("xor", &[b("0x1")]), Err(OpError::Arity { .. })));
        assert!(matches!(r.apply("nope", &[]), Err(OpError::Unknown(_))));
    }

    #[test]
    fn config_adds_alias() {
        let r = OpRegistry::from_toml("[ops.seal]\nbuiltin = \"enc\"\n").unwrap();
        assert_eq!(r.arity("seal").unwrap(), 2);
        assert_eq!(r.apply("conc1", &[b("0xf")]).unwrap(), b("0x01f"));
    }
}
