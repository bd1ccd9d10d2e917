//! Events shared by every layer, their observable projection, and the dump format.

use crate::bir::Label;
use crate::bits::Bits;
use num_rational::BigRational;
use num_traits::One;
use std::fmt;

/// One transition label. BIR, SBIR (after grounding), IML and mixed runs all emit these.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Tau,
    /// Randomness: RNG call in BIR, `new` in IML. `index` is the tape position when known.
    Fresh { value: Bits, index: Option<u64> },
    /// Library call result (silent in IML, where it becomes a `let`).
    Crypto(Bits),
    Ev { name: String, args: Vec<Bits> },
    /// BIR send into a channel queue.
    Out { chan: String, ids: Vec<Bits>, payload: Bits },
    /// BIR receive from a channel queue.
    In { chan: String, ids: Vec<Bits>, payload: Bits },
    /// Completed rendezvous between two participants.
    Msg { chan: String, ids: Vec<Bits>, payload: Bits },
    Loop(u64),
}

/// The part of an event that every layer agrees on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Obs {
    Fresh(Bits),
    Ev(String, Vec<Bits>),
    Msg(String, Vec<Bits>, Bits),
}

impl Event {
    pub fn observable(&self) -> Option<Obs> {
        match self {
            Event::Fresh { value, .. } => Some(Obs::Fresh(value.clone())),
            Event::Ev { name, args } => Some(Obs::Ev(name.clone(), args.clone())),
            Event::Out { chan, ids, payload } | Event::In { chan, ids, payload } | Event::Msg { chan, ids, payload } => {
                Some(Obs::Msg(chan.clone(), ids.clone(), payload.clone()))
            }
            Event::Tau | Event::Crypto(_) | Event::Loop(_) => None,
        }
    }

    pub fn is_fresh(&self) -> bool {
        matches!(self, Event::Fresh { .. })
    }

    pub fn tag(&self) -> String {
        let ids = |ids: &[Bits]| {
            if ids.is_empty() {
                String::new()
            } else {
                format!("[{}]", ids.iter().map(Bits::to_hex).collect::<Vec<_>>().join(","))
            }
        };
        match self {
            Event::Tau => "tau".into(),
            Event::Fresh { index: Some(i), .. } => format!("fr#{i}"),
            Event::Fresh { index: None, .. } => "fr".into(),
            Event::Crypto(_) => "crypto".into(),
            Event::Ev { name, .. } => format!("ev:{name}"),
            Event::Out { chan, ids: i, .. } => format!("out:{chan}{}", ids(i)),
            Event::In { chan, ids: i, .. } => format!("in:{chan}{}", ids(i)),
            Event::Msg { chan, ids: i, .. } => format!("msg:{chan}{}", ids(i)),
            Event::Loop(n) => format!("loop:{n}"),
        }
    }

    pub fn payload_hex(&self) -> String {
        match self {
            Event::Tau | Event::Loop(_) => String::new(),
            Event::Fresh { value, .. } | Event::Crypto(value) => value.to_hex(),
            Event::Ev { args, .. } => args.iter().map(Bits::to_hex).collect::<Vec<_>>().join(","),
            Event::Out { payload, .. } | Event::In { payload, .. } | Event::Msg { payload, .. } => payload.to_hex(),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.payload_hex();
        if p.is_empty() {
            write!(f, "{}", self.tag())
        } else {
            write!(f, "{}({p})", self.tag())
        }
    }
}

/// Projects a trace to its observable events.
pub fn observable<'a>(events: impl IntoIterator<Item = &'a Event>) -> Vec<Obs> {
    events.into_iter().filter_map(Event::observable).collect()
}

/// Renders `idx|prob|event|payload-hex` lines.
pub fn dump<'a>(steps: impl IntoIterator<Item = (&'a Event, &'a BigRational)>) -> String {
    let mut out = String::new();
    for (i, (e, p)) in steps.into_iter().enumerate() {
        out.push_str(&format!("{i}|{p}|{}|{}\n", e.tag(), e.payload_hex()));
    }
    out
}

/// Dump for a deterministic run where every step has probability 1.
pub fn dump_plain<'a>(events: impl IntoIterator<Item = &'a Event>) -> String {
    let one = BigRational::one();
    let evs: Vec<&Event> = events.into_iter().collect();
    dump(evs.into_iter().map(|e| (e, &one)))
}

/// 64-bit encoding of a label. Named labels use FNV-1a so the encoding is stable.
pub fn label_bits(l: &Label) -> Bits {
    let v = match l {
        Label::Addr(a) => *a,
        Label::Name(n) => {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for b in n.bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100_0000_01b3);
            }
            h
        }
    };
    Bits::from_u128(u128::from(v), 64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_merges_message_kinds() {
        let m = Bits::parse("0x0f").unwrap();
        let out = Event::Out { chan: "c".into(), ids: vec![], payload: m.clone() };
        let msg = Event::Msg { chan: "c".into(), ids: vec![], payload: m };
        assert_eq!(out.observable(), msg.observable());
        assert_eq!(Event::Crypto(Bits::empty()).observable(), None);
    }

    #[test]
    fn dump_lines() {
        let e = [Event::Tau, Event::Fresh { value: Bits::from_u128(3, 4), index: Some(1) }];
        assert_eq!(dump_plain(&e), "0|1|tau|\n1|1|fr#1|0x3\n");
    }

    #[test]
    fn label_encoding_is_stable() {
        assert_eq!(label_bits(&Label::Addr(7)).to_u128(), Some(7));
        assert_eq!(label_bits(&Label::Name("x".into())), label_bits(&Label::Name("x".into())));
        assert_ne!(label_bits(&Label::Name("x".into())), label_bits(&Label::Name("y".into())));
    }
}
