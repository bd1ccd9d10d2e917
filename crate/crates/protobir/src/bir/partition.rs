//! Classification of program addresses into normal code, library calls, attacker
//! I/O, randomness and event functions, loaded from a TOML config.

use super::syntax::Label;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub chan: String,
    /// Variables whose values identify the channel instance.
    #[serde(default)]
    pub ids: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub labels: BTreeSet<Label>,
    pub arity: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartSpec {
    /// Names given to the marshalled `run` arguments, in register order.
    #[serde(default)]
    pub params: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPartition {
    pub normal: BTreeSet<Label>,
    pub ops: BTreeMap<String, BTreeSet<Label>>,
    pub attacker_send: BTreeMap<Label, ChannelSpec>,
    pub attacker_recv: BTreeMap<Label, ChannelSpec>,
    pub rng: BTreeSet<Label>,
    pub events: BTreeMap<String, EventSpec>,
    pub loops: BTreeSet<Label>,
    pub exits: BTreeMap<Label, Label>,
    pub starts: BTreeMap<Label, StartSpec>,
}

/// What a program counter denotes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelKind<'a> {
    Normal,
    Op(&'a str),
    Send(&'a ChannelSpec),
    Recv(&'a ChannelSpec),
    Rng,
    Event(&'a str, usize),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("label {0} appears in both {1} and {2}")]
    Overlap(Label, String, String),
    #[error("loop entry {0} is not a normal block")]
    LoopNotNormal(Label),
    #[error("loop entry {0} has no exit")]
    MissingExit(Label),
    #[error("bad partition config: {0}")]
    Config(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelRepr {
    Num(u64),
    Text(String),
}

impl LabelRepr {
    fn label(&self) -> Label {
        match self {
            LabelRepr::Num(n) => Label::Addr(*n),
            LabelRepr::Text(s) => Label::parse(s),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    #[serde(default)]
    rng: Vec<LabelRepr>,
    #[serde(default)]
    loops: Vec<LabelRepr>,
    #[serde(default)]
    exits: BTreeMap<String, LabelRepr>,
    #[serde(default)]
    ops: BTreeMap<String, Vec<LabelRepr>>,
    #[serde(default)]
    events: BTreeMap<String, EventFile>,
    #[serde(default)]
    attacker_send: BTreeMap<String, ChannelSpec>,
    #[serde(default)]
    attacker_recv: BTreeMap<String, ChannelSpec>,
    #[serde(default)]
    starts: BTreeMap<String, StartSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventFile {
    labels: Vec<LabelRepr>,
    #[serde(default)]
    arity: usize,
}

impl LabelPartition {
    pub fn from_toml(text: &str) -> Result<Self, PartitionError> {
        let f: PartitionFile = toml::from_str(text).map_err(|e| PartitionError::Config(e.to_string()))?;
        let keyed = |m: BTreeMap<String, ChannelSpec>| m.into_iter().map(|(k, v)| (Label::parse(&k), v)).collect();
        Ok(LabelPartition {
            normal: BTreeSet::new(),
            rng: f.rng.iter().map(LabelRepr::label).collect(),
            loops: f.loops.iter().map(LabelRepr::label).collect(),
            exits: f.exits.iter().map(|(k, v)| (Label::parse(k), v.label())).collect(),
            ops: f.ops.into_iter().map(|(k, v)| (k, v.iter().map(LabelRepr::label).collect())).collect(),
            events: f
                .events
                .into_iter()
                .map(|(k, v)| (k, EventSpec { labels: v.labels.iter().map(LabelRepr::label).collect(), arity: v.arity }))
                .collect(),
            attacker_send: keyed(f.attacker_send),
            attacker_recv: keyed(f.attacker_recv),
            starts: f.starts.into_iter().map(|(k, v)| (Label::parse(&k), v)).collect(),
        })
    }

    /// Canonical TOML rendering (the normal set is derived, so it is omitted).
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let list = |set: &BTreeSet<Label>| set.iter().map(|l| format!("\"{l}\"")).collect::<Vec<_>>().join(", ");
        s.push_str(&format!("rng = [{}]\n", list(&self.rng)));
        s.push_str(&format!("loops = [{}]\n", list(&self.loops)));
        s.push_str("\n[exits]\n");
        for (k, v) in &self.exits {
            s.push_str(&format!("\"{k}\" = \"{v}\"\n"));
        }
        s.push_str("\n[ops]\n");
        for (k, v) in &self.ops {
            s.push_str(&format!("{k} = [{}]\n", list(v)));
        }
        for (k, v) in &self.events {
            s.push_str(&format!("\n[events.{k}]\nlabels = [{}]\narity = {}\n", list(&v.labels), v.arity));
        }
        let chans = |name: &str, m: &BTreeMap<Label, ChannelSpec>, s: &mut String| {
            for (k, v) in m {
                let ids = v.ids.iter().map(|i| format!("\"{i}\"")).collect::<Vec<_>>().join(", ");
                s.push_str(&format!("\n[{name}.\"{k}\"]\nchan = \"{}\"\nids = [{ids}]\n", v.chan));
            }
        };
        chans("attacker_send", &self.attacker_send, &mut s);
        chans("attacker_recv", &self.attacker_recv, &mut s);
        for (k, v) in &self.starts {
            let ps = v.params.iter().map(|i| format!("\"{i}\"")).collect::<Vec<_>>().join(", ");
            s.push_str(&format!("\n[starts.\"{k}\"]\nparams = [{ps}]\n"));
        }
        s
    }

    /// Every special label with the name of the set that owns it.
    fn special_labels(&self) -> Vec<(Label, String)> {
        let mut out = Vec::new();
        for l in &self.rng {
            out.push((l.clone(), "rng".to_string()));
        }
        for (op, ls) in &self.ops {
            for l in ls {
                out.push((l.clone(), format!("op {op}")));
            }
        }
        for l in self.attacker_send.keys() {
            out.push((l.clone(), "attacker_send".to_string()));
        }
        for l in self.attacker_recv.keys() {
            out.push((l.clone(), "attacker_recv".to_string()));
        }
        for (ev, spec) in &self.events {
            for l in &spec.labels {
                out.push((l.clone(), format!("event {ev}")));
            }
        }
        out
    }

    /// Checks pairwise disjointness and derives the normal set from `blocks`.
    pub fn finish(&mut self, blocks: &BTreeSet<Label>) -> Result<(), PartitionError> {
        let mut owner: BTreeMap<Label, String> = BTreeMap::new();
        for (l, set) in self.special_labels() {
            if let Some(prev) = owner.insert(l.clone(), set.clone()) {
                return Err(PartitionError::Overlap(l, prev, set));
            }
        }
        self.normal = blocks.iter().filter(|l| !owner.contains_key(*l)).cloned().collect();
        for l in &self.loops {
            if !self.normal.contains(l) {
                return Err(PartitionError::LoopNotNormal(l.clone()));
            }
            if !self.exits.contains_key(l) {
                return Err(PartitionError::MissingExit(l.clone()));
            }
        }
        Ok(())
    }

    pub fn kind(&self, l: &Label) -> LabelKind<'_> {
        if self.rng.contains(l) {
            return LabelKind::Rng;
        }
        for (op, ls) in &self.ops {
            if ls.contains(l) {
                return LabelKind::Op(op);
            }
        }
        if let Some(c) = self.attacker_send.get(l) {
            return LabelKind::Send(c);
        }
        if let Some(c) = self.attacker_recv.get(l) {
            return LabelKind::Recv(c);
        }
        for (ev, spec) in &self.events {
            if spec.labels.contains(l) {
                return LabelKind::Event(ev, spec.arity);
            }
        }
        LabelKind::Normal
    }

    pub fn is_special(&self, l: &Label) -> bool {
        self.kind(l) != LabelKind::Normal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_between_rng_and_event_rejected() {
        let mut p = LabelPartition::from_toml(
            "rng = [500]\n[events.bad]\nlabels = [500]\narity = 0\n",
        )
        .unwrap();
        let err = p.finish(&BTreeSet::new()).unwrap_err();
        assert!(matches!(err, PartitionError::Overlap(Label::Addr(500), _, _)));
    }

    #[test]
    fn toml_roundtrip() {
        let text = "rng = [500]\nloops = [10]\n[exits]\n\"10\" = 20\n[ops]\nenc = [600]\n\
                    [events.accept]\nlabels = [700]\narity = 1\n\
                    [attacker_send.\"800\"]\nchan = \"c\"\nids = [\"ID\"]\n[starts.\"1\"]\nparams = [\"k\"]\n";
        let p = LabelPartition::from_toml(text).unwrap();
        assert_eq!(p.kind(&Label::Addr(600)), LabelKind::Op("enc"));
        assert_eq!(p.kind(&Label::Addr(700)), LabelKind::Event("accept", 1));
        let again = LabelPartition::from_toml(&p.to_toml()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn loop_needs_exit() {
        let mut p = LabelPartition::from_toml("loops = [10]\n").unwrap();
        let blocks = [Label::Addr(10)].into_iter().collect();
        assert_eq!(p.finish(&blocks), Err(PartitionError::MissingExit(Label::Addr(10))));
    }
}
