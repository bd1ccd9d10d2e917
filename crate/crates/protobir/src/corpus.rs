//! Seeded generators: small random programs with a matching attacker system, and
//! random pure model processes.
//!
//! Programs draw from every statement kind and every label kind. Sends and receives
//! only happen outside branches, so the attacker can follow them as a fixed sequence.

use crate::bir::parse::parse_program;
use crate::bir::Program;
use crate::bits::Bits;
use crate::iml::syntax::{IExp, Process};
use crate::iml::parse_process;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::Path;

pub const START: u64 = 100;
const RNG_LABEL: u64 = 9000;
const SEND_LABEL: u64 = 9300;
const RECV_LABEL: u64 = 9400;
const OPS: [(&str, usize); 7] = [("enc", 2), ("dec", 2), ("xor", 2), ("conc", 2), ("conc1", 1), ("mac", 2), ("id", 1)];
/// (name, arity); the label of event `i` is 9200 + i.
pub const EVENTS: [(&str, usize); 5] = [("ev", 1), ("accept", 1), ("send", 1), ("bad", 0), ("tick", 0)];

#[derive(Clone, Debug)]
pub struct CorpusConfig {
    /// Bits per random draw; also the attacker's `new` width.
    pub n: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Force at least one branch that raises an event on one side only.
    pub event_branch: bool,
    pub io: bool,
    pub loops: bool,
    /// Pass a model-drawn argument to the program.
    pub with_param: bool,
    /// Cap on draw sites (parameter, RNG calls, attacker `new`s) per system.
    /// Exhaustive checks enumerate `2^(n * draws)` paths, so this keeps them cheap.
    pub max_draws: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { n: 4, min_segments: 3, max_segments: 7, event_branch: false, io: true, loops: true, with_param: true, max_draws: 3 }
    }
}

/// A generated program with the system that runs it.
#[derive(Clone, Debug)]
pub struct CorpusSystem {
    pub name: String,
    pub program_text: String,
    pub partition_toml: String,
    pub system_text: String,
    pub program: Program,
    pub system: Process,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Io {
    Send(u8),
    Recv(u8),
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: CorpusConfig,
    blocks: Vec<(u64, Vec<String>)>,
    next: u64,
    records: Vec<(String, &'static str)>,
    record_count: usize,
    loops: Vec<(u64, u64)>,
    io: Vec<Io>,
    used_ops: BTreeSet<usize>,
    used_events: BTreeSet<usize>,
    uses_rng: bool,
    event_raised_in_branch: bool,
    draws: usize,
}

impl Gen {
    fn label(&mut self) -> u64 {
        self.next += 1;
        self.next
    }

    fn block(&mut self, l: u64, stmts: Vec<String>) {
        self.blocks.push((l, stmts));
    }

    fn new_record(&mut self, region: &'static str) -> String {
        let v = format!("a{}", self.record_count);
        self.record_count += 1;
        self.records.push((v.clone(), region));
        v
    }

    fn cond(&mut self) -> String {
        let bound = 1u128 << self.cfg.n;
        if self.records.is_empty() || self.rng.gen_bool(0.15) {
            let v = format!("v{}", self.rng.gen_range(0..3));
            return format!("({v} < {}:64)", self.rng.gen_range(0..4));
        }
        let (a, ra) = self.records.choose(&mut self.rng).cloned().expect("records");
        match self.rng.gen_range(0..4) {
            0 if self.records.len() > 1 => {
                let (b, rb) = self.records.choose(&mut self.rng).cloned().expect("records");
                format!("(load({ra}, ({a} + 1:64), 128) < load({rb}, ({b} + 1:64), 128))")
            }
            1 => format!("(load({ra}, {a}, 128) == {}:128)", self.cfg.n),
            2 => format!("(load({ra}, ({a} + 1:64), 128) == {}:128)", self.rng.gen_range(0..bound)),
            _ => format!("(load({ra}, ({a} + 1:64), 128) < {}:128)", self.rng.gen_range(1..bound)),
        }
    }

    fn event(&mut self, cur: u64, next: u64, only_nullary: bool) {
        let candidates: Vec<usize> = (0..EVENTS.len()).filter(|i| EVENTS[*i].1 == 0 || (!only_nullary && !self.records.is_empty())).collect();
        let i = *candidates.choose(&mut self.rng).expect("nullary events exist");
        self.used_events.insert(i);
        let mut s = Vec::new();
        if EVENTS[i].1 == 1 {
            let (a, _) = self.records.choose(&mut self.rng).cloned().expect("records");
            s.push(format!("R1 := {a}"));
        }
        s.push(format!("RET := @{next}"));
        s.push(format!("jmp @{}", 9200 + i as u64));
        self.block(cur, s);
    }

    /// One segment from `cur`; returns the label where the next segment starts.
    fn segment(&mut self, cur: u64, nesting: usize) -> u64 {
        let top = nesting == 0;
        let mut kinds = vec![0, 1, 1, 2, 3, 3, 6];
        if top && self.cfg.io {
            kinds.extend([4, 5]);
        }
        if nesting < 2 {
            kinds.extend([7, 7, 8]);
        }
        if top && self.cfg.loops {
            kinds.push(9);
        }
        let mut kind = *kinds.choose(&mut self.rng).expect("kinds");
        if kind == 1 && self.draws >= self.cfg.max_draws {
            kind = 0;
        }
        let next = self.label();
        match kind {
            // arithmetic
            0 => {
                let (x, y) = (self.rng.gen_range(0..3), self.rng.gen_range(0..3));
                let op = ["+", "-", "*", "^", "&", "<<"].choose(&mut self.rng).expect("ops");
                let c: u8 = self.rng.gen_range(0..8);
                self.block(cur, vec![format!("v{x} := (v{y} {op} {c}:64)"), format!("jmp @{next}")]);
            }
            // randomness
            1 => {
                self.uses_rng = true;
                self.draws += 1;
                let mid = self.label();
                self.block(cur, vec![format!("RET := @{mid}"), format!("jmp @{RNG_LABEL}")]);
                let a = self.new_record("Mem");
                self.block(mid, vec![format!("{a} := R0"), format!("jmp @{next}")]);
            }
            // library call
            2 if !self.records.is_empty() => {
                let i = self.rng.gen_range(0..OPS.len());
                self.used_ops.insert(i);
                let mid = self.label();
                let mut s = Vec::new();
                for r in 1..=OPS[i].1 {
                    let (a, _) = self.records.choose(&mut self.rng).cloned().expect("records");
                    s.push(format!("R{r} := {a}"));
                }
                s.push(format!("RET := @{mid}"));
                s.push(format!("jmp @{}", 9100 + i as u64));
                self.block(cur, s);
                let a = self.new_record("Mem_Op");
                self.block(mid, vec![format!("{a} := R0"), format!("jmp @{next}")]);
            }
            // event
            3 | 2 => self.event(cur, next, false),
            // send
            4 if !self.records.is_empty() => {
                let j = self.io.len() as u8;
                self.io.push(Io::Send(j));
                let (a, _) = self.records.choose(&mut self.rng).cloned().expect("records");
                self.block(cur, vec![format!("R0 := {a}"), format!("cid := {j}:8"), format!("RET := @{next}"), format!("jmp @{SEND_LABEL}")]);
            }
            // receive
            5 | 4 => {
                let j = self.io.len() as u8;
                self.io.push(Io::Recv(j));
                let mid = self.label();
                self.block(cur, vec![format!("cid := {j}:8"), format!("RET := @{mid}"), format!("jmp @{RECV_LABEL}")]);
                let a = self.new_record("Mem_A");
                self.block(mid, vec![format!("{a} := R0"), format!("jmp @{next}")]);
            }
            // assertion that may fail
            6 => {
                let c = if self.rng.gen_bool(0.7) { "(v0 == v0)".to_string() } else { self.cond() };
                self.block(cur, vec![format!("assert {c}"), format!("jmp @{next}")]);
            }
            // branch, direct or through a label variable
            7 | 8 => {
                let c = self.cond();
                let (t, e) = (self.label(), self.label());
                if kind == 7 {
                    self.block(cur, vec![format!("cjmp {c}, @{t}, @{e}")]);
                } else {
                    self.block(cur, vec![format!("tgt := ite({c}, @{t}, @{e})"), "jmp tgt".to_string()]);
                }
                let saved = self.records.clone();
                let force = self.cfg.event_branch && !self.event_raised_in_branch;
                let mut at = t;
                if force {
                    let after = self.label();
                    self.event(at, after, true);
                    self.event_raised_in_branch = true;
                    at = after;
                }
                for _ in 0..self.rng.gen_range(0..=2) {
                    at = self.segment(at, nesting + 1);
                }
                self.block(at, vec![format!("jmp @{next}")]);
                self.records = saved.clone();
                let mut at = e;
                for _ in 0..self.rng.gen_range(0..=1) {
                    at = self.segment(at, nesting + 1);
                }
                self.block(at, vec![format!("jmp @{next}")]);
                self.records = saved;
            }
            // bounded counter loop
            _ => {
                let (l, body) = (self.label(), self.label());
                let bound = self.rng.gen_range(1..=5);
                let step: u8 = self.rng.gen_range(1..8);
                self.block(cur, vec!["i := 0:64".into(), format!("jmp @{l}")]);
                self.block(l, vec![format!("cjmp (i < {bound}:64), @{body}, @{next}")]);
                self.block(body, vec!["i := (i + 1:64)".into(), format!("acc := (acc + {step}:64)"), format!("jmp @{l}")]);
                self.loops.push((l, next));
            }
        }
        next
    }

    fn program_text(&self) -> String {
        let mut s = String::new();
        for v in ["v0", "v1", "v2", "i", "acc"] {
            let _ = writeln!(s, "var {v}: 64");
        }
        let _ = writeln!(s, "var cid: 8\nvar tgt: label");
        for k in 0..self.record_count {
            let _ = writeln!(s, "var a{k}: 64");
        }
        for (l, stmts) in &self.blocks {
            let _ = writeln!(s, "block {l}:");
            for st in stmts {
                let _ = writeln!(s, "  {st}");
            }
        }
        s
    }

    fn partition_text(&self, param: bool) -> String {
        let mut s = format!("rng = [{RNG_LABEL}]\n");
        let loops: Vec<String> = self.loops.iter().map(|(l, _)| l.to_string()).collect();
        let _ = writeln!(s, "loops = [{}]", loops.join(", "));
        s += "[exits]\n";
        for (l, x) in &self.loops {
            let _ = writeln!(s, "\"{l}\" = {x}");
        }
        s += "[ops]\n";
        for (i, (name, _)) in OPS.iter().enumerate() {
            let _ = writeln!(s, "{name} = [{}]", 9100 + i);
        }
        for (i, (name, arity)) in EVENTS.iter().enumerate() {
            let _ = writeln!(s, "[events.{name}]\nlabels = [{}]\narity = {arity}", 9200 + i);
        }
        let _ = writeln!(s, "[attacker_send.\"{SEND_LABEL}\"]\nchan = \"c\"\nids = [\"cid\"]");
        let _ = writeln!(s, "[attacker_recv.\"{RECV_LABEL}\"]\nchan = \"d\"\nids = [\"cid\"]");
        let _ = writeln!(s, "[starts.\"{START}\"]\nparams = [{}]", if param { "\"p0\"" } else { "" });
        s
    }

    /// Attacker that answers the program's sends and receives in order.
    fn attacker(&mut self) -> String {
        let n = self.cfg.n;
        let mut received: Vec<String> = Vec::new();
        let mut parts: Vec<String> = Vec::new();
        let io = self.io.clone();
        for op in io {
            match op {
                Io::Send(j) => {
                    let m = format!("m{j}");
                    parts.push(format!("in(c[{j}:8], {m}); (0 | "));
                    received.push(m);
                }
                Io::Recv(j) => {
                    let choice = self.rng.gen_range(0..4);
                    let can_draw = self.draws < self.cfg.max_draws;
                    let payload = match (choice, received.choose(&mut self.rng)) {
                        (0, Some(m)) => m.clone(),
                        (1, Some(m)) => format!("conc1({m})"),
                        (c, _) if c == 2 || !can_draw => format!("{}:8", self.rng.gen_range(0..16)),
                        _ => {
                            self.draws += 1;
                            parts.push(format!("new a{j}: fixed_{n}; "));
                            format!("a{j}")
                        }
                    };
                    parts.push(format!("out(d[{j}:8], {payload}); "));
                }
            }
        }
        let closing = parts.iter().filter(|p| p.ends_with("(0 | ")).count();
        parts.concat() + "0" + &")".repeat(closing)
    }
}

/// A random program and the system running it, fully determined by `seed`.
pub fn random_system(seed: u64, cfg: &CorpusConfig) -> CorpusSystem {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg: cfg.clone(),
        blocks: Vec::new(),
        next: START,
        records: Vec::new(),
        record_count: 0,
        loops: Vec::new(),
        io: Vec::new(),
        used_ops: BTreeSet::new(),
        used_events: BTreeSet::new(),
        uses_rng: false,
        event_raised_in_branch: false,
        draws: usize::from(cfg.with_param),
    };
    if cfg.with_param {
        g.records.push(("p_addr".into(), "Mem"));
    }
    let first = g.label();
    let mut pre = Vec::new();
    if cfg.with_param {
        pre.push("p_addr := R0".to_string());
    }
    pre.push(format!("jmp @{first}"));
    g.block(START, pre);
    let mut at = first;
    let count = g.rng.gen_range(cfg.min_segments..=cfg.max_segments);
    for _ in 0..count {
        at = g.segment(at, 0);
    }
    if cfg.event_branch && !g.event_raised_in_branch {
        let c = g.cond();
        let (t, after) = (g.label(), g.label());
        g.block(at, vec![format!("cjmp {c}, @{t}, @{after}")]);
        g.event(t, after, true);
        at = after;
    }
    g.block(at, vec!["halt".into()]);
    let mut program_text = g.program_text();
    if cfg.with_param {
        program_text = format!("var p_addr: 64\n{program_text}");
    }
    let partition_toml = g.partition_text(cfg.with_param);
    let attacker = g.attacker();
    let system_text = if cfg.with_param {
        format!("new p0: fixed_{}; (run(@{START}, (p0)) | {attacker})", cfg.n)
    } else {
        format!("run(@{START}, ()) | {attacker}")
    };
    let program = parse_program(&program_text, &partition_toml).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{program_text}"));
    let system = parse_process(&system_text).unwrap_or_else(|e| panic!("generated system does not parse: {e}\n{system_text}"));
    CorpusSystem { name: format!("seed{seed}"), program_text, partition_toml, system_text, program, system }
}

/// Writes `count` systems as `<name>.bir`, `<name>.toml` and `<name>.iml`.
pub fn write_corpus(dir: &Path, seed: u64, count: usize, cfg: &CorpusConfig) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for i in 0..count {
        let s = random_system(seed.wrapping_add(i as u64), cfg);
        std::fs::write(dir.join(format!("{}.bir", s.name)), &s.program_text)?;
        std::fs::write(dir.join(format!("{}.toml", s.name)), &s.partition_toml)?;
        std::fs::write(dir.join(format!("{}.iml", s.name)), &s.system_text)?;
    }
    Ok(())
}

/// Reads every `<name>.bir` with its `.toml` partition and `.iml` system.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusSystem>, String> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "bir"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|bir| {
            let read = |ext: &str| std::fs::read_to_string(bir.with_extension(ext)).map_err(|e| format!("{}: {e}", bir.with_extension(ext).display()));
            let (program_text, partition_toml, system_text) = (read("bir")?, read("toml")?, read("iml")?);
            let program = parse_program(&program_text, &partition_toml).map_err(|e| format!("{}: {e}", bir.display()))?;
            let system = parse_process(&system_text).map_err(|e| format!("{}: {e}", bir.with_extension("iml").display()))?;
            let name = bir.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(CorpusSystem { name, program_text, partition_toml, system_text, program, system })
        })
        .collect()
}

/// A random pure process whose draws are at most `max_bits` wide.
pub fn random_process(seed: u64, max_bits: usize) -> Process {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars = Vec::new();
    let mut fresh = 0;
    gen_proc(&mut rng, max_bits.max(1), 3, &mut vars, &mut fresh)
}

fn gen_exp(rng: &mut ChaCha8Rng, vars: &[(String, usize)], width: usize) -> IExp {
    let same: Vec<&(String, usize)> = vars.iter().filter(|(_, w)| *w == width).collect();
    match same.choose(rng) {
        Some((v, _)) if rng.gen_bool(0.7) => IExp::var(v),
        _ => IExp::Bits(Bits::from_u128(rng.gen_range(0..(1u128 << width)), width)),
    }
}

fn gen_cond(rng: &mut ChaCha8Rng, vars: &[(String, usize)]) -> IExp {
    let w = vars.choose(rng).map_or(1, |(_, w)| *w);
    let (a, b) = (gen_exp(rng, vars, w), gen_exp(rng, vars, w));
    let c = IExp::bin(if rng.gen_bool(0.5) { "=" } else { "<" }, a, b);
    if rng.gen_bool(0.2) {
        IExp::app("¬", vec![c])
    } else {
        c
    }
}

fn gen_proc(rng: &mut ChaCha8Rng, max_bits: usize, depth: usize, vars: &mut Vec<(String, usize)>, fresh: &mut usize) -> Process {
    if depth == 0 || rng.gen_bool(0.15) {
        return Process::Nil;
    }
    let mut name = |p: &str| {
        *fresh += 1;
        format!("{p}{fresh}")
    };
    let d = depth - 1;
    match rng.gen_range(0..9) {
        0 | 1 => {
            let x = name("x");
            let bits = rng.gen_range(1..=max_bits);
            vars.push((x.clone(), bits));
            let p = gen_proc(rng, max_bits, depth, vars, fresh);
            vars.pop();
            Process::new_(&x, bits, p)
        }
        2 => {
            let args = vars.iter().take(2).map(|(v, _)| IExp::var(v)).collect();
            let ev = ["a", "b", "bad"].choose(rng).expect("names");
            Process::event(ev, args, gen_proc(rng, max_bits, d, vars, fresh))
        }
        3 => {
            let c = gen_cond(rng, vars);
            let a = gen_proc(rng, max_bits, d, vars, fresh);
            Process::if_(c, a, gen_proc(rng, max_bits, d, vars, fresh))
        }
        4 => {
            let x = name("y");
            let w = vars.choose(rng).map_or(1, |(_, w)| *w);
            let e = gen_exp(rng, vars, w);
            vars.push((x.clone(), w));
            let p = gen_proc(rng, max_bits, d, vars, fresh);
            vars.pop();
            Process::let_(&x, e, p)
        }
        5 => {
            let a = gen_proc(rng, max_bits, d, vars, fresh);
            Process::par(a, gen_proc(rng, max_bits, d, vars, fresh))
        }
        6 => {
            // a matched exchange: one input waiting, then the output
            let chan = ["c", "d"].choose(rng).expect("chans").to_string();
            let x = name("r");
            let w = vars.choose(rng).map_or(1, |(_, w)| *w);
            let e = gen_exp(rng, vars, w);
            vars.push((x.clone(), w));
            let recv = Process::input(&chan, vec![], &x, gen_proc(rng, max_bits, d, vars, fresh));
            vars.pop();
            let send = Process::output(&chan, vec![], e, gen_proc(rng, max_bits, d, vars, fresh));
            Process::par(recv, send)
        }
        7 => {
            let c = gen_cond(rng, vars);
            Process::assume(c, gen_proc(rng, max_bits, d, vars, fresh))
        }
        _ => {
            let t = name("t");
            let body = gen_proc(rng, max_bits, d.min(1), vars, fresh);
            Process::repl(&t, rng.gen_range(1..=2), body, gen_proc(rng, max_bits, d, vars, fresh))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::partition::LabelKind;

    #[test]
    fn deterministic_and_parseable() {
        for seed in 0..40 {
            let a = random_system(seed, &CorpusConfig::default());
            let b = random_system(seed, &CorpusConfig::default());
            assert_eq!(a.program_text, b.program_text);
            assert_eq!(a.system_text, b.system_text);
        }
    }

    #[test]
    fn covers_every_label_kind() {
        let mut kinds = BTreeSet::new();
        for seed in 0..60 {
            let s = random_system(seed, &CorpusConfig::default());
            for b in &s.program.blocks {
                for st in &b.stmts {
                    if let crate::bir::syntax::BirStmt::Jmp(crate::bir::syntax::BirExp::Const(crate::bir::BirVal::Label(l))) = st {
                        kinds.insert(match s.program.partition.kind(l) {
                            LabelKind::Normal => "normal",
                            LabelKind::Op(_) => "op",
                            LabelKind::Send(_) => "send",
                            LabelKind::Recv(_) => "recv",
                            LabelKind::Rng => "rng",
                            LabelKind::Event(..) => "event",
                        });
                    }
                }
            }
        }
        assert_eq!(kinds.len(), 6, "{kinds:?}");
    }

    #[test]
    fn random_processes_respect_width() {
        for seed in 0..50 {
            let p = random_process(seed, 3);
            let text = p.to_string();
            assert!(!text.contains("fixed_4"), "{text}");
            assert_eq!(parse_process(&text).map(|q| q.alpha_normal()), Ok(p.alpha_normal()), "{text}");
        }
    }
}
