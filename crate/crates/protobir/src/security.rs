//! Prefix-closed trace properties and exact insecurity: the total probability of the
//! shortest prefixes that leave the property.

use crate::bir::env::RandomTape;
use crate::bir::Program;
use crate::bits::Bits;
use crate::iml::engine::{pure, Agent, Engine, EnumConfig, Spawner, System, Trace, Visit};
use crate::iml::Process;
use crate::mixed::check::{bir_engine, extract_runs, inline_runs, run_sites};
use crate::ops::OpRegistry;
use crate::sym::solver::Solver;
use crate::sym::step::SymConfig;
use crate::trace::{dump_plain, Event};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Which fresh values count as secrets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    All,
    /// The n-th fresh value of the trace, counting from 1.
    Nth(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropertyKind {
    /// Every `accept_s` is preceded by an `accept_c` with the same arguments.
    Auth { accept_s: String, accept_c: String },
    /// No message on one of `channels` (any channel when empty) carries a selected
    /// fresh value drawn earlier in the trace.
    Secrecy { channels: Vec<String>, selector: Selector },
    /// The named event never happens.
    Forbid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceProperty {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyFile {
    name: Option<String>,
    mode: String,
    accept_s: Option<String>,
    accept_c: Option<String>,
    #[serde(default)]
    channels: Vec<String>,
    secret: Option<toml::Value>,
    event: Option<String>,
}

impl TraceProperty {
    pub fn auth(accept_s: &str, accept_c: &str) -> Self {
        TraceProperty {
            name: format!("auth({accept_s}, {accept_c})"),
            kind: PropertyKind::Auth { accept_s: accept_s.into(), accept_c: accept_c.into() },
        }
    }

    pub fn weak_secrecy(channels: &[&str], selector: Selector) -> Self {
        TraceProperty {
            name: "weak-secrecy".into(),
            kind: PropertyKind::Secrecy { channels: channels.iter().map(|c| c.to_string()).collect(), selector },
        }
    }

    pub fn forbid(event: &str) -> Self {
        TraceProperty { name: format!("no {event}"), kind: PropertyKind::Forbid(event.into()) }
    }

    /// Reads `mode = "auth" | "secrecy" | "forbid"` with the matching fields.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let f: PropertyFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let need = |x: Option<String>, what: &str| x.ok_or_else(|| format!("mode {} needs `{what}`", f.mode));
        let mut p = match f.mode.as_str() {
            "auth" => TraceProperty::auth(&need(f.accept_s.clone(), "accept_s")?, &need(f.accept_c.clone(), "accept_c")?),
            "secrecy" => {
                let selector = match &f.secret {
                    None => Selector::All,
                    Some(toml::Value::String(s)) if s == "all" => Selector::All,
                    Some(toml::Value::Integer(n)) if *n >= 1 => Selector::Nth(*n as usize),
                    Some(other) => return Err(format!("secret must be \"all\" or a positive index, got {other}")),
                };
                let chans: Vec<&str> = f.channels.iter().map(String::as_str).collect();
                TraceProperty::weak_secrecy(&chans, selector)
            }
            "forbid" => TraceProperty::forbid(&need(f.event.clone(), "event")?),
            other => return Err(format!("unknown mode `{other}`")),
        };
        if let Some(n) = f.name {
            p.name = n;
        }
        Ok(p)
    }

    /// Index of the event at which the trace first leaves the property.
    pub fn first_violation(&self, events: &[Event]) -> Option<usize> {
        match &self.kind {
            PropertyKind::Auth { accept_s, accept_c } => {
                let mut seen: BTreeSet<&[Bits]> = BTreeSet::new();
                for (i, e) in events.iter().enumerate() {
                    if let Event::Ev { name, args } = e {
                        if name == accept_c {
                            seen.insert(args);
                        }
                        if name == accept_s && !seen.contains(args.as_slice()) {
                            return Some(i);
                        }
                    }
                }
                None
            }
            PropertyKind::Secrecy { channels, selector } => {
                let mut secrets: BTreeSet<&Bits> = BTreeSet::new();
                let mut draws = 0;
                for (i, e) in events.iter().enumerate() {
                    match e {
                        Event::Fresh { value, .. } => {
                            draws += 1;
                            if *selector == Selector::All || *selector == Selector::Nth(draws) {
                                secrets.insert(value);
                            }
                        }
                        Event::Msg { chan, payload, .. } | Event::Out { chan, payload, .. }
                            if (channels.is_empty() || channels.contains(chan)) && secrets.contains(payload) =>
                        {
                            return Some(i);
                        }
                        _ => {}
                    }
                }
                None
            }
            PropertyKind::Forbid(ev) => events.iter().position(|e| matches!(e, Event::Ev { name, .. } if name == ev)),
        }
    }

    pub fn holds(&self, events: &[Event]) -> bool {
        self.first_violation(events).is_none()
    }
}

/// The shortest violating prefixes of `traces`, each once, with the probability of
/// the prefix.
pub fn shortest_violations<A>(traces: &[Trace<A>], psi: &TraceProperty) -> Vec<(Vec<Event>, BigRational)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in traces {
        if let Some(i) = psi.first_violation(&t.path.events) {
            let prefix = t.path.events[..=i].to_vec();
            if seen.insert(prefix.clone()) {
                let pr = t.path.probs[..=i].iter().fold(BigRational::one(), |a, p| a * p);
                out.push((prefix, pr));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsecurityResult {
    pub value: BigRational,
    pub violating: Vec<(Vec<Event>, BigRational)>,
    /// Some trace was cut off without violating, so `value` may be too small.
    pub lower_bound: bool,
    /// Tapes enumerated (program layer only).
    pub tape_count: Option<usize>,
    pub n: usize,
    pub k: usize,
}

impl InsecurityResult {
    pub fn to_text(&self) -> String {
        let mut s = format!("insecurity: {}\n", format_rational(&self.value));
        if self.lower_bound {
            s += "note: enumeration was cut off; this is a lower bound\n";
        }
        if let Some(t) = self.tape_count {
            s += &format!("tapes: {t}\n");
        }
        s += &format!("violating prefixes: {}\n", self.violating.len());
        for (ev, pr) in self.violating.iter().take(20) {
            s += &format!("  {} : {}\n", pr, dump_plain(ev).trim_end().replace('\n', " ; "));
        }
        s
    }
}

/// `num/den (decimal)` with six decimal places, rounded down.
pub fn format_rational(r: &BigRational) -> String {
    let scale = BigInt::from(10u32).pow(6);
    let scaled = (r.numer() * &scale) / r.denom();
    let (int, frac) = (&scaled / &scale, (&scaled % &scale).abs());
    format!("{}/{} ({}.{:06})", r.numer(), r.denom(), int, frac.to_string().parse::<u64>().unwrap_or(0))
}

/// Sums the probabilities of the shortest violating prefixes of `sys`, cutting the
/// search below each violation.
pub fn insecurity<A: Agent, S: Spawner<A>>(engine: &Engine<'_, S>, sys: &System<A>, cfg: EnumConfig, psi: &TraceProperty) -> InsecurityResult {
    let mut violating = Vec::new();
    let mut lower_bound = false;
    let mut prefix = |p: &crate::iml::Path| {
        let last = p.len() - 1;
        if psi.first_violation(&p.events) == Some(last) {
            violating.push((p.events.clone(), p.pr()));
            Visit::Prune
        } else {
            Visit::Continue
        }
    };
    engine.explore(sys, cfg, &mut prefix, &mut |_, end, _| {
        if end.is_partial() {
            lower_bound = true;
        }
    });
    let value = violating.iter().fold(BigRational::zero(), |a, (_, p)| a + p);
    InsecurityResult { value, violating, lower_bound, tape_count: None, n: 0, k: 0 }
}

/// Insecurity of a pure model process.
pub fn insecurity_iml(ops: &OpRegistry, p: &Process, depth: usize, max_fresh_bits: usize, psi: &TraceProperty) -> InsecurityResult {
    let sys: System<crate::iml::NoAgent> = System::new(p.clone());
    insecurity(&pure(ops), &sys, EnumConfig { depth, max_fresh_bits }, psi)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InsecError {
    #[error("{bits} tape bits exceed the budget of {budget}")]
    Budget { bits: usize, budget: usize },
    #[error("{0}")]
    Model(String),
}

/// Settings for the program-layer computation.
#[derive(Clone, Debug)]
pub struct BirInsecConfig {
    /// Bits per RNG call; also the tape word width.
    pub n: usize,
    /// Tape words per run site.
    pub k: usize,
    pub depth: usize,
    /// Largest total number of tape bits enumerated.
    pub width_budget: usize,
    pub max_fresh_bits: usize,
    pub loop_cap: u64,
}

impl Default for BirInsecConfig {
    fn default() -> Self {
        BirInsecConfig { n: 2, k: 1, depth: 64, width_budget: 16, max_fresh_bits: 8, loop_cap: 64 }
    }
}

/// Insecurity of `system` with concrete participants, averaged over every assignment
/// of `k` tape words of `n` bits to each run site.
pub fn insecurity_bir(
    ops: &OpRegistry,
    prog: &Program,
    system: &Process,
    cfg: &BirInsecConfig,
    psi: &TraceProperty,
) -> Result<InsecurityResult, InsecError> {
    let sites = run_sites(system).len();
    let bits = cfg.n * cfg.k * sites;
    if bits > cfg.width_budget {
        return Err(InsecError::Budget { bits, budget: cfg.width_budget });
    }
    let tapes_per_site = if cfg.k == 0 { vec![RandomTape::empty(cfg.n)] } else { RandomTape::all(cfg.n, cfg.k) };
    let mut total = BigRational::zero();
    let mut violating = Vec::new();
    let mut lower_bound = false;
    let mut count = 0;
    let combos = tapes_per_site.len().pow(sites as u32);
    let sys: System<crate::mixed::BirAgent> = System::new(system.clone());
    let enum_cfg = EnumConfig { depth: cfg.depth, max_fresh_bits: cfg.max_fresh_bits };
    for mut idx in 0..combos {
        let mut tapes = Vec::with_capacity(sites);
        for _ in 0..sites {
            tapes.push(tapes_per_site[idx % tapes_per_site.len()].clone());
            idx /= tapes_per_site.len();
        }
        let engine = bir_engine(prog, ops, cfg.n, cfg.loop_cap, tapes);
        let r = insecurity(&engine, &sys, enum_cfg, psi);
        total += r.value;
        lower_bound |= r.lower_bound;
        violating.extend(r.violating);
        count += 1;
    }
    let value = total / BigRational::from_integer(BigInt::from(combos));
    let scale = BigRational::new(BigInt::one(), BigInt::from(combos));
    let violating = violating.into_iter().map(|(e, p)| (e, p * &scale)).collect();
    Ok(InsecurityResult { value, violating, lower_bound, tape_count: Some(count), n: cfg.n, k: cfg.k })
}

#[derive(Clone, Debug)]
pub struct PreservationReport {
    pub bir: InsecurityResult,
    pub iml: InsecurityResult,
    /// The program-layer insecurity does not exceed the model's.
    pub holds: bool,
    pub model: Process,
}

impl PreservationReport {
    pub fn to_text(&self) -> String {
        format!(
            "program layer: {}\nmodel layer:   {}\nbound holds: {}\n",
            format_rational(&self.bir.value),
            format_rational(&self.iml.value),
            self.holds
        )
    }
}

/// Compares the insecurity of `system` with concrete participants against the
/// insecurity of the same system with every run replaced by its extracted model.
#[allow(clippy::too_many_arguments)]
pub fn check_attack_preservation(
    ops: &OpRegistry,
    prog: &Program,
    solver: &dyn Solver,
    system: &Process,
    cfg: &BirInsecConfig,
    sym: &SymConfig,
    tree_depth: usize,
    psi: &TraceProperty,
) -> Result<PreservationReport, InsecError> {
    let models = extract_runs(prog, ops, solver, system, sym, tree_depth).map_err(InsecError::Model)?;
    let model = inline_runs(system, &models).map_err(InsecError::Model)?;
    let bir = insecurity_bir(ops, prog, system, cfg, psi)?;
    let mut iml = insecurity_iml(ops, &model, cfg.depth, cfg.max_fresh_bits.max(cfg.n), psi);
    iml.n = cfg.n;
    Ok(PreservationReport { holds: bir.value <= iml.value, bir, iml, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bir::parse::parse_program;
    use crate::iml::engine::total_pr;
    use crate::iml::parse_process;
    use crate::sym::solver::EnumSolver;

    fn ev(name: &str, args: &[u128]) -> Event {
        Event::Ev { name: name.into(), args: args.iter().map(|a| Bits::from_u128(*a, 8)).collect() }
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn auth_examples() {
        let p = TraceProperty::auth("accept_s", "accept_c");
        assert!(p.holds(&[ev("accept_c", &[1, 2]), ev("accept_s", &[1, 2])]));
        assert!(!p.holds(&[ev("accept_s", &[1, 2])]));
        assert!(!p.holds(&[ev("accept_c", &[1, 2]), ev("accept_s", &[1, 3])]));
    }

    #[test]
    fn secrecy_examples() {
        let s = Bits::from_u128(5, 4);
        let fresh = Event::Fresh { value: s.clone(), index: None };
        let leak = Event::Msg { chan: "c".into(), ids: vec![], payload: s.clone() };
        let hidden = Event::Msg { chan: "c".into(), ids: vec![], payload: Bits::from_u128(0xab, 8) };
        let p = TraceProperty::weak_secrecy(&["c"], Selector::All);
        assert!(!p.holds(&[fresh.clone(), leak.clone()]));
        assert!(p.holds(&[fresh.clone(), hidden]));
        assert!(p.holds(&[]));
        assert!(TraceProperty::weak_secrecy(&["d"], Selector::All).holds(&[fresh.clone(), leak.clone()]));
        assert!(TraceProperty::weak_secrecy(&[], Selector::Nth(2)).holds(&[fresh, leak]));
    }

    #[test]
    fn config_file() {
        let p = TraceProperty::from_toml("mode = \"auth\"\naccept_s = \"accept\"\naccept_c = \"send\"\n").unwrap();
        assert_eq!(p, TraceProperty::auth("accept", "send"));
        let s = TraceProperty::from_toml("mode = \"secrecy\"\nchannels = [\"c\"]\nsecret = 1\n").unwrap();
        assert_eq!(s.kind, PropertyKind::Secrecy { channels: vec!["c".into()], selector: Selector::Nth(1) });
        assert!(TraceProperty::from_toml("mode = \"bogus\"").is_err());
    }

    #[test]
    fn minimal_prefixes_are_not_double_counted() {
        let ops = OpRegistry::default();
        let p = parse_process("new x: fixed_1; event bad(x); event bad(x); 0").unwrap();
        let traces = pure(&ops).enumerate(&System::<crate::iml::NoAgent>::new(p.clone()), EnumConfig::default());
        let v = shortest_violations(&traces, &TraceProperty::forbid("bad"));
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|(e, _)| e.len() == 2));
        let total = v.iter().fold(BigRational::zero(), |a, (_, p)| a + p);
        assert_eq!(total, insecurity_iml(&ops, &p, 64, 8, &TraceProperty::forbid("bad")).value);
    }

    #[test]
    fn iml_examples() {
        let ops = OpRegistry::default();
        let bad = TraceProperty::forbid("bad");
        assert_eq!(insecurity_iml(&ops, &Process::Nil, 10, 8, &bad).value, r(0, 1));
        let p = parse_process("new x: fixed_1; if x = 1:1 then event bad(); 0").unwrap();
        assert_eq!(insecurity_iml(&ops, &p, 10, 8, &bad).value, r(1, 2));
        let p = parse_process("event bad(); 0").unwrap();
        assert_eq!(insecurity_iml(&ops, &p, 10, 8, &bad).value, r(1, 1));
    }

    #[test]
    fn complement_adds_to_one() {
        let ops = OpRegistry::default();
        let p = parse_process("new x: fixed_2; if x < 1:2 then event bad(x); 0 else event ok(x); 0").unwrap();
        let bad = TraceProperty::forbid("bad");
        let insec = insecurity_iml(&ops, &p, 20, 8, &bad);
        let traces = pure(&ops).enumerate(&System::<crate::iml::NoAgent>::new(p), EnumConfig::default());
        let safe: Vec<_> = traces.into_iter().filter(|t| bad.holds(&t.path.events)).collect();
        assert_eq!(insec.value + total_pr(&safe), BigRational::one());
    }

    const ZERO_BAD: &str = "\
block 100:
  RET := @101
  jmp @9000
block 101:
  cjmp (load(Mem, (R0 + 1:64), 128) == 0:128), @102, @103
block 102:
  RET := @103
  jmp @8000
block 103:
  halt
";
    const ZERO_BAD_PART: &str = "rng = [9000]\n[events.bad]\nlabels = [8000]\narity = 0\n[starts.100]\nparams = []\n";

    #[test]
    fn bir_tape_average() {
        let ops = OpRegistry::default();
        let prog = parse_program(ZERO_BAD, ZERO_BAD_PART).unwrap();
        let sys = parse_process("run(@100, ())").unwrap();
        let cfg = BirInsecConfig { n: 2, k: 1, ..BirInsecConfig::default() };
        let r = insecurity_bir(&ops, &prog, &sys, &cfg, &TraceProperty::forbid("bad")).unwrap();
        assert_eq!(r.value, BigRational::new(1.into(), 4.into()));
        assert_eq!(r.tape_count, Some(4));
        let never = insecurity_bir(&ops, &prog, &sys, &cfg, &TraceProperty::forbid("other")).unwrap();
        assert!(never.value.is_zero());
    }

    #[test]
    fn no_runs_coincide() {
        let ops = OpRegistry::default();
        let prog = parse_program(ZERO_BAD, ZERO_BAD_PART).unwrap();
        let p = parse_process("new x: fixed_2; if x = 0:2 then event bad(); 0").unwrap();
        let bad = TraceProperty::forbid("bad");
        let cfg = BirInsecConfig { n: 2, k: 0, ..BirInsecConfig::default() };
        let b = insecurity_bir(&ops, &prog, &p, &cfg, &bad).unwrap();
        assert_eq!(b.value, insecurity_iml(&ops, &p, cfg.depth, 8, &bad).value);
    }

    #[test]
    fn preservation_on_small_program() {
        let ops = OpRegistry::default();
        let prog = parse_program(ZERO_BAD, ZERO_BAD_PART).unwrap();
        let sys = parse_process("run(@100, ())").unwrap();
        let cfg = BirInsecConfig { n: 2, k: 1, ..BirInsecConfig::default() };
        let sym = SymConfig { n: 2, tape_width: 2, ..SymConfig::default() };
        let rep = check_attack_preservation(&ops, &prog, &EnumSolver::default(), &sys, &cfg, &sym, 32, &TraceProperty::forbid("bad")).unwrap();
        assert!(rep.holds, "{}", rep.to_text());
        assert_eq!(rep.bir.value, rep.iml.value);
        let nil = check_attack_preservation(&ops, &prog, &EnumSolver::default(), &Process::Nil, &cfg, &sym, 32, &TraceProperty::forbid("bad")).unwrap();
        assert!(nil.holds && nil.bir.value.is_zero() && nil.iml.value.is_zero());
    }

    #[test]
    fn rational_format() {
        assert_eq!(format_rational(&r(1, 4)), "1/4 (0.250000)");
        assert_eq!(format_rational(&r(0, 1)), "0/1 (0.000000)");
    }
}
