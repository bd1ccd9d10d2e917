//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 other errors, 2 parse error, 3 stuck, 4 budget or bound hit,
//! 5 property violated, 6 layers diverge. Errors are printed to stderr as one JSON line.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use protobir::bir::env::RandomTape;
use protobir::bir::parse::{parse_program, print_program};
use protobir::bir::step::{run_concrete, BirConfig, RunEnd, ScriptDriver};
use protobir::bir::{BirState, Label, Program};
use protobir::bits::Bits;
use protobir::corpus::{load_corpus, write_corpus, CorpusConfig};
use protobir::extract::{tree_to_iml, ExtractConfig};
use protobir::iml::engine::End;
use protobir::iml::{parse_process, pretty, Engine, Process, System};
use protobir::mixed::check::bir_engine;
use protobir::mixed::{differential_run_bir_sbir, differential_run_sbir_iml, extract_runs, inline_runs, BirAgent, DiffConfig, SymAgent, SymSpawner};
use protobir::ops::OpRegistry;
use protobir::security::{check_attack_preservation, format_rational, insecurity_bir, insecurity_iml, BirInsecConfig, InsecError, TraceProperty};
use protobir::sym::{build_tree, EnumSolver, SymConfig, SymState};
use protobir::trace::dump;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "protobir", version, about = "Crypto-aware BIR: run, symbolically execute, extract models, check security")]
struct Cli {
    /// Operation registry (TOML); the built-in registry when unset.
    #[arg(long, global = true, env = "PROTOBIR_OPS")]
    ops: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a program (`.bir`) or process (`.iml`) and print its canonical form.
    Parse {
        file: PathBuf,
        #[command(flatten)]
        part: PartArg,
    },
    /// Execute a program concretely.
    Run(RunArgs),
    /// Build the symbolic execution tree of a program.
    Symexec(SymArgs),
    /// Translate a program into a model process.
    Extract {
        #[command(flatten)]
        sym: SymArgs,
        /// Replication bound for summarized loops.
        #[arg(long)]
        repl_bound: Option<u64>,
    },
    /// Run a system whose `run` members execute the program, once.
    Mixed(MixedArgs),
    /// Run both differential checks over a corpus directory.
    Difftest(DiffArgs),
    /// Compute the insecurity of a system against a property.
    Insec(InsecArgs),
    /// Check that the program-layer insecurity is bounded by the model's.
    Check(InsecArgs),
    /// Write a seeded corpus of programs and systems.
    Corpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
}

#[derive(Args)]
struct PartArg {
    /// Label partition (TOML); defaults to the program path with a `.toml` extension.
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    program: PathBuf,
    #[command(flatten)]
    part: PartArg,
    /// Random tape: whitespace-separated hex words.
    #[arg(long)]
    tape: Option<PathBuf>,
    /// Seed for a generated tape when no tape file is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bits per RNG call.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Start label; the first block by default.
    #[arg(long)]
    start: Option<String>,
    /// Run argument (hex or binary literal), repeatable.
    #[arg(long = "arg")]
    args: Vec<String>,
    /// Message served to receives when no earlier send matches, repeatable.
    #[arg(long)]
    input: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct SymArgs {
    program: PathBuf,
    #[command(flatten)]
    part: PartArg,
    /// Start label; every declared start (or the first block) by default.
    #[arg(long)]
    start: Option<String>,
    /// Bits per RNG call.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Steps per path.
    #[arg(long, default_value_t = 256)]
    depth: usize,
    /// Free bits the solver may enumerate.
    #[arg(long, default_value_t = 20)]
    width_budget: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct MixedArgs {
    program: PathBuf,
    system: PathBuf,
    #[command(flatten)]
    part: PartArg,
    #[arg(long, value_enum, default_value_t = Flavor::Bir)]
    flavor: Flavor,
    /// Tape used by every run site (concrete flavor).
    #[arg(long)]
    tape: Option<PathBuf>,
    /// Seed for generated tapes and for `new` draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 256)]
    depth: usize,
    #[arg(long, default_value_t = 20)]
    width_budget: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct DiffArgs {
    dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Lockstep steps and enumerated events per check.
    #[arg(long, default_value_t = 200)]
    depth: usize,
    #[arg(long, default_value_t = 20)]
    width_budget: u32,
    /// Concrete runs per system.
    #[arg(long, default_value_t = 4)]
    tapes: usize,
    /// RNG calls per run that the symbolic side allows.
    #[arg(long, default_value_t = 2)]
    max_rng: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Layer {
    Bir,
    Iml,
}

#[derive(Clone, Copy, ValueEnum)]
enum Flavor {
    Bir,
    Sym,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args)]
struct InsecArgs {
    /// System process (`.iml`).
    system: PathBuf,
    /// Property (TOML).
    #[arg(long)]
    property: PathBuf,
    /// Program executed by the system's `run` members.
    #[arg(long)]
    program: Option<PathBuf>,
    #[command(flatten)]
    part: PartArg,
    #[arg(long, value_enum, default_value_t = Layer::Iml)]
    layer: Layer,
    /// Bits per RNG call.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Tape words per run site.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 64)]
    depth: usize,
    /// Largest number of tape bits enumerated.
    #[arg(long, default_value_t = 16)]
    width_budget: usize,
    /// Widest `new` that is enumerated.
    #[arg(long, default_value_t = 8)]
    max_fresh_bits: usize,
}

enum Failure {
    Parse(String),
    Stuck(String),
    Budget(String),
    Violation(String),
    Divergence(String),
    Other(String),
}

impl Failure {
    fn parts(&self) -> (&'static str, u8, &str) {
        match self {
            Failure::Parse(m) => ("parse", 2, m),
            Failure::Stuck(m) => ("stuck", 3, m),
            Failure::Budget(m) => ("budget", 4, m),
            Failure::Violation(m) => ("violation", 5, m),
            Failure::Divergence(m) => ("divergence", 6, m),
            Failure::Other(m) => ("error", 1, m),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn load_ops(path: &Option<PathBuf>) -> Result<OpRegistry, Failure> {
    match path {
        Some(p) => OpRegistry::load(p).map_err(|e| Failure::Parse(format!("{}: {e}", p.display()))),
        None => Ok(OpRegistry::default()),
    }
}

fn load_program(path: &Path, part: &PartArg) -> Result<Program, Failure> {
    let text = read(path)?;
    let part_path = part.partition.clone().unwrap_or_else(|| path.with_extension("toml"));
    let part_text = if part.partition.is_some() || part_path.exists() { read(&part_path)? } else { String::new() };
    parse_program(&text, &part_text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn load_process(path: &Path) -> Result<Process, Failure> {
    parse_process(&read(path)?).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn parse_bits(s: &str) -> Result<Bits, Failure> {
    Bits::parse(s).ok_or_else(|| Failure::Parse(format!("`{s}` is not a 0x/0b literal")))
}

fn load_tape(path: &Path) -> Result<RandomTape, Failure> {
    RandomTape::parse(&read(path)?).ok_or_else(|| Failure::Parse(format!("{}: expected equal-width hex words", path.display())))
}

fn seeded_tape(seed: u64, n: usize, words: usize) -> RandomTape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RandomTape::new(n, (0..words).map(|_| Bits::from_bools((0..n).map(|_| rng.gen()).collect())).collect())
}

fn trace_text(events: &[protobir::trace::Event], probs: &[num_rational::BigRational], format: Format) -> String {
    match format {
        Format::Json => {
            let steps: Vec<_> = events
                .iter()
                .zip(probs)
                .map(|(e, p)| json!({ "event": e.tag(), "payload": e.payload_hex(), "pr": p.to_string() }))
                .collect();
            format!("{}\n", json!(steps))
        }
        _ => dump(events.iter().zip(probs)),
    }
}

fn cmd_parse(file: &Path, part: &PartArg) -> Outcome {
    if file.extension().is_some_and(|x| x == "iml") {
        print!("{}", pretty(&load_process(file)?));
    } else {
        let prog = load_program(file, part)?;
        print!("{}", print_program(&prog));
        let toml = prog.partition.to_toml();
        if !toml.trim().is_empty() {
            println!("\n# partition\n{}", toml.lines().map(|l| format!("# {l}")).collect::<Vec<_>>().join("\n"));
        }
    }
    Ok(())
}

fn cmd_run(ops: &OpRegistry, a: &RunArgs) -> Outcome {
    let prog = load_program(&a.program, &a.part)?;
    let Some(pc) = a.start.as_deref().map(Label::parse).or_else(|| prog.entry().cloned()) else {
        // nothing to execute
        print!("{}", trace_text(&[], &[], a.format));
        return Ok(());
    };
    let tape = match &a.tape {
        Some(p) => load_tape(p)?,
        None => seeded_tape(a.seed, a.n, 64),
    };
    let args = a.args.iter().map(|s| parse_bits(s)).collect::<Result<Vec<_>, _>>()?;
    let inputs = a.input.iter().map(|s| parse_bits(s)).collect::<Result<Vec<_>, _>>()?;
    let s0 = BirState::start(&prog, pc, &args, tape).map_err(|e| Failure::Stuck(e.to_string()))?;
    let t = run_concrete(&prog, ops, &BirConfig { n: a.n }, s0, &mut ScriptDriver::new(inputs), a.max_steps);
    let events: Vec<_> = t.events().cloned().collect();
    let ones = vec![num_rational::BigRational::from_integer(1.into()); events.len()];
    print!("{}", trace_text(&events, &ones, a.format));
    match t.end {
        RunEnd::Halted => Ok(()),
        RunEnd::Error(e) => Err(Failure::Stuck(format!("at {}: {e}", t.final_state.pc))),
        RunEnd::StepBound => Err(Failure::Budget(format!("no halt within {} steps", a.max_steps))),
    }
}

fn starts(prog: &Program, start: &Option<String>) -> Vec<Label> {
    match start {
        Some(s) => vec![Label::parse(s)],
        None if !prog.partition.starts.is_empty() => prog.partition.starts.keys().cloned().collect(),
        None => prog.entry().cloned().into_iter().collect(),
    }
}

fn sym_trees(ops: &OpRegistry, a: &SymArgs) -> Result<Vec<(Label, Vec<String>, protobir::sym::BuiltTree)>, Failure> {
    let prog = load_program(&a.program, &a.part)?;
    let solver = EnumSolver::new(a.width_budget, ops.clone());
    let cfg = SymConfig { n: a.n, tape_width: a.n, ..SymConfig::default() };
    let mut out = Vec::new();
    for pc in starts(&prog, &a.start) {
        let params = SymState::params_of(&prog, &pc);
        let s0 = SymState::start(&prog, pc.clone(), &params).map_err(|e| Failure::Stuck(e.to_string()))?;
        out.push((pc, params, build_tree(&prog, ops, &cfg, &solver, s0, a.depth)));
    }
    Ok(out)
}

fn cmd_symexec(ops: &OpRegistry, a: &SymArgs) -> Outcome {
    let trees = sym_trees(ops, a)?;
    match a.format {
        Format::Dot => trees.iter().for_each(|(_, _, b)| print!("{}", b.tree.to_dot())),
        Format::Json => {
            let v: Vec<_> = trees
                .iter()
                .map(|(pc, params, b)| json!({ "start": pc.to_string(), "params": params, "diagnostics": b.diagnostics, "tree": b.tree.to_json() }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        }
        Format::Text => {
            for (pc, params, b) in &trees {
                println!("start @{pc} ({}): {} nodes, {} branches", params.join(", "), b.tree.node_count(), b.tree.branch_count());
                for d in &b.diagnostics {
                    println!("  note: {d}");
                }
                for (i, p) in b.tree.paths().iter().enumerate() {
                    let evs: Vec<String> = p.iter().map(|e| e.to_string()).collect();
                    println!("  path {i}: {}", evs.join(" ; "));
                }
            }
        }
    }
    Ok(())
}

fn cmd_extract(ops: &OpRegistry, a: &SymArgs, repl_bound: Option<u64>) -> Outcome {
    let trees = sym_trees(ops, a)?;
    let many = trees.len() > 1;
    for (pc, params, b) in &trees {
        let x = tree_to_iml(&b.tree, &ExtractConfig { repl_bound }).map_err(|e| Failure::Budget(format!("@{pc}: {e}")))?;
        for d in b.diagnostics.iter().chain(&x.diagnostics) {
            eprintln!("note: @{pc}: {d}");
        }
        if many {
            println!("// @{pc}({})", params.join(", "));
        }
        print!("{}", pretty(&x.process));
        if many {
            println!();
        }
    }
    Ok(())
}

fn end_outcome(end: &End) -> Outcome {
    match end {
        End::Done => Ok(()),
        End::Stuck(m) | End::Error(m) => Err(Failure::Stuck(m.clone())),
        End::Depth => Err(Failure::Budget("depth bound reached".into())),
        End::Budget(m) => Err(Failure::Budget(m.clone())),
    }
}

fn cmd_mixed(ops: &OpRegistry, a: &MixedArgs) -> Outcome {
    let prog = load_program(&a.program, &a.part)?;
    let system = load_process(&a.system)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut choose = |n: usize| Bits::from_bools((0..n).map(|_| rng.gen()).collect());
    let (events, probs, end) = match a.flavor {
        Flavor::Bir => {
            let sites = protobir::mixed::run_sites(&system).len();
            let tapes = match &a.tape {
                Some(p) => vec![load_tape(p)?; sites],
                None => (0..sites).map(|i| seeded_tape(a.seed.wrapping_add(i as u64 + 1), a.n, 64)).collect(),
            };
            let engine = bir_engine(&prog, ops, a.n, SymConfig::default().loop_cap, tapes);
            let t = engine.run(&System::<BirAgent>::new(system), a.depth, &mut choose);
            (t.path.events, t.path.probs, t.end)
        }
        Flavor::Sym => {
            let solver = EnumSolver::new(a.width_budget, ops.clone());
            let cfg = SymConfig { n: a.n, tape_width: a.n, ..SymConfig::default() };
            let engine = Engine::new(ops, SymSpawner::new(&prog, ops, &cfg, &solver));
            let t = engine.run(&System::<SymAgent>::new(system), a.depth, &mut choose);
            (t.path.events, t.path.probs, t.end)
        }
    };
    print!("{}", trace_text(&events, &probs, a.format));
    end_outcome(&end)
}

fn cmd_difftest(ops: &OpRegistry, a: &DiffArgs) -> Outcome {
    let systems = load_corpus(&a.dir).map_err(Failure::Parse)?;
    let solver = EnumSolver::new(a.width_budget, ops.clone());
    let cfg = DiffConfig {
        sym: SymConfig { n: a.n, tape_width: a.n, max_rng: Some(a.max_rng), ..SymConfig::default() },
        depth: a.depth,
        tree_depth: a.depth,
        max_fresh_bits: a.n,
    };
    let mut failed = Vec::new();
    for (i, s) in systems.iter().enumerate() {
        let base = a.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let mut reports = Vec::new();
        for t in 0..a.tapes {
            let seed = base.wrapping_mul(31).wrapping_add(t as u64);
            let tape = seeded_tape(seed, a.n, a.max_rng as usize);
            reports.push(("bir/sbir", differential_run_bir_sbir(&s.program, ops, &solver, &s.system, &[tape], &cfg, seed)));
        }
        reports.push(("sbir/iml", differential_run_sbir_iml(&s.program, ops, &solver, &s.system, &cfg)));
        let ok = reports.iter().all(|(_, r)| r.ok);
        println!("{} {}", s.name, if ok { "ok" } else { "FAIL" });
        for (kind, r) in reports.iter().filter(|(_, r)| !r.ok) {
            println!("  {kind}:\n{}", r.to_text().lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n"));
        }
        if !ok {
            failed.push(s.name.clone());
        }
    }
    println!("{}/{} systems ok", systems.len() - failed.len(), systems.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Divergence(format!("simulation failed for {}", failed.join(", "))))
    }
}

struct InsecInputs {
    system: Process,
    program: Program,
    psi: TraceProperty,
    cfg: BirInsecConfig,
}

fn insec_inputs(a: &InsecArgs) -> Result<InsecInputs, Failure> {
    let system = load_process(&a.system)?;
    let psi = TraceProperty::from_toml(&read(&a.property)?).map_err(Failure::Parse)?;
    let program = match &a.program {
        Some(p) => load_program(p, &a.part)?,
        None if system.has_run() => return Err(Failure::Other("the system starts programs; pass --program".into())),
        None => parse_program("", "").map_err(|e| Failure::Parse(e.to_string()))?,
    };
    let cfg = BirInsecConfig { n: a.n, k: a.k, depth: a.depth, width_budget: a.width_budget, max_fresh_bits: a.max_fresh_bits, ..BirInsecConfig::default() };
    Ok(InsecInputs { system, program, psi, cfg })
}

fn insec_error(e: InsecError) -> Failure {
    match e {
        InsecError::Budget { .. } => Failure::Budget(e.to_string()),
        InsecError::Model(m) => Failure::Stuck(m),
    }
}

fn sym_for(cfg: &BirInsecConfig) -> SymConfig {
    SymConfig { n: cfg.n, tape_width: cfg.n, max_rng: Some(cfg.k as u64), ..SymConfig::default() }
}

fn cmd_insec(ops: &OpRegistry, a: &InsecArgs) -> Outcome {
    let x = insec_inputs(a)?;
    let r = match a.layer {
        Layer::Bir => insecurity_bir(ops, &x.program, &x.system, &x.cfg, &x.psi).map_err(insec_error)?,
        Layer::Iml => {
            let solver = EnumSolver::default();
            let models = extract_runs(&x.program, ops, &solver, &x.system, &sym_for(&x.cfg), x.cfg.depth * 4).map_err(Failure::Stuck)?;
            let model = inline_runs(&x.system, &models).map_err(Failure::Stuck)?;
            insecurity_iml(ops, &model, x.cfg.depth, x.cfg.max_fresh_bits, &x.psi)
        }
    };
    print!("{}", r.to_text());
    if !r.value.is_zero() {
        Err(Failure::Violation(format!("property violated with probability {}", format_rational(&r.value))))
    } else if r.lower_bound {
        Err(Failure::Budget("enumeration was cut off; zero is only a lower bound".into()))
    } else {
        Ok(())
    }
}

fn cmd_check(ops: &OpRegistry, a: &InsecArgs) -> Outcome {
    let x = insec_inputs(a)?;
    let solver = EnumSolver::default();
    let r = check_attack_preservation(ops, &x.program, &solver, &x.system, &x.cfg, &sym_for(&x.cfg), x.cfg.depth * 4, &x.psi).map_err(insec_error)?;
    print!("{}", r.to_text());
    if r.holds {
        Ok(())
    } else {
        Err(Failure::Divergence("program-layer insecurity exceeds the model's".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = load_ops(&cli.ops).and_then(|ops| match &cli.cmd {
        Cmd::Parse { file, part } => cmd_parse(file, part),
        Cmd::Run(a) => cmd_run(&ops, a),
        Cmd::Symexec(a) => cmd_symexec(&ops, a),
        Cmd::Extract { sym, repl_bound } => cmd_extract(&ops, sym, *repl_bound),
        Cmd::Mixed(a) => cmd_mixed(&ops, a),
        Cmd::Difftest(a) => cmd_difftest(&ops, a),
        Cmd::Insec(a) => cmd_insec(&ops, a),
        Cmd::Check(a) => cmd_check(&ops, a),
        Cmd::Corpus { dir, seed, count } => {
            write_corpus(dir, *seed, *count, &CorpusConfig::default()).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))
        }
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, code, msg) = f.parts();
            eprintln!("{}", json!({ "error": kind, "message": msg }));
            ExitCode::from(code)
        }
    }
}
