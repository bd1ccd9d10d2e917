//! Acceptance criteria, run in order. Prints one PASS/FAIL line per criterion with
//! its wall time and limit, and exits nonzero if any criterion fails.

use num_rational::BigRational;
use num_traits::{One, Zero};
use protobir::bir::env::{mload, mstore, RandomTape, CALL_CHUNK, HEAP, HEAP_A, HEAP_OP, MEM, MEM_A, MEM_OP};
use protobir::bir::parse::parse_program;
use protobir::bir::step::{bir_receive, bir_step, exec_block, BirConfig, StepAction};
use protobir::bir::{BirEnv, BirState, Label, LabelKind, Program};
use protobir::bits::Bits;
use protobir::corpus::{random_process, random_system, CorpusConfig, CorpusSystem, START};
use protobir::extract::{tree_to_iml, ExtractConfig};
use protobir::iml::engine::{pure, total_pr};
use protobir::iml::{parse_process, EnumConfig, NoAgent, Process, System};
use protobir::mixed::{differential_run_bir_sbir, differential_run_sbir_iml, extract_runs, inline_runs, DiffConfig};
use protobir::ops::OpRegistry;
use protobir::security::{check_attack_preservation, insecurity_bir, insecurity_iml, BirInsecConfig, TraceProperty};
use protobir::sym::exp::{bin, cast, eq, ite, not};
use protobir::sym::loops::{concrete_loop, concrete_var, summarize_loop};
use protobir::sym::solver::resolve_indirect;
use protobir::sym::{build_tree, interpret, EnumSolver, Interpretation, Sort, Stepper, SymConfig, SymExp, SymState, Value};
use protobir::bir::BinOp;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

type Check = fn() -> Result<String, String>;

fn data(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. golden extraction of the XOR client

fn golden_xor_extraction() -> Result<String, String> {
    let prog = parse_program(&data("xor_client.bir"), &data("xor_client.toml")).map_err(|e| e.to_string())?;
    let ops = OpRegistry::default();
    let cfg = SymConfig { n: 64, tape_width: 64, ..SymConfig::default() };
    let s0 = SymState::start(&prog, Label::Addr(100), &["pad".to_string()]).map_err(|e| e.to_string())?;
    let built = build_tree(&prog, &ops, &cfg, &EnumSolver::default(), s0, 64);
    let model = tree_to_iml(&built.tree, &ExtractConfig::default()).map_err(|e| e.to_string())?;
    let golden = parse_process(&data("xor_client.iml")).map_err(|e| e.to_string())?;
    ensure(model.process.alpha_normal() == golden.alpha_normal(), || {
        format!("extracted model differs from golden:\n{}", protobir::iml::pretty(&model.process))
    })?;
    // shape: new; let conc1; let exclusive_or; out; 0
    let shape = match &golden {
        Process::New { cont, .. } => match &**cont {
            Process::Let { exp: a, cont, .. } => match &**cont {
                Process::Let { exp: b, cont, .. } => matches!(**cont, Process::Out { .. })
                    && format!("{a}").starts_with("conc1(")
                    && format!("{b}").starts_with("exclusive_or("),
                _ => false,
            },
            _ => false,
        },
        _ => false,
    };
    ensure(shape, || "golden file does not have the new/let/let/out shape".into())?;
    Ok("AST equal to golden modulo names".into())
}

// ---------------------------------------------------------------------------
// 2. running example under two attackers

fn running_example() -> Result<String, String> {
    let prog = parse_program(&data("client_server.bir"), &data("client_server.toml")).map_err(|e| e.to_string())?;
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let sym = SymConfig { n: 4, tape_width: 4, ..SymConfig::default() };
    let psi = TraceProperty::from_toml(&data("auth.toml"))?;
    ensure(psi.kind == TraceProperty::auth("accept", "send").kind, || "auth.toml does not describe auth(accept, send)".into())?;
    let mut notes = Vec::new();
    for file in ["eavesdropper.iml", "replay.iml"] {
        let sys = parse_process(&data(file)).map_err(|e| e.to_string())?;
        let models = extract_runs(&prog, &ops, &solver, &sys, &sym, 200)?;
        let model = inline_runs(&sys, &models)?;
        let r = insecurity_iml(&ops, &model, 40, 8, &psi);
        ensure(r.value.is_zero() && !r.lower_bound, || format!("{file}: {}", r.to_text()))?;
        // the server must actually accept somewhere, or the zero is vacuous
        let traces = pure(&ops).enumerate(&System::<NoAgent>::new(model), EnumConfig { depth: 40, max_fresh_bits: 8 });
        let accepts = traces.iter().any(|t| t.path.events.iter().any(|e| matches!(e, protobir::trace::Event::Ev { name, .. } if name == "accept")));
        ensure(accepts, || format!("{file}: no trace reaches accept"))?;
        notes.push(format!("{file} 0/1"));
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------------------
// 3 and 4. differential checks on the seeded corpus

const CORPUS_SIZE: u64 = 500;

fn corpus() -> &'static [CorpusSystem] {
    static CORPUS: OnceLock<Vec<CorpusSystem>> = OnceLock::new();
    CORPUS.get_or_init(|| (0..CORPUS_SIZE).map(|s| random_system(s, &CorpusConfig::default())).collect())
}

fn diff_config() -> DiffConfig {
    DiffConfig { sym: SymConfig { n: 4, tape_width: 4, max_rng: Some(2), ..SymConfig::default() }, depth: 200, tree_depth: 200, max_fresh_bits: 4 }
}

fn bir_vs_sbir() -> Result<String, String> {
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let cfg = diff_config();
    let mut runs = 0;
    for (i, s) in corpus().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        for t in 0..4u64 {
            let tape = RandomTape::new(4, (0..2).map(|_| Bits::from_u128(rng.gen_range(0..16), 4)).collect());
            let r = differential_run_bir_sbir(&s.program, &ops, &solver, &s.system, &[tape], &cfg, i as u64 * 10 + t);
            ensure(r.ok, || format!("{} tape {t}:\n{}", s.name, r.to_text()))?;
            runs += 1;
        }
    }
    Ok(format!("{runs}/{runs} runs ok"))
}

fn sbir_vs_iml() -> Result<String, String> {
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let cfg = diff_config();
    let mut paths = 0;
    for s in corpus() {
        let r = differential_run_sbir_iml(&s.program, &ops, &solver, &s.system, &cfg);
        ensure(r.ok, || format!("{}:\n{}", s.name, r.to_text()))?;
        paths += r.checked;
    }
    Ok(format!("{} systems, {paths} paths matched", corpus().len()))
}

// ---------------------------------------------------------------------------
// 5. attack preservation

fn attack_preservation() -> Result<String, String> {
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let cc = CorpusConfig { n: 2, event_branch: true, ..CorpusConfig::default() };
    let (mut held, mut nonzero) = (0, 0);
    for seed in 0..50u64 {
        let s = random_system(seed, &cc);
        let mut all = true;
        for ev in ["bad", "tick"] {
            let psi = TraceProperty::forbid(ev);
            let cfg = BirInsecConfig { n: 2, k: 1, ..BirInsecConfig::default() };
            let sym = SymConfig { n: 2, tape_width: 2, max_rng: Some(1), ..SymConfig::default() };
            let r = check_attack_preservation(&ops, &s.program, &solver, &s.system, &cfg, &sym, 200, &psi).map_err(|e| format!("{}: {e}", s.name))?;
            all &= r.holds;
            if !r.iml.value.is_zero() {
                nonzero += 1;
            }
            let cfg0 = BirInsecConfig { k: 0, ..cfg };
            let sym0 = SymConfig { max_rng: Some(0), ..sym };
            let r0 = check_attack_preservation(&ops, &s.program, &solver, &s.system, &cfg0, &sym0, 200, &psi).map_err(|e| format!("{}: {e}", s.name))?;
            ensure(r0.bir.value == r0.iml.value, || format!("{} k=0 {ev}: {}", s.name, r0.to_text()))?;
        }
        held += usize::from(all);
    }
    ensure(held == 50, || format!("inequality held in {held}/50 systems"))?;
    // no run at all: both definitions coincide
    for seed in 0..50u64 {
        let p = random_process(seed, 2);
        let psi = TraceProperty::forbid("bad");
        let dummy = parse_program("block 0:\n  halt\n", "").map_err(|e| e.to_string())?;
        let b = insecurity_bir(&ops, &dummy, &p, &BirInsecConfig { n: 2, k: 0, ..BirInsecConfig::default() }, &psi).map_err(|e| e.to_string())?;
        let i = insecurity_iml(&ops, &p, BirInsecConfig::default().depth, 8, &psi);
        ensure(b.value == i.value, || format!("no-run process {seed}: {} vs {}", b.to_text(), i.to_text()))?;
    }
    Ok(format!("50/50 hold ({nonzero} nonzero model values), k=0 and no-run equal"))
}

// ---------------------------------------------------------------------------
// 6. probabilities of pure processes sum to one

fn normalization() -> Result<String, String> {
    let ops = OpRegistry::default();
    let mut traces = 0;
    for seed in 0..100u64 {
        let p = random_process(seed, 3);
        let ts = pure(&ops).enumerate(&System::<NoAgent>::new(p.clone()), EnumConfig { depth: 256, max_fresh_bits: 3 });
        ensure(ts.iter().all(|t| !t.end.is_partial()), || format!("process {seed} has a non-maximal trace: {}", protobir::iml::pretty(&p)))?;
        let total = total_pr(&ts);
        ensure(total == BigRational::one(), || format!("process {seed}: total {total}"))?;
        traces += ts.len();
    }
    Ok(format!("100 processes, {traces} maximal traces, each sum = 1"))
}

// ---------------------------------------------------------------------------
// 7. loop summaries against unrolling

fn loop_program(rng: &mut ChaCha8Rng, summarizable: bool) -> (Program, u64) {
    let bound = rng.gen_range(1..=5u64);
    let step = rng.gen_range(1..=2u64);
    let c = rng.gen_range(1..8u64);
    let k = rng.gen_range(0..256u64);
    let flag = rng.gen_bool(0.5);
    let (header, cond) = if flag { (format!("  f := (i < {bound}:64)\n"), "f".to_string()) } else { (String::new(), format!("(i < {bound}:64)")) };
    let acc = if summarizable {
        format!("acc := (acc {} {c}:64)", ["+", "-"].choose(rng).expect("ops"))
    } else {
        format!("acc := (acc * {}:64)", c + 1)
    };
    let text = format!(
        "var i: 64\nvar acc: 64\nvar x: 64\nvar f: 1\n\
         block 10:\n{header}  cjmp {cond}, @11, @20\n\
         block 11:\n  i := (i + {step}:64)\n  {acc}\n  x := (acc ^ {k}:64)\n  jmp @10\n\
         block 20:\n  halt\n"
    );
    let prog = parse_program(&text, "loops = [10]\n[exits]\n\"10\" = 20\n").expect("loop program parses");
    (prog, bound)
}

/// Symbolic start at the loop with `i`, `acc` and `x` bound to symbols, and the
/// matching concrete start.
fn loop_starts(prog: &Program, i0: u64, a0: u64, x0: u64) -> (SymState, BirState, Interpretation) {
    let mut s = SymState::initial(prog, Label::Addr(10));
    let mut h = Interpretation::new();
    let mut env = BirEnv::initial(&prog.decls, RandomTape::empty(4));
    for (v, sym, val) in [("i", "i0", i0), ("acc", "a0", a0), ("x", "x0", x0)] {
        s.env.insert(v.into(), SymExp::sym(sym, Sort::Word(64)));
        h.bind(sym, Value::word(u128::from(val), 64)).expect("fresh binding");
        env.set(v, protobir::bir::BirVal::Word(protobir::bir::Word::w64(val)));
    }
    (s, BirState::new(env, Label::Addr(10)), h)
}

fn grounded_word(h: &Interpretation, ops: &OpRegistry, e: &SymExp) -> Option<protobir::bir::Word> {
    match interpret(h, ops, e) {
        Ok(Value::Word(w)) => Some(w),
        _ => None,
    }
}

fn same_vars(h: &Interpretation, ops: &OpRegistry, sym_env: &std::collections::BTreeMap<String, SymExp>, conc: &BirState) -> Result<(), String> {
    for v in ["i", "acc", "x", "f"] {
        let s = grounded_word(h, ops, &sym_env[v]);
        let c = match concrete_var(conc, v) {
            Some(protobir::bir::BirVal::Word(w)) => Some(w),
            _ => None,
        };
        ensure(s.is_some() && s == c, || format!("{v}: summary {s:?} vs unrolled {c:?}"))?;
    }
    Ok(())
}

/// Executes blocks concretely until the loop exit.
fn run_blocks(prog: &Program, mut s: BirState) -> Result<BirState, String> {
    for _ in 0..200 {
        if s.pc == Label::Addr(20) {
            return Ok(s);
        }
        s = exec_block(prog, &s).map_err(|e| e.to_string())?;
    }
    Err("concrete run did not reach the exit".into())
}

/// Steps symbolically without summarizing, following the successor that agrees with `h`.
fn unroll_symbolically(prog: &Program, ops: &OpRegistry, mut s: SymState, h: &Interpretation) -> Result<SymState, String> {
    let cfg = SymConfig::default();
    let solver = EnumSolver::default();
    let stepper = Stepper { prog, ops, cfg: &cfg, solver: &solver };
    for _ in 0..200 {
        if s.pc == Label::Addr(20) {
            return Ok(s);
        }
        let succs = stepper.step(&s).map_err(|e| e.to_string())?;
        let agree = |c: &SymExp, b: bool| matches!(interpret(h, ops, c), Ok(Value::Word(w)) if w.is_true() == b);
        let next = succs.into_iter().find(|x| x.decisions.iter().all(|(c, b)| agree(c, *b))).ok_or("no successor agrees")?;
        s = next.state;
    }
    Err("unrolling did not reach the exit".into())
}

fn loop_summaries() -> Result<String, String> {
    let ops = OpRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cap = 64;
    for n in 0..25 {
        let (prog, bound) = loop_program(&mut rng, true);
        let (i0, a0, x0) = (rng.gen_range(0..bound), rng.gen_range(0..1000), rng.gen_range(0..1000));
        let (s, conc, h) = loop_starts(&prog, i0, a0, x0);
        let sum = summarize_loop(&prog, &s, "t", cap).map_err(|e| format!("loop {n}: {e}"))?;
        let (done, iters) = concrete_loop(&prog, &conc, cap).ok_or_else(|| format!("loop {n}: concrete run failed"))?;
        let count = sum.count_under(&h, &ops, cap).ok_or_else(|| format!("loop {n}: no count under h"))?;
        ensure(count == iters, || format!("loop {n}: summary count {count}, unrolled {iters}"))?;
        let (env, _) = sum.instantiate(count);
        same_vars(&h, &ops, &env, &done).map_err(|e| format!("loop {n}: {e}"))?;
    }
    let mut fallbacks = 0;
    for n in 0..10 {
        let (prog, bound) = loop_program(&mut rng, false);
        let (i0, a0, x0) = (rng.gen_range(0..bound), rng.gen_range(0..1000), rng.gen_range(0..1000));
        let (s, conc, h) = loop_starts(&prog, i0, a0, x0);
        ensure(summarize_loop(&prog, &s, "t", cap).is_err(), || format!("fallback loop {n} was summarized"))?;
        // start from a concrete counter so the tree builder can unroll it
        let mut s_tree = s.clone();
        s_tree.env.insert("i".into(), SymExp::word(u128::from(i0), 64));
        let built = build_tree(&prog, &ops, &SymConfig::default(), &EnumSolver::default(), s_tree, 200);
        ensure(built.diagnostics.iter().any(|d| d.contains("not summarized")), || format!("fallback loop {n}: no diagnostic in {:?}", built.diagnostics))?;
        ensure(!built.tree.is_truncated(), || format!("fallback loop {n}: unrolled tree is truncated"))?;
        let done = run_blocks(&prog, conc).map_err(|e| format!("fallback loop {n}: {e}"))?;
        let end = unroll_symbolically(&prog, &ops, s, &h)?;
        same_vars(&h, &ops, &end.env, &done).map_err(|e| format!("fallback loop {n}: {e}"))?;
        fallbacks += 1;
    }
    Ok(format!("25 summaries equal unrolling; {fallbacks} fallbacks diagnosed and equal"))
}

// ---------------------------------------------------------------------------
// 8. indirect jump resolution against brute force

fn random_cond(rng: &mut ChaCha8Rng, vars: &[(SymExp, u8)]) -> SymExp {
    let (x, w) = vars.choose(rng).expect("vars").clone();
    let c = SymExp::word(rng.gen_range(0..(1u128 << w)), w);
    let base = match rng.gen_range(0..3) {
        0 => eq(x, c),
        1 => bin(BinOp::Lt, x, c),
        _ => bin(BinOp::Le, c, x),
    };
    if rng.gen_bool(0.2) {
        not(base)
    } else {
        base
    }
}

/// A well-typed target: label leaves, or 64-bit word leaves, never both.
fn random_target(rng: &mut ChaCha8Rng, vars: &[(SymExp, u8)], depth: usize, words: bool) -> SymExp {
    if depth == 0 || rng.gen_bool(0.3) {
        if words {
            let base = SymExp::word(rng.gen_range(0..4u128) * 0x100 + 0x1000, 64);
            if rng.gen_bool(0.5) {
                let (x, _) = vars.choose(rng).expect("vars").clone();
                return bin(BinOp::Plus, cast(x, 64), base);
            }
            return base;
        }
        return SymExp::label(Label::Addr(rng.gen_range(100..108)));
    }
    let c = random_cond(rng, vars);
    ite(c, random_target(rng, vars, depth - 1, words), random_target(rng, vars, depth - 1, words))
}

fn target_label(v: &Value) -> Option<Label> {
    match v {
        Value::Label(l) => Some(l.clone()),
        Value::Word(w) if w.width == 64 => Some(Label::Addr(w.value as u64)),
        _ => None,
    }
}

fn indirect_jumps() -> Result<String, String> {
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut labels_seen = 0;
    for n in 0..100 {
        // words come in the standard widths, so at most 8 + 1 + 1 bits
        let (w1, w2) = *[(1u8, 1u8), (8, 1), (1, 8), (8, 0)].choose(&mut rng).expect("widths");
        let mut vars = vec![(SymExp::sym("x", Sort::Word(w1)), w1)];
        if w2 > 0 {
            vars.push((SymExp::sym("y", Sort::Word(w2)), w2));
        }
        let words = rng.gen_bool(0.3);
        let target = random_target(&mut rng, &vars, 3, words);
        // the stepper only keeps feasible states, so draw a satisfiable path condition
        let feasible = |phi: &[SymExp], h: &Interpretation| phi.iter().all(|c| matches!(interpret(h, &ops, c), Ok(Value::Word(w)) if w.is_true()));
        let assignments: Vec<Interpretation> = (0..(1u128 << w1))
            .flat_map(|x| (0..(1u128 << w2)).map(move |y| (x, y)))
            .map(|(x, y)| {
                let mut h = Interpretation::new();
                h.bind("x", Value::word(x, w1)).expect("bind");
                if w2 > 0 {
                    h.bind("y", Value::word(y, w2)).expect("bind");
                }
                h
            })
            .collect();
        let phi: Vec<SymExp> = loop {
            let phi = if rng.gen_bool(0.4) { vec![random_cond(&mut rng, &vars)] } else { vec![] };
            if assignments.iter().any(|h| feasible(&phi, h)) {
                break phi;
            }
        };
        let got = resolve_indirect(&solver, &ops, &phi, &target, 1024);
        let mut expect = Vec::new();
        for h in assignments.iter().filter(|h| feasible(&phi, h)) {
            let l = interpret(h, &ops, &target).ok().as_ref().and_then(target_label).ok_or_else(|| format!("target {n} does not evaluate to a label"))?;
            if !expect.contains(&l) {
                expect.push(l);
            }
        }
        let mut got_sorted = got.labels.clone();
        got_sorted.sort();
        expect.sort();
        ensure(got.complete && got_sorted == expect, || {
            let only_got: Vec<_> = got_sorted.iter().filter(|l| !expect.contains(l)).collect();
            let only_brute: Vec<_> = expect.iter().filter(|l| !got_sorted.contains(l)).collect();
            format!("target {n} {target}: complete {}, only resolved {only_got:?}, only brute force {only_brute:?}", got.complete)
        })?;
        labels_seen += expect.len();
    }
    Ok(format!("100 targets, {labels_seen} labels, all equal"))
}

// ---------------------------------------------------------------------------
// 9. frame and purity invariants

fn frame_invariants() -> Result<String, String> {
    let ops = OpRegistry::default();
    let cfg = BirConfig { n: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut steps, mut events, mut lib) = (0, 0, 0);
    let mut seed = 0u64;
    while steps < 10_000 {
        let sys = random_system(seed, &CorpusConfig::default());
        seed += 1;
        let tape = RandomTape::new(4, (0..rng.gen_range(0..=3)).map(|_| Bits::from_u128(rng.gen_range(0..16), 4)).collect());
        let arg = Bits::from_u128(rng.gen_range(0..16), 4);
        let Ok(mut s) = BirState::start(&sys.program, Label::Addr(START), &[arg], tape) else { continue };
        for _ in 0..500 {
            let kind = sys.program.partition.kind(&s.pc);
            let next = match bir_step(&sys.program, &ops, &cfg, &s) {
                Ok((_, StepAction::Halted)) | Err(_) => break,
                Ok((_, StepAction::Recv { .. })) => {
                    let payload = Bits::from_u128(rng.gen_range(0..256), 8);
                    match bir_receive(&sys.program, &s, &payload) {
                        Ok((n, _)) => n,
                        Err(_) => break,
                    }
                }
                Ok((n, _)) => n,
            };
            steps += 1;
            if !matches!(kind, LabelKind::Op(_)) {
                ensure(next.env.memory(MEM_OP).ok() == s.env.memory(MEM_OP).ok(), || format!("{} step at {} touched {MEM_OP}", sys.name, s.pc))?;
            } else {
                lib += 1;
            }
            if matches!(kind, LabelKind::Event(..)) {
                ensure(next.env == s.env, || format!("{} event at {} changed the environment", sys.name, s.pc))?;
                events += 1;
            }
            s = next;
        }
    }
    // mload after mstore returns the payload, and earlier records stay intact
    let decls = parse_program("block 0:\n  halt\n", "").map_err(|e| e.to_string())?.decls;
    let mut env = BirEnv::initial(&decls, RandomTape::empty(4));
    let mut stored: Vec<(u64, Bits)> = Vec::new();
    let regions = [(HEAP, MEM), (HEAP_OP, MEM_OP), (HEAP_A, MEM_A)];
    for i in 0..1000 {
        let len = rng.gen_range(0..=256usize);
        let b = Bits::from_bools((0..len).map(|_| rng.gen_bool(0.5)).collect());
        let (heap, region) = regions[i % 3];
        let (e2, addr) = mstore(&env, heap, region, &b, CALL_CHUNK).map_err(|e| format!("payload {i}: {e}"))?;
        env = e2;
        let back = mload(&env, addr).map_err(|e| format!("payload {i}: {e}"))?;
        ensure(back == b, || format!("payload {i} of {len} bits did not round-trip"))?;
        stored.push((addr, b));
    }
    for (i, (addr, b)) in stored.iter().enumerate() {
        ensure(mload(&env, *addr).ok().as_ref() == Some(b), || format!("payload {i} was overwritten"))?;
    }
    Ok(format!("{steps} steps ({lib} library, {events} event); 1000 payloads round-trip"))
}

fn main() {
    let criteria: [(&str, Duration, Check); 9] = [
        ("golden XOR-client extraction", Duration::from_secs(1), golden_xor_extraction),
        ("running example insecurity is 0", Duration::from_secs(10), running_example),
        ("BIR vs symbolic BIR on 500 x 4 runs", Duration::from_secs(120), bir_vs_sbir),
        ("symbolic BIR vs extracted model", Duration::from_secs(120), sbir_vs_iml),
        ("attack probability preserved", Duration::from_secs(120), attack_preservation),
        ("probabilities sum to one", Duration::from_secs(30), normalization),
        ("loop summaries equal unrolling", Duration::from_secs(30), loop_summaries),
        ("indirect jumps equal brute force", Duration::from_secs(10), indirect_jumps),
        ("frame and purity invariants", Duration::from_secs(30), frame_invariants),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let took = t0.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; over the time limit")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!("criterion {}: {} {name} [{:.2}s / {}s] {detail}", i + 1, if ok { "PASS" } else { "FAIL" }, took.as_secs_f64(), limit.as_secs());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
