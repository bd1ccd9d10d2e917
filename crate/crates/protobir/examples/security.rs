//! Authentication of the running example: insecurity at both layers, and a control
//! attacker that holds the key.

use protobir::bir::parse::parse_program;
use protobir::iml::parse_process;
use protobir::mixed::{extract_runs, inline_runs};
use protobir::ops::OpRegistry;
use protobir::security::{check_attack_preservation, format_rational, insecurity_iml, BirInsecConfig, TraceProperty};
use protobir::sym::{EnumSolver, SymConfig};

fn main() {
    let prog = parse_program(include_str!("../data/client_server.bir"), include_str!("../data/client_server.toml")).expect("program parses");
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let psi = TraceProperty::from_toml(include_str!("../data/auth.toml")).expect("property parses");

    let sys = parse_process(include_str!("../data/eavesdropper.iml")).expect("system parses");
    let cfg = BirInsecConfig { n: 2, k: 1, depth: 40, ..BirInsecConfig::default() };
    let sym = SymConfig { n: 2, tape_width: 2, max_rng: Some(1), ..SymConfig::default() };
    let report = check_attack_preservation(&ops, &prog, &solver, &sys, &cfg, &sym, 200, &psi).expect("both layers computed");
    print!("eavesdropper\n{}", report.to_text());

    // an attacker with the key forges a fresh message
    let forger = parse_process("new key: fixed_4; (run(@200, (key)) | new m: fixed_2; out(d, enc(key, m)); 0)").expect("system parses");
    let sym4 = SymConfig { n: 4, tape_width: 4, ..SymConfig::default() };
    let models = extract_runs(&prog, &ops, &solver, &forger, &sym4, 200).expect("models extracted");
    let model = inline_runs(&forger, &models).expect("runs inlined");
    let r = insecurity_iml(&ops, &model, 40, 8, &psi);
    println!("forger with the key: {}", format_rational(&r.value));
}
