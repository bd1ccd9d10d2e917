//! Runs both simulation checks on a few generated systems.

use protobir::bir::env::RandomTape;
use protobir::bits::Bits;
use protobir::corpus::{random_system, CorpusConfig};
use protobir::mixed::{differential_run_bir_sbir, differential_run_sbir_iml, DiffConfig};
use protobir::ops::OpRegistry;
use protobir::sym::{EnumSolver, SymConfig};

fn main() {
    let ops = OpRegistry::default();
    let solver = EnumSolver::default();
    let cfg = DiffConfig { sym: SymConfig { max_rng: Some(2), ..SymConfig::default() }, depth: 200, tree_depth: 200, max_fresh_bits: 4 };
    for seed in 0..5 {
        let s = random_system(seed, &CorpusConfig::default());
        let tape = RandomTape::new(4, vec![Bits::from_u128(seed as u128 % 16, 4), Bits::from_u128(3, 4)]);
        let a = differential_run_bir_sbir(&s.program, &ops, &solver, &s.system, &[tape], &cfg, seed);
        let b = differential_run_sbir_iml(&s.program, &ops, &solver, &s.system, &cfg);
        println!("{}: concrete/symbolic ok={} ({} steps), symbolic/model ok={} ({} traces)", s.name, a.ok, a.checked, b.ok, b.checked);
        if !a.ok {
            print!("{}", a.to_text());
        }
        if !b.ok {
            print!("{}", b.to_text());
        }
    }
}
