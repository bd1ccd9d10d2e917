//! Extracts the XOR client's model and compares it with the golden file.

use protobir::bir::parse::parse_program;
use protobir::bir::Label;
use protobir::extract::{tree_to_iml, ExtractConfig};
use protobir::iml::{parse_process, pretty};
use protobir::ops::OpRegistry;
use protobir::sym::{build_tree, EnumSolver, SymConfig, SymState};

fn main() {
    let prog = parse_program(include_str!("../data/xor_client.bir"), include_str!("../data/xor_client.toml")).expect("program parses");
    let cfg = SymConfig { n: 64, tape_width: 64, ..SymConfig::default() };
    let s0 = SymState::start(&prog, Label::Addr(100), &["pad".to_string()]).expect("start state");
    let built = build_tree(&prog, &OpRegistry::default(), &cfg, &EnumSolver::default(), s0, 64);
    let model = tree_to_iml(&built.tree, &ExtractConfig::default()).expect("tree is complete");
    print!("{}", pretty(&model.process));
    let golden = parse_process(include_str!("../data/xor_client.iml")).expect("golden parses");
    println!("// equal to golden modulo names: {}", model.process.alpha_normal() == golden.alpha_normal());
}
