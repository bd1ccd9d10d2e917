//! Symbolically executes the server of the running example and prints the tree as DOT.

use protobir::bir::parse::parse_program;
use protobir::bir::Label;
use protobir::ops::OpRegistry;
use protobir::sym::{build_tree, EnumSolver, SymConfig, SymState};

fn main() {
    let prog = parse_program(include_str!("../data/client_server.bir"), include_str!("../data/client_server.toml")).expect("program parses");
    let ops = OpRegistry::default();
    let s0 = SymState::start(&prog, Label::Addr(200), &["key".to_string()]).expect("start state");
    let built = build_tree(&prog, &ops, &SymConfig::default(), &EnumSolver::default(), s0, 64);
    for d in &built.diagnostics {
        eprintln!("note: {d}");
    }
    eprintln!("{} nodes, {} branches", built.tree.node_count(), built.tree.branch_count());
    print!("{}", built.tree.to_dot());
}
