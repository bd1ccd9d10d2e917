//! Runs the client of the running example on a fixed tape and prints its trace.

use protobir::bir::env::RandomTape;
use protobir::bir::parse::parse_program;
use protobir::bir::step::{run_concrete, BirConfig, ScriptDriver};
use protobir::bir::{BirState, Label};
use protobir::bits::Bits;
use protobir::ops::OpRegistry;

fn main() {
    let prog = parse_program(include_str!("../data/client_server.bir"), include_str!("../data/client_server.toml")).expect("program parses");
    let tape = RandomTape::new(4, vec![Bits::from_u128(0xe, 4)]);
    let key = Bits::from_u128(0x5, 4);
    let s0 = BirState::start(&prog, Label::Addr(100), &[key], tape).expect("start state");
    let trace = run_concrete(&prog, &OpRegistry::default(), &BirConfig { n: 4 }, s0, &mut ScriptDriver::default(), 100);
    for (pc, ev) in &trace.steps {
        println!("{pc:>6}  {ev}");
    }
    println!("end: {:?}", trace.end);
}
