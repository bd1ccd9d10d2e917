//! Enumerates every trace of a small model process with its exact probability.

use protobir::iml::engine::{pure, total_pr};
use protobir::iml::{parse_process, EnumConfig, NoAgent, System};
use protobir::ops::OpRegistry;
use protobir::security::format_rational;

fn main() {
    let p = parse_process("new k: fixed_2; new m: fixed_1; if k = 0:2 then event weak(m); 0 else out(c, enc(k, m)); 0 | in(c, x); event got(x); 0")
        .expect("process parses");
    let ops = OpRegistry::default();
    let traces = pure(&ops).enumerate(&System::<NoAgent>::new(p), EnumConfig::default());
    for t in &traces {
        let evs: Vec<String> = t.path.events.iter().map(|e| e.to_string()).collect();
        println!("{:>5}  {}  [{:?}]", t.path.pr().to_string(), evs.join(" ; "), t.end);
    }
    println!("total: {}", format_rational(&total_pr(&traces)));
}
