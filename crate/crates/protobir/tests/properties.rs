//! Invariants checked on generated inputs.

use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use protobir::bir::env::{mload, mstore, RandomTape, CALL_CHUNK, HEAP, HEAP_A, HEAP_OP, MEM, MEM_A, MEM_OP};
use protobir::bir::parse::{parse_program, print_program};
use protobir::bir::syntax::{mask, Word};
use protobir::bir::{BinOp, BirEnv, LabelPartition};
use protobir::bits::Bits;
use protobir::corpus::{random_process, random_system, CorpusConfig};
use protobir::iml::engine::{pure, total_pr};
use protobir::iml::{parse_process, pretty, EnumConfig, NoAgent, System};
use protobir::ops::OpRegistry;
use protobir::sym::exp::bin;
use protobir::sym::{interpret, Interpretation, Sort, SymExp, Value};
use std::collections::BTreeMap;

const OPS: [BinOp; 14] = [
    BinOp::Plus,
    BinOp::Minus,
    BinOp::Mult,
    BinOp::Div,
    BinOp::Mod,
    BinOp::And,
    BinOp::Or,
    BinOp::Xor,
    BinOp::Shl,
    BinOp::Shr,
    BinOp::Eq,
    BinOp::Neq,
    BinOp::Lt,
    BinOp::Le,
];

fn width() -> impl Strategy<Value = u8> {
    prop::sample::select(vec![1u8, 8, 16, 32, 64, 128])
}

fn bits() -> impl Strategy<Value = Bits> {
    prop::collection::vec(any::<bool>(), 0..300).prop_map(Bits::from_bools)
}

/// Reference semantics on arbitrary-precision integers reduced mod 2^w.
fn oracle(op: BinOp, a: u128, b: u128, w: u8) -> (u128, u8) {
    use num_bigint::BigUint;
    let (x, y) = (BigUint::from(a), BigUint::from(b));
    let m = BigUint::from(1u8) << w;
    let red = |v: BigUint| -> u128 { (v % &m).try_into().unwrap() };
    let all_ones = mask(w);
    match op {
        BinOp::Plus => (red(x + y), w),
        BinOp::Minus => (red(x + &m - y), w),
        BinOp::Mult => (red(x * y), w),
        BinOp::Div => (a.checked_div(b).unwrap_or(all_ones), w),
        BinOp::Mod => (if b == 0 { a } else { a % b }, w),
        BinOp::And => (a & b, w),
        BinOp::Or => (a | b, w),
        BinOp::Xor => (a ^ b, w),
        BinOp::Shl => (if b >= u128::from(w) { 0 } else { red(x << b as usize) }, w),
        BinOp::Shr => (if b >= u128::from(w) { 0 } else { a >> b }, w),
        BinOp::Eq => (u128::from(a == b), 1),
        BinOp::Neq => (u128::from(a != b), 1),
        BinOp::Lt => (u128::from(a < b), 1),
        BinOp::Le => (u128::from(a <= b), 1),
    }
}

proptest! {
    #[test]
    fn hex_round_trip(b in bits()) {
        prop_assert_eq!(Bits::parse(&b.to_hex()), Some(b));
    }

    #[test]
    fn cells_round_trip(b in bits(), chunk in prop::sample::select(vec![8u8, 64, 128])) {
        let cells = b.cells(chunk as usize);
        prop_assert_eq!(Bits::from_cells(&cells, chunk as usize, b.len()), b);
    }

    #[test]
    fn word_ops_match_oracle(op in prop::sample::select(OPS.to_vec()), w in width(), a in any::<u128>(), b in any::<u128>(), small in any::<bool>()) {
        let a = a & mask(w);
        // small right operands exercise shifts and division more often
        let b = if small { b % 130 } else { b } & mask(w);
        let got = op.apply(Word::new(a, w), Word::new(b, w));
        let (v, rw) = oracle(op, a, b, w);
        prop_assert_eq!(got, Word::new(v, rw));
    }

    #[test]
    fn folding_agrees_with_interpretation(op in prop::sample::select(OPS.to_vec()), w in prop::sample::select(vec![8u8, 64]), a in any::<u128>(), b in any::<u128>()) {
        let (a, b) = (a & mask(w), b & mask(w));
        let ops = OpRegistry::default();
        let folded = bin(op, SymExp::word(a, w), SymExp::word(b, w));
        let open = bin(op, SymExp::sym("x", Sort::Word(w)), SymExp::sym("y", Sort::Word(w)));
        let h = Interpretation::new().with("x", Value::word(a, w)).with("y", Value::word(b, w));
        let expect = Value::Word(op.apply(Word::new(a, w), Word::new(b, w)));
        prop_assert_eq!(interpret(&h, &ops, &folded).unwrap(), expect.clone());
        prop_assert_eq!(interpret(&h, &ops, &open).unwrap(), expect);
    }

    #[test]
    fn records_round_trip(payloads in prop::collection::vec(bits(), 1..12)) {
        let mut env = BirEnv::initial(&BTreeMap::new(), RandomTape::empty(4));
        let regions = [(HEAP, MEM), (HEAP_OP, MEM_OP), (HEAP_A, MEM_A)];
        let mut stored = Vec::new();
        for (i, p) in payloads.iter().enumerate() {
            let (heap, mem) = regions[i % 3];
            let (next, addr) = mstore(&env, heap, mem, p, CALL_CHUNK).unwrap();
            env = next;
            stored.push((addr, p.clone()));
        }
        for (addr, p) in stored {
            prop_assert_eq!(mload(&env, addr).unwrap(), p);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_programs_reprint(seed in any::<u64>()) {
        let s = random_system(seed, &CorpusConfig::default());
        let again = parse_program(&print_program(&s.program), &s.partition_toml).unwrap();
        prop_assert_eq!(&again, &s.program);
        let part = LabelPartition::from_toml(&s.program.partition.to_toml()).unwrap();
        let mut orig = LabelPartition::from_toml(&s.partition_toml).unwrap();
        let mut round = part.clone();
        let labels = s.program.labels().cloned().collect();
        orig.finish(&labels).unwrap();
        round.finish(&labels).unwrap();
        prop_assert_eq!(round, orig);
    }

    #[test]
    fn processes_reprint(seed in any::<u64>()) {
        let p = random_process(seed, 3);
        let q = parse_process(&pretty(&p)).unwrap();
        prop_assert_eq!(q.alpha_normal(), p.alpha_normal());
        prop_assert_eq!(p.alpha_normal().alpha_normal(), p.alpha_normal());
    }

    #[test]
    fn pure_probabilities_sum_to_one(seed in any::<u64>()) {
        let ops = OpRegistry::default();
        let p = random_process(seed, 2);
        let ts = pure(&ops).enumerate(&System::<NoAgent>::new(p), EnumConfig { depth: 256, max_fresh_bits: 2 });
        prop_assert!(ts.iter().all(|t| !t.end.is_partial()));
        prop_assert_eq!(total_pr(&ts), BigRational::one());
    }
}
