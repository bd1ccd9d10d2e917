//! Crypto-aware binary IR with concrete and symbolic semantics, extraction of
//! execution trees into a probabilistic process calculus, mixed executions with
//! differential simulation checks, and exact insecurity computation.

pub mod bir;
pub mod bits;
pub mod corpus;
pub mod extract;
pub mod iml;
pub mod mixed;
pub mod ops;
pub mod security;
pub mod sym;
pub mod trace;
