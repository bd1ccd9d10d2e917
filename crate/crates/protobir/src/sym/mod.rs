//! Symbolic BIR: expressions, interpretations, the built-in solver, crypto-aware
//! stepping, loop summaries and execution trees.

pub mod exp;
pub mod interp;
pub mod loops;
pub mod solver;
pub mod step;
pub mod tree;

pub use exp::{Sort, SymExp, Value};
pub use interp::{interpret, Interpretation};
pub use solver::{EnumSolver, SolveResult, Solver};
pub use step::{Fault, Outcome, Stepper, Successor, SymConfig, SymEvent, SymState};
pub use tree::{build_tree, BuiltTree, ExecTree, LeafKind};
