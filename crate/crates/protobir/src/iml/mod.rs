//! The IML process calculus: syntax, parsing, evaluation and probabilistic execution.

pub mod engine;
pub mod eval;
pub mod parse;
pub mod syntax;

pub use engine::{Agent, AgentStep, End, EngineConfig, Engine, EnumConfig, Member, NoAgent, NoSpawn, Path, Spawner, Step, System, Trace, Visit};
pub use eval::{eval, IEnv};
pub use parse::{parse_exp, parse_process, ParseError};
pub use syntax::{pretty, IExp, Process};
