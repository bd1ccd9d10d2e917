//! Mixed systems: model processes running alongside concrete or symbolic program
//! participants, and the differential checks that relate the layers.

pub mod agents;
pub mod check;

pub use agents::{BirAgent, BirSpawner, SymAgent, SymSpawner};
pub use check::{
    check_sim_iml, check_sim_state, differential_run_bir_sbir, differential_run_sbir_iml, extract_runs, inline_runs, run_sites, DiffConfig, SimReport,
    Witness,
};
