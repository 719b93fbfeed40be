//! Run configuration, file output, parameter sweeps and the acceptance suite.

pub mod config;
pub mod output;
pub mod sweep;
pub mod verify;

pub use config::{parse_config, PreparedRun, RunConfig};
pub use output::{read_diagnostics, read_snapshot, write_diagnostics, write_snapshot, write_trajectory};
pub use sweep::{epsilon_sweep, gamma_sweep, SweepOptions, SweepResult};
pub use verify::{CriterionOutcome, Verifier, VerifyOptions};
