//! Seeded hyperparameter sweeps on the toy problem, log-log regression of
//! the results, and the verification suites exposed by the `adaconv` CLI.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod regress;
pub mod sweep;
pub mod verify;

pub use config::{Estimator, ObjectiveSpec, SweepConfig, Vary, WarmPhase, WarmStart};
pub use error::HarnessError;
pub use experiment::{run_experiment, RunResult};
pub use regress::{loglog_regress, RegressionResult};
pub use sweep::{sweep, SeedSource, SweepRow, SweepTable};
