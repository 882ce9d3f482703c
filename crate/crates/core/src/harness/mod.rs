//! Seeded experiment harness: TOML configs, parallel runners, rate fits and
//! report serialization.

pub mod config;
pub mod emit;
pub mod fit;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind, Format, Procedure};
pub use emit::{emit, Cell, Report, Table};
pub use fit::{fit_rate_exponent, RateFit, RatePoint};
pub use runner::{run, Outcome, RunOptions};
