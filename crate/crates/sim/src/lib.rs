//! Monte Carlo harness for the `cdce-core` estimators: TOML configuration,
//! seeded SNR sweeps with paired trials, and CSV/JSON output.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod output;

pub use config::{EstimatorId, Mode, SimConfig};
pub use error::{SimError, SimResult};
pub use harness::{run_sweep, Experiment, ResultRow};
