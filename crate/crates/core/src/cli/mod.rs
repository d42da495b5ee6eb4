//! Command implementations behind the `nestqmc` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_calibrate, cmd_complexity, cmd_convergence, cmd_estimate, cmd_eta, fmt_float};
pub use config::{CouplingSpec, ExperimentConfig};

use crate::error::Error;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_NON_CONVERGENCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Process exit code for a failed command.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::NonConvergence { .. } | Error::RootFinding(..) => EXIT_NON_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}
