//! Design-space exploration on top of `masr-core`: single runs, sweeps with
//! Pareto fronts, the sparsity scaling experiment and report tables.

pub mod experiments;
pub mod pareto;
pub mod report;
pub mod runner;
pub mod sweep;
pub mod workload;

use masr_core::Error;

/// Version stamped into every emitted table.
pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Parameter(_) | Error::Dimension(_) => 2,
        Error::Io { .. } => 3,
        Error::Integrity(_) => 4,
        Error::Structural(_) | Error::Calibration(_) | Error::Capacity(_) => 1,
    }
}
