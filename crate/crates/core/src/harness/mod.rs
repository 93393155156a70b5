//! Workload drivers behind the `depq` binary: benchmarks, checked stress
//! windows, history-file checking and forced-schedule replays.
//!
//! Exit codes used by the binary are collected in [`exit`].

pub mod bench;
pub mod replay;
pub mod stress;
pub mod workload;

use std::path::Path;

use crate::error::{Error, Result};
use crate::lincheck::{check_with, CheckConfig, History, Verdict};

pub use bench::{run_bench, RunReport};
pub use replay::{replay, ReplayReport, Scenario};
pub use stress::{run_stress, run_window, StressConfig, StressReport};
pub use workload::{AnyDepq, Impl, RunLength, WorkloadConfig};

pub mod exit {
    pub const OK: u8 = 0;
    /// A replay ran as scripted but its expectation failed.
    pub const EXPECTATION_FAILED: u8 = 1;
    pub const INVALID_CONFIG: u8 = 2;
    pub const AUDIT_FAILED: u8 = 3;
    /// Not linearizable, or the checker could not decide.
    pub const NOT_LINEARIZABLE: u8 = 4;
    pub const SCHEDULE_NOT_REALIZED: u8 = 5;
}

/// Reads a JSON-lines history file and checks it.
pub fn lincheck_file(path: &Path, cfg: CheckConfig) -> Result<(History, Verdict)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MalformedHistory(format!("{}: {e}", path.display())))?;
    let h = History::from_jsonl(&text)?;
    let v = check_with(&h, cfg)?;
    Ok((h, v))
}
