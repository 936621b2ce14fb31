//! Everything that touches the Android project: level pairs, file rewrites
//! with backups, dual-level test wrapping and the external test runner.

mod project;
mod runner;
mod wrap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use project::{BackupToken, ProjectLease, ProjectTree};
pub use runner::{
    parse_runner_output, run_tests, CommandRunner, RunnerCall, RunnerError, ScriptedRunner,
    TestRunOutcome, TestRunner, TestStatus, DEFAULT_RUNNER_TIMEOUT,
};
pub use wrap::{wrap_test, WrappedTest, NEW_SUFFIX, OLD_SUFFIX};

use crate::catalog::DeprecationRecord;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0} does not exist under the project root")]
    FileMissing(String),
    #[error("writing {path}: {reason} (original kept)")]
    WriteFailure { path: String, reason: String },
    #[error("restoring {path}: {reason}")]
    RestoreFailure { path: String, reason: String },
    #[error("deprecation level {0} has no earlier level to test against")]
    LevelUnderflow(u32),
    #[error("invalid level pair {old}:{new}, old must be below new and both at least 1")]
    InvalidLevels { old: u32, new: u32 },
    #[error("test class has no @Test methods")]
    NoTestMethods,
    #[error("cannot parse test class: {0}")]
    UnparsableTestClass(String),
    #[error("project {0} is leased by another session (remove {1} if stale)")]
    LeaseBusy(String, String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Old and new Android API levels a wrapped test runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelPair {
    pub old_level: u32,
    pub new_level: u32,
}

impl LevelPair {
    pub fn new(old_level: u32, new_level: u32) -> Result<Self, HarnessError> {
        if old_level < 1 || old_level >= new_level {
            return Err(HarnessError::InvalidLevels {
                old: old_level,
                new: new_level,
            });
        }
        Ok(Self {
            old_level,
            new_level,
        })
    }

    /// Parses `OLD:NEW`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (old, new) = text
            .split_once(':')
            .ok_or_else(|| format!("expected OLD:NEW, got `{text}`"))?;
        let old = old.trim().parse().map_err(|e| format!("old level: {e}"))?;
        let new = new.trim().parse().map_err(|e| format!("new level: {e}"))?;
        Self::new(old, new).map_err(|e| e.to_string())
    }
}

/// One level before the deprecation and the deprecation level itself,
/// unless `override_pair` is given.
pub fn default_level_pair(
    record: &DeprecationRecord,
    override_pair: Option<LevelPair>,
) -> Result<LevelPair, HarnessError> {
    if let Some(pair) = override_pair {
        return Ok(pair);
    }
    let level = record.deprecation_level;
    if level < 2 {
        return Err(HarnessError::LevelUnderflow(level));
    }
    LevelPair::new(level - 1, level)
}
