//! External test runner protocol.
//!
//! The runner is invoked as
//! `<cmd> --project <abs-path> --test-class <fqcn> --sdk <level>` and prints a
//! single JSON document
//! `{"status":"passed"|"failed"|"error","failed_test":..,"message":..,"duration_ms":..}`,
//! exiting 0, 1 or 2 to match the status.

use std::collections::VecDeque;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LevelPair;

pub const DEFAULT_RUNNER_TIMEOUT: Duration = Duration::from_secs(15 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Passed,
    Failed,
    InfrastructureError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRunOutcome {
    pub level: u32,
    pub status: TestStatus,
    pub failed_test: Option<String>,
    pub message: Option<String>,
    pub duration_ms: u64,
}

impl TestRunOutcome {
    pub fn passed(level: u32) -> Self {
        Self {
            level,
            status: TestStatus::Passed,
            failed_test: None,
            message: None,
            duration_ms: 0,
        }
    }

    pub fn failed(level: u32, test: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            level,
            status: TestStatus::Failed,
            failed_test: Some(test.into()),
            message: Some(message.into()),
            duration_ms: 0,
        }
    }

    pub fn infrastructure(level: u32, message: impl Into<String>) -> Self {
        Self {
            level,
            status: TestStatus::InfrastructureError,
            failed_test: None,
            message: Some(message.into()),
            duration_ms: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunnerError {
    #[error("runner protocol violation: {0}")]
    RunnerProtocolError(String),
    #[error("cannot start runner `{0}`: {1}")]
    Spawn(String, String),
    #[error("runner script exhausted after {0} invocations")]
    ScriptExhausted(usize),
}

/// Validates one runner invocation's exit code and standard output.
pub fn parse_runner_output(level: u32, exit_code: i32, stdout: &str) -> Result<TestRunOutcome, RunnerError> {
    let proto = |m: String| RunnerError::RunnerProtocolError(m);
    let doc: serde_json::Value =
        serde_json::from_str(stdout.trim()).map_err(|e| proto(format!("output is not one JSON document: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| proto("output is not a JSON object".into()))?;
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    if keys != ["duration_ms", "failed_test", "message", "status"] {
        return Err(proto(format!("unexpected field set {keys:?}")));
    }
    let opt_str = |key: &str| -> Result<Option<String>, RunnerError> {
        match &obj[key] {
            serde_json::Value::Null => Ok(None),
            serde_json::Value::String(s) => Ok(Some(s.clone())),
            other => Err(proto(format!("`{key}` must be a string or null, got {other}"))),
        }
    };
    let failed_test = opt_str("failed_test")?;
    let message = opt_str("message")?;
    let duration_ms = obj["duration_ms"]
        .as_u64()
        .ok_or_else(|| proto("`duration_ms` must be a non-negative integer".into()))?;
    let (status, expected_exit) = match obj["status"].as_str() {
        Some("passed") => (TestStatus::Passed, 0),
        Some("failed") => (TestStatus::Failed, 1),
        Some("error") => (TestStatus::InfrastructureError, 2),
        _ => return Err(proto(format!("bad status {}", obj["status"]))),
    };
    if exit_code != expected_exit {
        return Err(proto(format!(
            "status {} disagrees with exit code {exit_code}",
            obj["status"]
        )));
    }
    match status {
        TestStatus::Failed if failed_test.is_none() || message.is_none() => {
            return Err(proto("failed status needs failed_test and message".into()))
        }
        TestStatus::Passed if failed_test.is_some() || message.is_some() => {
            return Err(proto("passed status must not carry failed_test or message".into()))
        }
        _ => {}
    }
    Ok(TestRunOutcome {
        level,
        status,
        failed_test,
        message,
        duration_ms,
    })
}

pub trait TestRunner: Send + Sync {
    fn run(&self, project: &Path, test_class: &str, level: u32) -> Result<TestRunOutcome, RunnerError>;
}

/// Runs old level then new level; both always run.
pub fn run_tests(
    runner: &dyn TestRunner,
    project: &Path,
    test_class: &str,
    levels: LevelPair,
) -> Result<(TestRunOutcome, TestRunOutcome), RunnerError> {
    let old = runner.run(project, test_class, levels.old_level)?;
    let new = runner.run(project, test_class, levels.new_level)?;
    Ok((old, new))
}

/// An external command speaking the runner protocol.
#[derive(Debug, Clone)]
pub struct CommandRunner {
    program: String,
    base_args: Vec<String>,
    timeout: Duration,
}

impl CommandRunner {
    /// `command` is split with shell quoting rules.
    pub fn from_command_line(command: &str, timeout: Duration) -> Result<Self, RunnerError> {
        let mut parts = shlex::split(command)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| RunnerError::Spawn(command.to_string(), "cannot split command line".into()))?;
        let program = parts.remove(0);
        Ok(Self {
            program,
            base_args: parts,
            timeout,
        })
    }
}

impl TestRunner for CommandRunner {
    fn run(&self, project: &Path, test_class: &str, level: u32) -> Result<TestRunOutcome, RunnerError> {
        let project: PathBuf = project.canonicalize().unwrap_or_else(|_| project.to_path_buf());
        let mut child = Command::new(&self.program)
            .args(&self.base_args)
            .arg("--project")
            .arg(&project)
            .arg("--test-class")
            .arg(test_class)
            .arg("--sdk")
            .arg(level.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| RunnerError::Spawn(self.program.clone(), e.to_string()))?;

        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if started.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(RunnerError::Spawn(self.program.clone(), e.to_string())),
            }
        };
        let out = out_reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        let Some(status) = status else {
            log::warn!("runner timed out at sdk {level}");
            let mut outcome = TestRunOutcome::infrastructure(
                level,
                format!("runner timed out after {} s", self.timeout.as_secs_f64()),
            );
            outcome.duration_ms = started.elapsed().as_millis() as u64;
            return Ok(outcome);
        };
        if !err.trim().is_empty() {
            log::debug!("runner stderr (sdk {level}): {}", err.trim_end());
        }
        let code = status.code().unwrap_or(-1);
        parse_runner_output(level, code, &out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunnerCall {
    pub test_class: String,
    pub level: u32,
}

/// In-process runner that replays a fixed list of outcomes and logs calls.
/// The `level` of each scripted outcome is overwritten with the requested one.
#[derive(Debug, Default)]
pub struct ScriptedRunner {
    script: Mutex<VecDeque<Result<TestRunOutcome, RunnerError>>>,
    calls: Mutex<Vec<RunnerCall>>,
}

impl ScriptedRunner {
    pub fn new(script: impl IntoIterator<Item = TestRunOutcome>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().map(Ok).collect()),
            calls: Mutex::default(),
        }
    }

    pub fn push_error(&self, err: RunnerError) {
        self.script.lock().unwrap().push_back(Err(err));
    }

    pub fn calls(&self) -> Vec<RunnerCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap().len()
    }
}

impl TestRunner for ScriptedRunner {
    fn run(&self, _project: &Path, test_class: &str, level: u32) -> Result<TestRunOutcome, RunnerError> {
        let mut calls = self.calls.lock().unwrap();
        calls.push(RunnerCall {
            test_class: test_class.to_string(),
            level,
        });
        let next = self.script.lock().unwrap().pop_front();
        match next {
            Some(Ok(mut outcome)) => {
                outcome.level = level;
                Ok(outcome)
            }
            Some(Err(e)) => Err(e),
            None => Err(RunnerError::ScriptExhausted(calls.len() - 1)),
        }
    }
}
