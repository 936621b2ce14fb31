//! The bounded refinement loop for one usage site.
//!
//! ```text
//! Pending -> UpdatedAwaitingTest -> Testing -+-> Succeeded | SucceededValidatorFlagged
//!                                  ^         +-> RefiningTest | RefiningCode -+
//!                                  +------------------------------------------+
//! ```
//!
//! Any state can fall into FailedNoCode or FailedInfrastructure; Testing falls
//! into FailedBoundReached once `max_iterations` refinements have been spent.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{enclosing_function, find_usages, validate_update, SourceUnit, UpdateValidation, UsageSite};
use crate::catalog::DeprecationRecord;
use crate::gateway::{extract_code, ExtractedCode, Gateway};
use crate::harness::{
    run_tests, wrap_test, BackupToken, HarnessError, LevelPair, ProjectLease, ProjectTree, TestRunOutcome,
    TestRunner, TestStatus, WrappedTest,
};
use crate::prompts::{render, select_refinement_kind, PromptContext, PromptError, PromptKind};

pub const DEFAULT_MAX_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SessionStatus {
    Pending,
    UpdatedAwaitingTest,
    Testing,
    RefiningCode,
    RefiningTest,
    Succeeded,
    SucceededValidatorFlagged,
    FailedBoundReached,
    FailedNoCode,
    FailedInfrastructure,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self.is_success() || self.is_failure()
    }

    pub fn is_success(self) -> bool {
        matches!(self, SessionStatus::Succeeded | SessionStatus::SucceededValidatorFlagged)
    }

    pub fn is_failure(self) -> bool {
        matches!(
            self,
            SessionStatus::FailedBoundReached | SessionStatus::FailedNoCode | SessionStatus::FailedInfrastructure
        )
    }
}

/// Which update prompt opens the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[default]
    Full,
    A,
    B,
}

impl PromptVariant {
    pub fn kind(self) -> PromptKind {
        match self {
            PromptVariant::Full => PromptKind::UpdateFull,
            PromptVariant::A => PromptKind::UpdatePromptA,
            PromptVariant::B => PromptKind::UpdatePromptB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub max_iterations: usize,
    pub variant: PromptVariant,
    /// Leave the project modified when the session succeeds.
    pub keep_changes: bool,
    /// Operator-supplied code appended to every refinement prompt.
    pub supplemental_context: Option<String>,
    pub error_budget: Option<usize>,
    pub lease_wait: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            variant: PromptVariant::Full,
            keep_changes: false,
            supplemental_context: None,
            error_budget: None,
            lease_wait: Duration::from_secs(600),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub event: String,
    pub outcome: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub update: Option<u64>,
    pub test_gen: Option<u64>,
    pub refinements: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationSession {
    pub session_id: String,
    pub record: DeprecationRecord,
    pub usage: UsageSite,
    pub levels: LevelPair,
    /// Refinement rounds used.
    pub iteration: usize,
    pub max_iterations: usize,
    pub current_code: String,
    pub current_test: Option<String>,
    pub status: SessionStatus,
    pub validation: Option<UpdateValidation>,
    pub history: Vec<HistoryEntry>,
    /// Model latency per phase, milliseconds.
    pub timings: PhaseTimings,
    /// Runner invocations made.
    pub runner_calls: usize,
    /// Gateway exchanges made.
    pub gateway_calls: usize,
}

impl MigrationSession {
    fn log(&mut self, event: &str, outcome: impl Into<String>) {
        self.history.push(HistoryEntry {
            iteration: self.iteration,
            event: event.to_string(),
            outcome: outcome.into(),
        });
    }

    pub fn result(&self) -> SessionResult {
        SessionResult {
            session: self.session_id.clone(),
            api: self.record.deprecated.canonical(),
            status: self.status,
            iterations: self.iteration,
            validation: self.validation,
            timings_ms: self.timings.clone(),
        }
    }
}

/// The per-session result file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session: String,
    pub api: String,
    pub status: SessionStatus,
    pub iterations: usize,
    pub validation: Option<UpdateValidation>,
    pub timings_ms: PhaseTimings,
}

/// Problems found before the project is touched.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Prompt(#[from] PromptError),
    #[error("usage at {path}:{line} is not inside a method")]
    NoEnclosingFunction { path: String, line: usize },
    #[error("{path} line {line} holds no usage of {api}")]
    UsageNotFound { path: String, line: usize, api: String },
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefinementTarget {
    TestReplacement,
    CodeReplacement,
}

/// An old-level failure always refines the test. A new-level reply is a new
/// test when it carries a runner or test annotation, otherwise new code.
pub fn classify_refinement_reply(reply: &ExtractedCode, kind: PromptKind) -> RefinementTarget {
    if kind == PromptKind::RefineOldFailure || looks_like_test(&reply.text) {
        RefinementTarget::TestReplacement
    } else {
        RefinementTarget::CodeReplacement
    }
}

fn looks_like_test(code: &str) -> bool {
    let masked = crate::analysis::lex_strip(code).text;
    ["@RunWith", "@Test"].iter().any(|token| {
        masked.match_indices(token).any(|(i, _)| {
            !masked[i + token.len()..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric() || c == '_')
        })
    })
}

/// Stable id for a usage: `<path>:<line>#<member>`.
pub fn session_id(usage: &UsageSite) -> String {
    format!("{}:{}#{}", usage.unit_path, usage.line, usage.matched_member)
}

pub struct SessionInputs<'a> {
    /// Usually [`session_id`] of the usage; also keys the transcript.
    pub session_id: String,
    pub record: &'a DeprecationRecord,
    pub usage: &'a UsageSite,
    pub levels: LevelPair,
    pub project: &'a ProjectTree,
    pub config: &'a SessionConfig,
}

/// Runs one session to a terminal state. `Err` only for setup problems
/// detected before anything in the project changes.
pub fn run_session(
    inputs: SessionInputs<'_>,
    gateway: &Gateway,
    runner: &dyn TestRunner,
) -> Result<MigrationSession, SessionError> {
    let SessionInputs {
        session_id,
        record,
        usage,
        levels,
        project,
        config,
    } = inputs;
    if config.max_iterations == 0 {
        return Err(SessionError::ZeroIterations);
    }
    let _lease = ProjectLease::acquire(project.root(), config.lease_wait)?;
    let file = project.resolve_existing(Path::new(&usage.unit_path))?;
    let original = std::fs::read_to_string(&file).map_err(HarnessError::from)?;
    let unit = SourceUnit::new(usage.unit_path.clone(), original.clone());
    let usages = find_usages(&unit, record);
    if !usages.iter().any(|u| u.line == usage.line) {
        return Err(SessionError::UsageNotFound {
            path: usage.unit_path.clone(),
            line: usage.line,
            api: record.deprecated.canonical(),
        });
    }
    let function = match &usage.enclosing_function {
        Some(f) => f.clone(),
        None => enclosing_function(&unit, usage.line)
            .map(|(name, _)| name)
            .ok_or_else(|| SessionError::NoEnclosingFunction {
                path: usage.unit_path.clone(),
                line: usage.line,
            })?,
    };

    let base_ctx = PromptContext {
        deprecated_display: Some(record.deprecated.display()),
        deprecation_level: Some(record.deprecation_level),
        replacements_display: record.replacements_display(),
        error_budget: config.error_budget,
        ..Default::default()
    };
    let update_prompt = render(
        config.variant.kind(),
        &PromptContext {
            code_snippet: Some(original.clone()),
            usage_line_hint: (usages.len() > 1).then_some(usage.line),
            ..base_ctx.clone()
        },
    )?;
    let test_prompt = render(
        PromptKind::GenerateTest,
        &PromptContext {
            function_name: Some(function.clone()),
            code_snippet: Some(original.clone()),
            ..base_ctx.clone()
        },
    )?;

    let mut run = Run {
        session: MigrationSession {
            session_id,
            record: record.clone(),
            usage: usage.clone(),
            levels,
            iteration: 0,
            max_iterations: config.max_iterations,
            current_code: original,
            current_test: None,
            status: SessionStatus::Pending,
            validation: None,
            history: Vec::new(),
            timings: PhaseTimings::default(),
            runner_calls: 0,
            gateway_calls: 0,
        },
        gateway,
        runner,
        project,
        file,
        tokens: Vec::new(),
        test_class: String::new(),
    };
    run.execute(update_prompt, test_prompt, base_ctx, config);
    run.finish(config.keep_changes);
    Ok(run.session)
}

struct Run<'a> {
    session: MigrationSession,
    gateway: &'a Gateway,
    runner: &'a dyn TestRunner,
    project: &'a ProjectTree,
    file: PathBuf,
    tokens: Vec<BackupToken>,
    test_class: String,
}

/// Short-circuit marker: the session already holds a terminal status.
struct Stop;

impl Run<'_> {
    fn execute(
        &mut self,
        update_prompt: crate::prompts::RenderedPrompt,
        test_prompt: crate::prompts::RenderedPrompt,
        base_ctx: PromptContext,
        config: &SessionConfig,
    ) {
        let _ = (|| -> Result<(), Stop> {
            // update
            let (code, latency) = self.ask("update", &update_prompt)?;
            self.session.timings.update = Some(latency);
            self.apply_code(&code.text)?;
            self.session.log("update", "applied; full file sent as code snippet");
            self.session.status = SessionStatus::UpdatedAwaitingTest;

            // test generation
            let (test, latency) = self.ask("generate_test", &test_prompt)?;
            self.session.timings.test_gen = Some(latency);
            self.install_test(&test.text, "generate_test")?;

            loop {
                self.session.status = SessionStatus::Testing;
                let (old, new) = self.run_both()?;
                if old.status == TestStatus::Passed && new.status == TestStatus::Passed {
                    let validation = validate_update(&self.session.current_code, &self.session.record);
                    self.session.status = if validation.verdict == crate::analysis::Verdict::Valid {
                        SessionStatus::Succeeded
                    } else {
                        SessionStatus::SucceededValidatorFlagged
                    };
                    self.session.log("validate", verdict_name(&validation));
                    self.session.validation = Some(validation);
                    return Ok(());
                }
                if self.session.iteration >= self.session.max_iterations {
                    self.session.status = SessionStatus::FailedBoundReached;
                    self.session.log("bound", format!("tests still failing after {} refinements", self.session.iteration));
                    return Err(Stop);
                }
                let kind = select_refinement_kind(&old, &new).expect("at least one level failed");
                let failing = if kind == PromptKind::RefineOldFailure { &old } else { &new };
                self.session.status = if kind == PromptKind::RefineOldFailure {
                    SessionStatus::RefiningTest
                } else {
                    SessionStatus::RefiningCode
                };
                let mut trailing: Vec<&str> = Vec::new();
                if kind == PromptKind::RefineNewFailure {
                    trailing.push(&self.session.current_code);
                }
                if let Some(extra) = config.supplemental_context.as_deref() {
                    trailing.push(extra);
                }
                let ctx = PromptContext {
                    test_name: Some(failing.failed_test.clone().unwrap_or_else(|| self.test_class.clone())),
                    error_message: Some(
                        failing
                            .message
                            .clone()
                            .filter(|m| !m.is_empty())
                            .unwrap_or_else(|| "(no message)".into()),
                    ),
                    test_code_snippet: self.session.current_test.clone(),
                    trailing_context: (!trailing.is_empty()).then(|| trailing.join("\n\n")),
                    ..base_ctx.clone()
                };
                let prompt = match render(kind, &ctx) {
                    Ok(p) => p,
                    Err(e) => {
                        self.session.status = SessionStatus::FailedInfrastructure;
                        self.session.log(kind.as_str(), e.to_string());
                        return Err(Stop);
                    }
                };
                self.session.iteration += 1;
                let (reply, latency) = self.ask(kind.as_str(), &prompt)?;
                self.session.timings.refinements.push(latency);
                match classify_refinement_reply(&reply, kind) {
                    RefinementTarget::TestReplacement => self.install_test(&reply.text, kind.as_str())?,
                    RefinementTarget::CodeReplacement => {
                        self.apply_code(&reply.text)?;
                        self.session.log(kind.as_str(), "code replaced");
                    }
                }
            }
        })();
    }

    /// One exchange plus extraction. Failures become terminal statuses.
    fn ask(&mut self, event: &str, prompt: &crate::prompts::RenderedPrompt) -> Result<(ExtractedCode, u64), Stop> {
        self.session.gateway_calls += 1;
        let exchange = match self.gateway.complete(&self.session.session_id, prompt) {
            Ok(e) => e,
            Err(e) => {
                self.session.status = SessionStatus::FailedInfrastructure;
                self.session.log(event, format!("gateway: {e}"));
                return Err(Stop);
            }
        };
        match extract_code(&exchange.response_text) {
            Ok(code) => Ok((code, exchange.latency_ms)),
            Err(e) => {
                self.session.status = SessionStatus::FailedNoCode;
                self.session.log(event, e.to_string());
                Err(Stop)
            }
        }
    }

    fn apply_code(&mut self, code: &str) -> Result<(), Stop> {
        let mut text = code.to_string();
        if !text.ends_with('\n') && self.session.current_code.ends_with('\n') {
            text.push('\n');
        }
        match self.project.apply_update(&self.file, &text) {
            Ok(token) => {
                self.tokens.push(token);
                self.session.current_code = text;
                Ok(())
            }
            Err(e) => self.infrastructure("apply_update", e),
        }
    }

    fn install_test(&mut self, source: &str, event: &str) -> Result<(), Stop> {
        let wrapped: WrappedTest = match wrap_test(source, self.session.levels) {
            Ok(w) => w,
            Err(e) => {
                self.session.status = SessionStatus::FailedNoCode;
                self.session.log(event, format!("reply is not a usable test class: {e}"));
                return Err(Stop);
            }
        };
        let rel = self.project.test_source_root().join(wrapped.relative_path());
        match self.project.install_file(&rel, &wrapped.source) {
            Ok(token) => self.tokens.push(token),
            Err(e) => return self.infrastructure("install_test", e),
        }
        self.test_class = wrapped.fully_qualified_name();
        self.session.current_test = Some(wrapped.source);
        self.session.log(event, format!("test {} installed with {} methods", self.test_class, wrapped.methods.len()));
        Ok(())
    }

    fn run_both(&mut self) -> Result<(TestRunOutcome, TestRunOutcome), Stop> {
        let levels = self.session.levels;
        self.session.runner_calls += 2;
        let outcome = run_tests(self.runner, self.project.root(), &self.test_class, levels);
        let (old, new) = match outcome {
            Ok(pair) => pair,
            Err(e) => {
                self.session.status = SessionStatus::FailedInfrastructure;
                self.session.log("run", format!("runner: {e}"));
                return Err(Stop);
            }
        };
        self.session.log("run", format!("old={} new={}", status_name(&old), status_name(&new)));
        for o in [&old, &new] {
            if o.status == TestStatus::InfrastructureError {
                self.session.status = SessionStatus::FailedInfrastructure;
                self.session
                    .log("run", format!("level {}: {}", o.level, o.message.clone().unwrap_or_default()));
                return Err(Stop);
            }
        }
        Ok((old, new))
    }

    fn infrastructure(&mut self, event: &str, e: HarnessError) -> Result<(), Stop> {
        self.session.status = SessionStatus::FailedInfrastructure;
        self.session.log(event, e.to_string());
        Err(Stop)
    }

    fn finish(&mut self, keep_changes: bool) {
        debug_assert!(self.session.status.is_terminal());
        if keep_changes && self.session.status.is_success() {
            self.project.discard(&self.tokens);
            self.session.log("project", "changes kept");
        } else if let Err(e) = self.project.restore_all(&self.tokens) {
            self.session.log("project", format!("restore failed: {e}"));
        } else {
            self.session.log("project", "restored");
        }
        let status = format!("{:?}", self.session.status);
        self.session.log("terminal", status);
    }
}

fn status_name(o: &TestRunOutcome) -> &'static str {
    match o.status {
        TestStatus::Passed => "passed",
        TestStatus::Failed => "failed",
        TestStatus::InfrastructureError => "error",
    }
}

fn verdict_name(v: &UpdateValidation) -> String {
    serde_json::to_value(v.verdict)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
