#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use evolve::analysis::{find_usages, SourceUnit, UsageSite};
use evolve::catalog::{Catalog, DeprecationRecord};
use evolve::gateway::Gateway;
use evolve::harness::{CommandRunner, LevelPair, ProjectTree};
use evolve::session::{run_session, session_id, MigrationSession, SessionConfig, SessionInputs};

pub const CLOCK_FILE: &str = "app/src/main/java/com/example/clock/ClockActivity.java";
pub const INSTALLED_TEST: &str = "app/src/test/java/com/example/clock/ClockActivityTest.java";

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn listing(name: &str) -> String {
    read(&manifest_dir().join("tests/fixtures/listings").join(name))
}

pub fn data(rel: &str) -> String {
    read(&manifest_dir().join("examples/data").join(rel))
}

pub fn reply(name: &str) -> String {
    data(&format!("replies/{name}.java"))
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn catalog() -> Catalog {
    Catalog::load_path(&manifest_dir().join("examples/data/catalog.jsonl")).unwrap()
}

pub fn record(query: &str) -> DeprecationRecord {
    catalog().lookup(query).unwrap().unwrap().clone()
}

/// The model's answer wrapped the way chat models usually fence code.
pub fn fenced(code: &str) -> String {
    format!("Here is the updated code:\n\n```java\n{code}```\n\nThis keeps both API levels working.")
}

/// A fresh copy of the sample clock project plus a backup area.
pub struct ClockProject {
    pub dir: tempfile::TempDir,
}

impl ClockProject {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let src = manifest_dir().join("examples/data/clock-app");
        for entry in walkdir::WalkDir::new(&src) {
            let entry = entry.unwrap();
            let rel = entry.path().strip_prefix(&src).unwrap();
            let dest = dir.path().join("project").join(rel);
            if entry.file_type().is_dir() {
                std::fs::create_dir_all(&dest).unwrap();
            } else {
                std::fs::copy(entry.path(), &dest).unwrap();
            }
        }
        Self { dir }
    }

    pub fn root(&self) -> PathBuf {
        self.dir.path().join("project")
    }

    pub fn tree(&self) -> ProjectTree {
        ProjectTree::open(&self.root(), &self.dir.path().join("backups")).unwrap()
    }

    pub fn source(&self) -> String {
        read(&self.root().join(CLOCK_FILE))
    }

    pub fn usage(&self) -> (DeprecationRecord, UsageSite) {
        let record = record("android.widget.TimePicker#getCurrentHour()");
        let unit = SourceUnit::new(CLOCK_FILE, self.source());
        let usage = find_usages(&unit, &record).remove(0);
        (record, usage)
    }

    /// Relative paths of every file in the project, sorted.
    pub fn files(&self) -> Vec<String> {
        let mut out: Vec<String> = walkdir::WalkDir::new(self.root())
            .into_iter()
            .map(|e| e.unwrap())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.path().strip_prefix(self.root()).unwrap().to_string_lossy().into_owned())
            .collect();
        out.sort();
        out
    }
}

/// The shell stub runner driven by a plan file, logging each invocation.
pub struct StubRunner {
    pub dir: tempfile::TempDir,
}

impl StubRunner {
    pub fn new(plan: &[&str]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut text = plan.join("\n");
        text.push('\n');
        std::fs::write(dir.path().join("plan"), text).unwrap();
        Self { dir }
    }

    pub fn command_line(&self) -> String {
        let plan = self.dir.path().join("plan");
        let log = self.dir.path().join("log");
        let script = manifest_dir().join("scripts/stub-runner.sh");
        shlex::try_join([
            "env",
            &format!("STUB_RUNNER_PLAN={}", plan.display()),
            &format!("STUB_RUNNER_LOG={}", log.display()),
            "sh",
            &script.to_string_lossy(),
        ])
        .unwrap()
    }

    pub fn runner(&self) -> CommandRunner {
        CommandRunner::from_command_line(&self.command_line(), Duration::from_secs(30)).unwrap()
    }

    /// `sdk=.. class=.. project=..` per invocation.
    pub fn invocations(&self) -> Vec<String> {
        std::fs::read_to_string(self.dir.path().join("log"))
            .map(|s| s.lines().map(str::to_string).collect())
            .unwrap_or_default()
    }
}

pub fn run_clock_session(
    project: &ClockProject,
    gateway: &Gateway,
    runner: &CommandRunner,
    config: &SessionConfig,
) -> MigrationSession {
    let (record, usage) = project.usage();
    let tree = project.tree();
    let inputs = SessionInputs {
        session_id: session_id(&usage),
        record: &record,
        usage: &usage,
        levels: LevelPair::new(22, 23).unwrap(),
        project: &tree,
        config,
    };
    run_session(inputs, gateway, runner).unwrap()
}

/// One scripted end-to-end run: model replies, runner plan and expectations.
pub struct Scenario {
    pub name: &'static str,
    pub replies: Vec<String>,
    pub plan: Vec<&'static str>,
    pub status: evolve::SessionStatus,
    pub iterations: usize,
    pub gateway_calls: usize,
    pub runner_calls: usize,
}

pub fn scenarios() -> Vec<Scenario> {
    use evolve::SessionStatus::*;
    let update = fenced(&reply("guarded_update"));
    let test = fenced(&reply("generated_test"));
    let old_fail = "failed readHourReturnsPickerHour_oldApi java.lang.NullPointerException: activity not attached";
    let new_fail = "failed readHourReturnsPickerHour_newApi java.lang.AssertionError: expected:<0> but was:<12>";
    vec![
        Scenario {
            name: "pass at iteration 0",
            replies: vec![update.clone(), test.clone()],
            plan: vec!["passed", "passed"],
            status: Succeeded,
            iterations: 0,
            gateway_calls: 2,
            runner_calls: 2,
        },
        Scenario {
            name: "old-level failure refines the test once",
            replies: vec![update.clone(), test.clone(), fenced(&reply("refined_test"))],
            plan: vec![old_fail, "passed", "passed", "passed"],
            status: Succeeded,
            iterations: 1,
            gateway_calls: 3,
            runner_calls: 4,
        },
        Scenario {
            name: "new-level failure fixes the code",
            replies: vec![fenced(&reply("replacement_only_update")), test.clone(), update.clone()],
            plan: vec!["passed", new_fail, "passed", "passed"],
            status: Succeeded,
            iterations: 1,
            gateway_calls: 3,
            runner_calls: 4,
        },
        Scenario {
            name: "new-level failure brings a new test",
            replies: vec![update.clone(), test.clone(), fenced(&reply("new_behaviour_test"))],
            plan: vec!["passed", new_fail, "passed", "passed"],
            status: Succeeded,
            iterations: 1,
            gateway_calls: 3,
            runner_calls: 4,
        },
        Scenario {
            name: "bound exhausted after 5 refinements",
            replies: [update.clone(), test.clone()]
                .into_iter()
                .chain(std::iter::repeat_n(update.clone(), 5))
                .collect(),
            plan: std::iter::repeat_n(["passed", new_fail], 6).flatten().collect(),
            status: FailedBoundReached,
            iterations: 5,
            gateway_calls: 7,
            runner_calls: 12,
        },
        Scenario {
            name: "no code in the test reply",
            replies: vec![update.clone(), "I cannot write a test for this function.".into()],
            plan: vec![],
            status: FailedNoCode,
            iterations: 0,
            gateway_calls: 2,
            runner_calls: 0,
        },
        Scenario {
            name: "tests pass but the update drops the old API",
            replies: vec![fenced(&reply("replacement_only_update")), test.clone()],
            plan: vec!["passed", "passed"],
            status: SucceededValidatorFlagged,
            iterations: 0,
            gateway_calls: 2,
            runner_calls: 2,
        },
        Scenario {
            name: "runner infrastructure error",
            replies: vec![update.clone(), test.clone()],
            plan: vec!["error gradle daemon disappeared", "passed"],
            status: FailedInfrastructure,
            iterations: 0,
            gateway_calls: 2,
            runner_calls: 2,
        },
    ]
}

/// Prints one acceptance line; reports FAIL if the test body panicked.
/// Writes to the stdout handle directly so the harness does not capture it.
pub struct Criterion(pub &'static str);

impl Drop for Criterion {
    fn drop(&mut self) {
        use std::io::Write;
        let verdict = if std::thread::panicking() { "FAIL" } else { "PASS" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "[{verdict}] criterion {}", self.0);
        let _ = out.flush();
    }
}
