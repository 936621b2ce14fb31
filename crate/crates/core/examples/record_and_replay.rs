//! Runs one migration session against canned model replies, records the
//! transcript, then replays it strictly on a fresh copy of the project.
//!
//!     cargo run --example record_and_replay [TRANSCRIPT_OUT]
//!
//! The transcript it writes can be fed to `evolve migrate --provider replay`.

use std::path::{Path, PathBuf};

use evolve::analysis::find_usages;
use evolve::gateway::{Gateway, ReplayMatch, ScriptedTransport};
use evolve::harness::{ProjectTree, ScriptedRunner};
use evolve::session::{run_session, session_id, SessionConfig, SessionInputs};
use evolve::{Catalog, LevelPair, MigrationSession, SourceUnit, TestRunOutcome};

const FILE: &str = "app/src/main/java/com/example/clock/ClockActivity.java";

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry?;
        let dest = to.join(entry.path().strip_prefix(from).expect("under root"));
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(dest)?;
        } else {
            std::fs::copy(entry.path(), dest)?;
        }
    }
    Ok(())
}

fn session(data: &Path, gateway: &Gateway) -> Result<MigrationSession, Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let root = work.path().join("clock-app");
    copy_tree(&data.join("clock-app"), &root)?;
    let project = ProjectTree::open(&root, &work.path().join("backups"))?;

    let catalog = Catalog::load_path(&data.join("catalog.jsonl"))?;
    let record = catalog.lookup("TimePicker.getCurrentHour()")?.expect("in the sample catalog");
    let unit = SourceUnit::new(FILE, std::fs::read_to_string(root.join(FILE))?);
    let usage = find_usages(&unit, record).remove(0);

    // Old level fails once, then everything passes.
    let runner = ScriptedRunner::new([
        TestRunOutcome::failed(22, "readHourReturnsPickerHour_oldApi", "java.lang.NullPointerException"),
        TestRunOutcome::passed(23),
        TestRunOutcome::passed(22),
        TestRunOutcome::passed(23),
    ]);
    let config = SessionConfig::default();
    let inputs = SessionInputs {
        session_id: session_id(&usage),
        record,
        usage: &usage,
        levels: LevelPair::new(22, 23)?,
        project: &project,
        config: &config,
    };
    Ok(run_session(inputs, gateway, &runner)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let tmp = tempfile::tempdir()?;
    let transcript = std::env::args().nth(1).map(PathBuf::from).unwrap_or(tmp.path().join("transcript.jsonl"));

    let reply = |name: &str| -> std::io::Result<String> {
        let code = std::fs::read_to_string(data.join(format!("replies/{name}.java")))?;
        Ok(format!("```java\n{code}```"))
    };
    let transport = ScriptedTransport::new([reply("guarded_update")?, reply("generated_test")?, reply("refined_test")?]);
    let recorded = session(&data, &Gateway::record(transport, "gpt-4-0613", &transcript)?)?;

    let replayed = session(&data, &Gateway::replay_file(&transcript, ReplayMatch::Strict)?)?;

    for entry in &recorded.history {
        println!("[{}] {:<18} {}", entry.iteration, entry.event, entry.outcome);
    }
    println!("recorded: {:?}, replayed: {:?}", recorded.status, replayed.status);
    println!("histories identical: {}", recorded.history == replayed.history);
    println!("transcript: {}", transcript.display());
    Ok(())
}
