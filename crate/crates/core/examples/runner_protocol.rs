//! Drives the shell stub runner and shows how runner output is checked.

use std::time::Duration;

use evolve::harness::{parse_runner_output, CommandRunner, TestRunner};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples = [
        (0, r#"{"status":"passed","failed_test":null,"message":null,"duration_ms":812}"#),
        (1, r#"{"status":"failed","failed_test":"t_newApi","message":"boom","duration_ms":900}"#),
        (0, r#"{"status":"failed","failed_test":"t_newApi","message":"boom","duration_ms":900}"#),
        (0, "BUILD SUCCESSFUL"),
    ];
    for (code, stdout) in samples {
        match parse_runner_output(23, code, stdout) {
            Ok(outcome) => println!("exit {code}: {:?} {:?}", outcome.status, outcome.failed_test),
            Err(e) => println!("exit {code}: {e}"),
        }
    }

    let dir = tempfile::tempdir()?;
    let plan = dir.path().join("plan");
    std::fs::write(&plan, "passed\nfailed readHour_newApi expected 0 but was 12\nmismatch\n")?;
    let script = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scripts/stub-runner.sh");
    let command = shlex::try_join(["env", &format!("STUB_RUNNER_PLAN={}", plan.display()), "sh", &script.to_string_lossy()])?;
    let runner = CommandRunner::from_command_line(&command, Duration::from_secs(10))?;
    for level in [22, 23, 23] {
        println!("sdk {level}: {:?}", runner.run(dir.path(), "com.example.clock.ClockActivityTest", level));
    }
    Ok(())
}
