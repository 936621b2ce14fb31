mod common;

use std::sync::Arc;

use common::*;
use evolve::gateway::{Gateway, RetryPolicy, ScriptedTransport, TransportFailure};
use evolve::harness::ScriptedRunner;
use evolve::session::{PromptVariant, SessionConfig};
use evolve::{SessionStatus, TestRunOutcome};

fn live(replies: Vec<String>) -> (Arc<ScriptedTransport>, Gateway) {
    let transport = Arc::new(ScriptedTransport::new(replies));
    let gateway = Gateway::live(transport.clone(), "m").with_retry(RetryPolicy {
        max_attempts: 3,
        base_delay: std::time::Duration::from_millis(1),
    });
    (transport, gateway)
}

fn run(project: &ClockProject, gateway: &Gateway, runner: &ScriptedRunner, config: &SessionConfig) -> evolve::MigrationSession {
    let (record, usage) = project.usage();
    let tree = project.tree();
    evolve::session::run_session(
        evolve::session::SessionInputs {
            session_id: "s".into(),
            record: &record,
            usage: &usage,
            levels: evolve::LevelPair::new(22, 23).unwrap(),
            project: &tree,
            config,
        },
        gateway,
        runner,
    )
    .unwrap()
}

#[test]
fn refinement_prompts_carry_failure_details_and_current_code() {
    let project = ClockProject::new();
    let original = project.source();
    let replacement_only = reply("replacement_only_update");
    let (transport, gateway) = live(vec![
        fenced(&replacement_only),
        fenced(&reply("generated_test")),
        fenced(&reply("guarded_update")),
    ]);
    let runner = ScriptedRunner::new([
        TestRunOutcome::passed(22),
        TestRunOutcome::failed(23, "readHourReturnsPickerHour_newApi", "java.lang.AssertionError: 12"),
        TestRunOutcome::passed(22),
        TestRunOutcome::passed(23),
    ]);
    let config = SessionConfig {
        supplemental_context: Some("class TimeSource {}".into()),
        ..SessionConfig::default()
    };
    let s = run(&project, &gateway, &runner, &config);
    assert_eq!(s.status, SessionStatus::Succeeded);

    let prompts = transport.prompts();
    assert_eq!(prompts.len(), 3);
    assert!(prompts[0].starts_with("Update the usage of Deprecated API TimePicker.getCurrentHour()"));
    assert!(prompts[0].ends_with(&format!("\n\n{original}")));
    assert!(prompts[1].starts_with("Generate a Robolectric test for the function readHour "));
    let refine = &prompts[2];
    assert!(refine.starts_with(
        "The Robolectric test named readHourReturnsPickerHour_newApi passed on older Android versions but failed on newer ones with the error: java.lang.AssertionError: 12."
    ));
    // Wrapped test, then the code under test, then the operator's context.
    let test_at = refine.find("@Config(sdk = 23)").unwrap();
    let code_at = refine.find(replacement_only.trim_end()).unwrap();
    let extra_at = refine.find("class TimeSource {}").unwrap();
    assert!(test_at < code_at && code_at < extra_at);

    let calls: Vec<u32> = runner.calls().iter().map(|c| c.level).collect();
    assert_eq!(calls, [22, 23, 22, 23]);
    assert!(runner.calls().iter().all(|c| c.test_class == "com.example.clock.ClockActivityTest"));
}

#[test]
fn old_level_failure_wins_when_both_fail() {
    let project = ClockProject::new();
    let (transport, gateway) = live(vec![
        fenced(&reply("guarded_update")),
        fenced(&reply("generated_test")),
        fenced(&reply("refined_test")),
    ]);
    let runner = ScriptedRunner::new([
        TestRunOutcome::failed(22, "readHourReturnsPickerHour_oldApi", "old boom"),
        TestRunOutcome::failed(23, "readHourReturnsPickerHour_newApi", "new boom"),
        TestRunOutcome::passed(22),
        TestRunOutcome::passed(23),
    ]);
    let s = run(&project, &gateway, &runner, &SessionConfig::default());
    assert_eq!(s.status, SessionStatus::Succeeded);
    let refine = &transport.prompts()[2];
    assert!(refine.starts_with("The Robolectric test named readHourReturnsPickerHour_oldApi failed on older Android versions with the following error: old boom."));
    assert!(!refine.contains("new boom"));
    assert!(s.history.iter().any(|h| h.event == "refine_old_failure"));
}

#[test]
fn prompt_variants_change_only_the_update_prompt() {
    for (variant, opening) in [
        (PromptVariant::A, "Update any deprecated Android API usages in the following code."),
        (
            PromptVariant::B,
            "Update the usage of Deprecated API TimePicker.getCurrentHour() in the following code. The updated code",
        ),
    ] {
        let project = ClockProject::new();
        let (transport, gateway) = live(vec![fenced(&reply("guarded_update")), fenced(&reply("generated_test"))]);
        let runner = ScriptedRunner::new([TestRunOutcome::passed(22), TestRunOutcome::passed(23)]);
        let config = SessionConfig {
            variant,
            ..SessionConfig::default()
        };
        assert_eq!(run(&project, &gateway, &runner, &config).status, SessionStatus::Succeeded);
        let prompts = transport.prompts();
        assert!(prompts[0].starts_with(opening), "{variant:?}: {}", prompts[0]);
        assert!(prompts[1].starts_with("Generate a Robolectric test"));
    }
}

#[test]
fn transport_failure_is_an_infrastructure_failure_and_restores() {
    let project = ClockProject::new();
    let before = (project.files(), project.source());
    let (transport, gateway) = live(vec![fenced(&reply("guarded_update"))]);
    for _ in 0..3 {
        transport.push_failure(TransportFailure::Retryable("connection reset".into()));
    }
    let runner = ScriptedRunner::new([]);
    let s = run(&project, &gateway, &runner, &SessionConfig::default());
    assert_eq!(s.status, SessionStatus::FailedInfrastructure);
    assert_eq!(s.gateway_calls, 2);
    assert_eq!(runner.calls().len(), 0);
    assert!(s.history.iter().any(|h| h.outcome.contains("connection reset")));
    assert_eq!((project.files(), project.source()), before);
}

#[test]
fn bound_of_one_stops_after_a_single_refinement() {
    let project = ClockProject::new();
    let (_, gateway) = live(vec![
        fenced(&reply("guarded_update")),
        fenced(&reply("generated_test")),
        fenced(&reply("refined_test")),
    ]);
    let fail = || TestRunOutcome::failed(22, "readHourReturnsPickerHour_oldApi", "boom");
    let runner = ScriptedRunner::new([fail(), TestRunOutcome::passed(23), fail(), TestRunOutcome::passed(23)]);
    let config = SessionConfig {
        max_iterations: 1,
        ..SessionConfig::default()
    };
    let s = run(&project, &gateway, &runner, &config);
    assert_eq!(s.status, SessionStatus::FailedBoundReached);
    assert_eq!((s.iteration, s.gateway_calls, s.runner_calls), (1, 3, 4));
}

#[test]
fn a_reply_that_is_not_a_test_class_ends_without_code() {
    let project = ClockProject::new();
    let (_, gateway) = live(vec![fenced(&reply("guarded_update")), fenced("int x = 1;\n")]);
    let runner = ScriptedRunner::new([]);
    let s = run(&project, &gateway, &runner, &SessionConfig::default());
    assert_eq!(s.status, SessionStatus::FailedNoCode);
    assert!(!project.root().join(INSTALLED_TEST).exists());
}
