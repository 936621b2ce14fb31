//! Prompt rendering.
//!
//! Each [`PromptKind`] has one fixed template. Placeholders are substituted
//! verbatim, multiple replacement APIs are joined with `" and "`, and the
//! output is a pure function of the kind and the context.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::harness::{TestRunOutcome, TestStatus};

/// Sentence appended after the request sentence of update prompts when the
/// file holds more than one usage of the API.
pub fn line_hint_sentence(line: usize) -> String {
    format!("The usage to update is on line {line}.")
}

const COMPAT_SENTENCE: &str =
    "The updated code should be designed to maintain compatibility with both old and new Android versions.";
const REQUEST_SENTENCE: &str = "Please provide the updated code segment.";

/// Error messages longer than this many characters are cut down.
pub const DEFAULT_ERROR_BUDGET: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    UpdateFull,
    /// Ablation: no API named at all.
    UpdatePromptA,
    /// Ablation: the deprecated API named, without level or replacement.
    UpdatePromptB,
    GenerateTest,
    RefineOldFailure,
    RefineNewFailure,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::UpdateFull,
        PromptKind::UpdatePromptA,
        PromptKind::UpdatePromptB,
        PromptKind::GenerateTest,
        PromptKind::RefineOldFailure,
        PromptKind::RefineNewFailure,
    ];

    pub fn is_update(self) -> bool {
        matches!(
            self,
            PromptKind::UpdateFull | PromptKind::UpdatePromptA | PromptKind::UpdatePromptB
        )
    }

    pub fn is_refinement(self) -> bool {
        matches!(self, PromptKind::RefineOldFailure | PromptKind::RefineNewFailure)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::UpdateFull => "update_full",
            PromptKind::UpdatePromptA => "update_prompt_a",
            PromptKind::UpdatePromptB => "update_prompt_b",
            PromptKind::GenerateTest => "generate_test",
            PromptKind::RefineOldFailure => "refine_old_failure",
            PromptKind::RefineNewFailure => "refine_new_failure",
        }
    }
}

/// Values for every bracketed placeholder in the templates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    /// `[Deprecated API]`, display form.
    pub deprecated_display: Option<String>,
    /// `[API level]`
    pub deprecation_level: Option<u32>,
    /// `[Replacement API]`, display form, in catalog order.
    pub replacements_display: Vec<String>,
    /// `[Code snippet]`
    pub code_snippet: Option<String>,
    /// `[Function name]`
    pub function_name: Option<String>,
    /// `[Test Name]`
    pub test_name: Option<String>,
    /// `[Error Message]`
    pub error_message: Option<String>,
    /// `[Test code snippet]`
    pub test_code_snippet: Option<String>,
    /// Line of the targeted usage, for files with several usages.
    pub usage_line_hint: Option<usize>,
    /// Code appended after the test snippet of refinement prompts, e.g. the
    /// current code under test or operator-supplied context.
    pub trailing_context: Option<String>,
    /// Character budget for `error_message`.
    pub error_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub text: String,
    /// SHA-256 over the kind and context.
    pub fingerprint: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("{kind:?} prompt needs `{field}`")]
    MissingField { kind: PromptKind, field: &'static str },
    #[error("no failing run to refine from")]
    NoFailure,
}

pub fn render(kind: PromptKind, ctx: &PromptContext) -> Result<RenderedPrompt, PromptError> {
    let missing = |field| PromptError::MissingField { kind, field };
    let need = |v: &Option<String>, field| v.clone().filter(|s| !s.is_empty()).ok_or_else(|| missing(field));
    let replacements = || {
        if ctx.replacements_display.is_empty() {
            Err(missing("replacements_display"))
        } else {
            Ok(ctx.replacements_display.join(" and "))
        }
    };
    let hint = || {
        ctx.usage_line_hint
            .map(|l| format!(" {}", line_hint_sentence(l)))
            .unwrap_or_default()
    };

    let text = match kind {
        PromptKind::UpdateFull => {
            let deprecated = need(&ctx.deprecated_display, "deprecated_display")?;
            let level = ctx.deprecation_level.ok_or_else(|| missing("deprecation_level"))?;
            let replacements = replacements()?;
            let code = need(&ctx.code_snippet, "code_snippet")?;
            format!(
                "Update the usage of Deprecated API {deprecated} in the following code. \
                 It is deprecated in API level {level} and replaced with {replacements}. \
                 {COMPAT_SENTENCE} {REQUEST_SENTENCE}{}\n\n{code}",
                hint()
            )
        }
        PromptKind::UpdatePromptA => {
            let code = need(&ctx.code_snippet, "code_snippet")?;
            format!(
                "Update any deprecated Android API usages in the following code. \
                 {COMPAT_SENTENCE} {REQUEST_SENTENCE}{}\n\n{code}",
                hint()
            )
        }
        PromptKind::UpdatePromptB => {
            let deprecated = need(&ctx.deprecated_display, "deprecated_display")?;
            let code = need(&ctx.code_snippet, "code_snippet")?;
            format!(
                "Update the usage of Deprecated API {deprecated} in the following code. \
                 {COMPAT_SENTENCE} {REQUEST_SENTENCE}{}\n\n{code}",
                hint()
            )
        }
        PromptKind::GenerateTest => {
            let function = need(&ctx.function_name, "function_name")?;
            let deprecated = need(&ctx.deprecated_display, "deprecated_display")?;
            let code = need(&ctx.code_snippet, "code_snippet")?;
            format!(
                "Generate a Robolectric test for the function {function} to test its current \
                 functionality where the deprecated API {deprecated} is used. This will help us \
                 verify any changes made to its behavior after the update.\n\n{code}"
            )
        }
        PromptKind::RefineOldFailure => {
            let test = need(&ctx.test_name, "test_name")?;
            let error = truncate_error(&need(&ctx.error_message, "error_message")?, budget(ctx));
            let test_code = need(&ctx.test_code_snippet, "test_code_snippet")?;
            format!(
                "The Robolectric test named {test} failed on older Android versions with the \
                 following error: {error}. Please refine the test to correct this error.\n\n{test_code}{}",
                trailing(ctx)
            )
        }
        PromptKind::RefineNewFailure => {
            let test = need(&ctx.test_name, "test_name")?;
            let error = truncate_error(&need(&ctx.error_message, "error_message")?, budget(ctx));
            let test_code = need(&ctx.test_code_snippet, "test_code_snippet")?;
            let deprecated = need(&ctx.deprecated_display, "deprecated_display")?;
            let replacements = replacements()?;
            format!(
                "The Robolectric test named {test} passed on older Android versions but failed on \
                 newer ones with the error: {error}. If the new API {replacements} behaves \
                 differently than the deprecated one {deprecated} and cannot be tested with the \
                 initially generated test, generate a new Robolectric test to capture this \
                 behavior. Otherwise, make changes in the code you provided to resolve the \
                 issue.\n\n{test_code}{}",
                trailing(ctx)
            )
        }
    };

    Ok(RenderedPrompt {
        kind,
        text,
        fingerprint: fingerprint(kind, ctx),
    })
}

fn budget(ctx: &PromptContext) -> usize {
    ctx.error_budget.unwrap_or(DEFAULT_ERROR_BUDGET)
}

fn trailing(ctx: &PromptContext) -> String {
    match ctx.trailing_context.as_deref() {
        Some(extra) if !extra.trim().is_empty() => format!("\n\n{extra}"),
        _ => String::new(),
    }
}

/// Keeps the first 3/4 and last 1/4 of the budget around a marker when
/// `message` exceeds `budget` characters.
pub fn truncate_error(message: &str, budget: usize) -> String {
    let len = message.chars().count();
    if len <= budget {
        return message.to_string();
    }
    let head = budget * 3 / 4;
    let tail = budget - head;
    let dropped = len - head - tail;
    let head_text: String = message.chars().take(head).collect();
    let tail_text: String = message.chars().skip(len - tail).collect();
    format!("{head_text}\n... ({dropped} characters omitted) ...\n{tail_text}")
}

fn fingerprint(kind: PromptKind, ctx: &PromptContext) -> String {
    let mut hasher = Sha256::new();
    hasher.update(kind.as_str());
    hasher.update([0]);
    hasher.update(serde_json::to_vec(ctx).expect("context serializes"));
    hex::encode(hasher.finalize())
}

/// Old-level failure wins; a new-level failure alone asks for code or a new
/// test.
pub fn select_refinement_kind(
    old: &TestRunOutcome,
    new: &TestRunOutcome,
) -> Result<PromptKind, PromptError> {
    match (old.status, new.status) {
        (TestStatus::Passed, TestStatus::Passed) => Err(PromptError::NoFailure),
        (TestStatus::Passed, _) => Ok(PromptKind::RefineNewFailure),
        _ => Ok(PromptKind::RefineOldFailure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timepicker_ctx() -> PromptContext {
        PromptContext {
            deprecated_display: Some("TimePicker.getCurrentHour()".into()),
            deprecation_level: Some(23),
            replacements_display: vec!["TimePicker.getHour()".into()],
            code_snippet: Some("int hour = timePicker.getCurrentHour()".into()),
            ..Default::default()
        }
    }

    #[test]
    fn update_prompt_matches_worked_example() {
        let p = render(PromptKind::UpdateFull, &timepicker_ctx()).unwrap();
        assert_eq!(
            p.text,
            "Update the usage of Deprecated API TimePicker.getCurrentHour() in the following code. \
It is deprecated in API level 23 and replaced with TimePicker.getHour(). The updated code should \
be designed to maintain compatibility with both old and new Android versions. Please provide the \
updated code segment.\n\nint hour = timePicker.getCurrentHour()"
        );
    }

    #[test]
    fn sentence_order_in_update_prompt() {
        let text = render(PromptKind::UpdateFull, &timepicker_ctx()).unwrap().text;
        let directive = text.find("Update the usage of Deprecated API").unwrap();
        let compat = text.find("maintain compatibility with both old and new Android versions").unwrap();
        let request = text.find(REQUEST_SENTENCE).unwrap();
        let blank = text.find("\n\n").unwrap();
        let code = text.find("int hour").unwrap();
        assert!(directive < compat && compat < request && request < blank && blank < code);
    }

    #[test]
    fn line_hint_follows_request_sentence() {
        let mut ctx = timepicker_ctx();
        ctx.usage_line_hint = Some(42);
        let text = render(PromptKind::UpdateFull, &ctx).unwrap().text;
        assert!(text.contains("Please provide the updated code segment. The usage to update is on line 42.\n\nint hour"));
    }

    #[test]
    fn replacements_join_with_and() {
        for k in 1..5 {
            let mut ctx = timepicker_ctx();
            ctx.replacements_display = (0..k).map(|i| format!("R.r{i}()")).collect();
            let text = render(PromptKind::UpdateFull, &ctx).unwrap().text;
            let clause = ctx.replacements_display.join(" and ");
            assert!(text.contains(&format!("replaced with {clause}.")));
            assert_eq!(text.matches(" and R.r").count(), k - 1);
        }
    }

    #[test]
    fn missing_fields_reported() {
        let ctx = timepicker_ctx();
        assert_eq!(
            render(PromptKind::GenerateTest, &ctx).unwrap_err(),
            PromptError::MissingField { kind: PromptKind::GenerateTest, field: "function_name" }
        );
        let mut no_reps = timepicker_ctx();
        no_reps.replacements_display.clear();
        assert!(matches!(
            render(PromptKind::UpdateFull, &no_reps),
            Err(PromptError::MissingField { field: "replacements_display", .. })
        ));
        assert!(matches!(
            render(PromptKind::RefineOldFailure, &ctx),
            Err(PromptError::MissingField { field: "test_name", .. })
        ));
        // Prompt A only needs the code
        let only_code = PromptContext { code_snippet: Some("x();".into()), ..Default::default() };
        assert!(render(PromptKind::UpdatePromptA, &only_code).is_ok());
        assert!(render(PromptKind::UpdatePromptB, &only_code).is_err());
    }

    #[test]
    fn rendering_is_deterministic_and_fingerprinted() {
        let a = render(PromptKind::UpdateFull, &timepicker_ctx()).unwrap();
        let b = render(PromptKind::UpdateFull, &timepicker_ctx()).unwrap();
        assert_eq!(a, b);
        let mut other = timepicker_ctx();
        other.deprecation_level = Some(24);
        assert_ne!(render(PromptKind::UpdateFull, &other).unwrap().fingerprint, a.fingerprint);
        assert_eq!(a.fingerprint.len(), 64);
    }

    #[test]
    fn long_errors_are_truncated_head_and_tail() {
        let msg: String = (0..5000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let cut = truncate_error(&msg, DEFAULT_ERROR_BUDGET);
        assert!(cut.starts_with(&msg[..3000]));
        assert!(cut.ends_with(&msg[4000..]));
        assert!(cut.contains("(1000 characters omitted)"));
        assert_eq!(truncate_error("short", DEFAULT_ERROR_BUDGET), "short");
        let small = truncate_error(&msg, 100);
        assert!(small.starts_with(&msg[..75]) && small.ends_with(&msg[4975..]));
    }

    #[test]
    fn no_placeholder_survives_rendering() {
        let ctx = PromptContext {
            deprecated_display: Some("A.b()".into()),
            deprecation_level: Some(5),
            replacements_display: vec!["A.c()".into()],
            code_snippet: Some("x.b();".into()),
            function_name: Some("f".into()),
            test_name: Some("t".into()),
            error_message: Some("boom".into()),
            test_code_snippet: Some("@Test void t() {}".into()),
            ..Default::default()
        };
        let placeholders = [
            "[Deprecated API]", "[API level]", "[Replacement API]", "[Code snippet]",
            "[Function name]", "[Test Name]", "[Error Message]", "[Test code snippet]",
        ];
        for kind in PromptKind::ALL {
            let text = render(kind, &ctx).unwrap().text;
            for p in placeholders {
                assert!(!text.contains(p), "{kind:?} left {p}");
            }
        }
    }
}
