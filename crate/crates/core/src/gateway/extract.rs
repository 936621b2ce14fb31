use serde::{Deserialize, Serialize};
use thiserror::Error;

const FENCE: &str = "```";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeOrigin {
    FencedBlock,
    WholeResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedCode {
    pub text: String,
    pub fence_language_tag: Option<String>,
    pub origin: CodeOrigin,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("response contains no code")]
    NoCodeFound,
}

/// First non-empty fenced block, else the whole trimmed response if it looks
/// like code (contains `{`).
pub fn extract_code(response_text: &str) -> Result<ExtractedCode, ExtractError> {
    let mut rest = response_text;
    while let Some(open) = rest.find(FENCE) {
        let after = &rest[open + FENCE.len()..];
        let (info, body_start) = match after.find('\n') {
            Some(nl) => (&after[..nl], &after[nl + 1..]),
            None => (after, ""),
        };
        // ```java { ... } on one line: no info string, the line is code
        let (tag, body_start) = if info.contains(FENCE) {
            (None, after)
        } else {
            (language_tag(info), body_start)
        };
        let (body, next) = match body_start.find(FENCE) {
            Some(close) => (&body_start[..close], &body_start[close + FENCE.len()..]),
            None => (body_start, ""),
        };
        let text = body.trim_end().trim_start_matches(['\n', '\r']);
        if !text.trim().is_empty() {
            return Ok(ExtractedCode {
                text: text.to_string(),
                fence_language_tag: tag,
                origin: CodeOrigin::FencedBlock,
            });
        }
        rest = next;
    }
    let trimmed = response_text.trim();
    if trimmed.contains('{') && !trimmed.contains(FENCE) {
        return Ok(ExtractedCode {
            text: trimmed.to_string(),
            fence_language_tag: None,
            origin: CodeOrigin::WholeResponse,
        });
    }
    Err(ExtractError::NoCodeFound)
}

fn language_tag(info: &str) -> Option<String> {
    let tag = info.split_whitespace().next()?;
    tag.chars()
        .all(|c| c.is_ascii_alphanumeric() || "+-#._".contains(c))
        .then(|| tag.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const UPDATE: &str = include_str!("../../tests/fixtures/listings/timepicker_guarded_update.java");

    #[test]
    fn fenced_block_with_tag() {
        let response = format!("Here is the updated code:\n\n```java\n{UPDATE}```\n\nThis keeps old devices working.");
        let code = extract_code(&response).unwrap();
        assert_eq!(code.origin, CodeOrigin::FencedBlock);
        assert_eq!(code.fence_language_tag.as_deref(), Some("java"));
        assert_eq!(code.text, UPDATE.trim_end());
    }

    #[test]
    fn unfenced_code_is_whole_response() {
        let response = format!("\n\n{UPDATE}\n\n");
        let code = extract_code(&response).unwrap();
        assert_eq!(code.origin, CodeOrigin::WholeResponse);
        assert_eq!(code.text, UPDATE.trim());
    }

    #[test]
    fn prose_is_no_code() {
        assert_eq!(extract_code("I cannot update this"), Err(ExtractError::NoCodeFound));
        assert_eq!(extract_code("```\n\n```"), Err(ExtractError::NoCodeFound));
    }

    #[test]
    fn first_non_empty_block_wins_and_fences_never_leak() {
        let code = extract_code("```\n```\ntext\n```kotlin\nval a = 1\n```\n```java\nint b;\n```").unwrap();
        assert_eq!(code.text, "val a = 1");
        assert_eq!(code.fence_language_tag.as_deref(), Some("kotlin"));

        let unclosed = extract_code("```java\nclass A { }\n").unwrap();
        assert_eq!(unclosed.text, "class A { }");

        let inline = extract_code("```int x = f() { }```").unwrap();
        assert_eq!(inline.text, "int x = f() { }");
        assert_eq!(inline.fence_language_tag, None);
    }
}
