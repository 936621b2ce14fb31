//! Brace-depth tracking over masked text to find method bodies.

use std::sync::LazyLock;

use regex::Regex;

use super::{is_ident_byte, prev_non_ws};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpan {
    pub name: String,
    /// Byte offset of the name token.
    pub name_offset: usize,
    /// Line of the name token.
    pub header_line: usize,
    /// Byte offset of the opening body brace.
    pub body_open: usize,
    /// Byte offset of the closing body brace, or the text length when the
    /// body never closes.
    pub body_close: usize,
    pub end_line: usize,
}

/// Keywords that can sit right before `(` in a block header.
const CONTROL_WORDS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "try", "return", "new", "else", "do",
    "super", "this", "assert", "throw", "case", "yield",
];

/// Words that, right before a name, make `name(` an expression rather than a
/// declaration.
const EXPRESSION_WORDS: &[&str] = &[
    "new", "return", "throw", "else", "case", "yield", "assert", "do", "record",
];

static THROWS_TAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\)\s*throws\s+[\w$.<>\[\],?\s]+$").unwrap());

pub(crate) fn method_spans(masked: &str, line_of: impl Fn(usize) -> usize) -> Vec<MethodSpan> {
    struct Frame {
        method: Option<(String, usize)>,
        open: usize,
    }

    let bytes = masked.as_bytes();
    let mut stack: Vec<Frame> = Vec::new();
    let mut spans = Vec::new();
    let mut segment_start = 0;

    let close = |frame: Frame, at: usize, spans: &mut Vec<MethodSpan>| {
        if let Some((name, name_offset)) = frame.method {
            spans.push(MethodSpan {
                name,
                name_offset,
                header_line: line_of(name_offset),
                body_open: frame.open,
                body_close: at,
                end_line: line_of(at.min(masked.len().saturating_sub(1))),
            });
        }
    };

    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'{' => {
                let method = method_header(&masked[segment_start..i])
                    .map(|(name, rel)| (name, segment_start + rel));
                stack.push(Frame { method, open: i });
                segment_start = i + 1;
            }
            b'}' => {
                if let Some(frame) = stack.pop() {
                    close(frame, i, &mut spans);
                }
                segment_start = i + 1;
            }
            b';' => segment_start = i + 1,
            _ => {}
        }
    }
    while let Some(frame) = stack.pop() {
        close(frame, masked.len(), &mut spans);
    }
    spans.sort_by_key(|s| s.name_offset);
    spans
}

/// If `header` (text between the previous `{`, `}` or `;` and a `{`) declares
/// a method or constructor, its name and the name's offset within `header`.
fn method_header(header: &str) -> Option<(String, usize)> {
    let mut end = header.trim_end().len();
    if let Some(m) = THROWS_TAIL.find(&header[..end]) {
        end = m.start() + 1;
    }
    let bytes = header.as_bytes();
    if end == 0 || bytes[end - 1] != b')' {
        return None;
    }
    let open = matching_open_paren(bytes, end - 1)?;
    let name_end = prev_non_ws(bytes, open).map(|(i, _)| i + 1)?;
    let mut name_start = name_end;
    while name_start > 0 && is_ident_byte(bytes[name_start - 1]) {
        name_start -= 1;
    }
    if name_start == name_end || bytes[name_start].is_ascii_digit() {
        return None;
    }
    let name = &header[name_start..name_end];
    if CONTROL_WORDS.contains(&name) {
        return None;
    }
    if !declaration_context(header, name_start) {
        return None;
    }
    Some((name.to_string(), name_start))
}

/// Whether the token before a name at `name_start` reads as a return type,
/// modifier or annotation (declaration) rather than an operator or keyword
/// (expression).
fn declaration_context(text: &str, name_start: usize) -> bool {
    let bytes = text.as_bytes();
    let Some((prev, b)) = prev_non_ws(bytes, name_start) else {
        return true;
    };
    match b {
        b'>' => {
            // `List<T> name(` but not `a > name(` or `-> name(`
            prev > 0 && bytes[prev - 1] != b'-' && !bytes[prev - 1].is_ascii_whitespace()
        }
        b']' => true,
        b')' => text[..prev].contains('@'),
        _ if is_ident_byte(b) => {
            let mut start = prev;
            while start > 0 && is_ident_byte(bytes[start - 1]) {
                start -= 1;
            }
            let word = &text[start..=prev];
            if EXPRESSION_WORDS.contains(&word) {
                return false;
            }
            // `a.b name(` is not a declaration, but `Foo.Bar name(` is
            !matches!(prev_non_ws(bytes, start), Some((_, b'.'))) || word.starts_with(char::is_uppercase)
        }
        _ => false,
    }
}

fn matching_open_paren(bytes: &[u8], close: usize) -> Option<usize> {
    let mut depth = 0i32;
    for i in (0..=close).rev() {
        match bytes[i] {
            b')' => depth += 1,
            b'(' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Whether the identifier at `name_start` in `masked` is being declared
/// (`void name(`) rather than called.
pub(crate) fn looks_like_declaration(masked: &str, name_start: usize) -> bool {
    let bytes = masked.as_bytes();
    match prev_non_ws(bytes, name_start) {
        None => false,
        Some((_, b)) if is_ident_byte(b) || b == b'>' || b == b']' => {
            declaration_context(masked, name_start)
        }
        Some(_) => false,
    }
}
