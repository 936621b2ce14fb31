//! Lexical analysis of Java sources: masking, call-site detection,
//! enclosing-method lookup and structural validation of updates.
//!
//! Everything here works on masked text (see [`lex_strip`]) and tracks only
//! braces, parentheses and literals. There is no type resolution; a call is
//! matched by member name alone.

mod lexer;
mod methods;
mod validate;

use std::sync::OnceLock;

pub use lexer::{lex_strip, LexWarning, LexWarningKind, Masked};
pub use methods::MethodSpan;
pub use validate::{validate_update, UpdateValidation, Verdict};

use crate::catalog::DeprecationRecord;

/// One source file with precomputed line starts and masked text.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    path: String,
    text: String,
    line_index: Vec<usize>,
    masked: Masked,
    methods: OnceLock<Vec<MethodSpan>>,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut line_index = vec![0];
        line_index.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        let masked = lex_strip(&text);
        Self {
            path: path.into(),
            text,
            line_index,
            masked,
            methods: OnceLock::new(),
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn masked(&self) -> &str {
        &self.masked.text
    }

    pub fn lex_warnings(&self) -> &[LexWarning] {
        &self.masked.warnings
    }

    pub fn line_index(&self) -> &[usize] {
        &self.line_index
    }

    pub fn line_count(&self) -> usize {
        self.line_index.len()
    }

    /// 1-based line containing byte `offset`.
    pub fn line_of(&self, offset: usize) -> usize {
        self.line_index.partition_point(|&start| start <= offset)
    }

    /// 1-based column (in characters) of byte `offset`.
    pub fn column_of(&self, offset: usize) -> usize {
        let start = self.line_index[self.line_of(offset) - 1];
        self.text[start..offset].chars().count() + 1
    }

    pub fn line_text(&self, line: usize) -> Option<&str> {
        let start = *self.line_index.get(line.checked_sub(1)?)?;
        let end = self
            .line_index
            .get(line)
            .map_or(self.text.len(), |&next| next - 1);
        Some(self.text[start..end].trim_end_matches('\r'))
    }

    /// Method and constructor bodies in file order.
    pub fn methods(&self) -> &[MethodSpan] {
        self.methods
            .get_or_init(|| methods::method_spans(self.masked(), |o| self.line_of(o)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UsageSite {
    pub unit_path: String,
    pub line: usize,
    pub column: usize,
    pub matched_member: String,
    pub enclosing_function: Option<String>,
    pub enclosing_span: Option<(usize, usize)>,
}

/// Every `. member (` call in file order, ignoring comments and literals.
pub fn find_usages(unit: &SourceUnit, record: &DeprecationRecord) -> Vec<UsageSite> {
    let member = record.deprecated.member_name.as_str();
    call_sites(unit.masked(), member, true)
        .into_iter()
        .map(|offset| {
            let line = unit.line_of(offset);
            let enclosing = enclosing_function(unit, line);
            UsageSite {
                unit_path: unit.path.clone(),
                line,
                column: unit.column_of(offset),
                matched_member: member.to_string(),
                enclosing_function: enclosing.as_ref().map(|(n, _)| n.clone()),
                enclosing_span: enclosing.map(|(_, s)| s),
            }
        })
        .collect()
}

/// The innermost method whose header-to-closing-brace span covers `line`.
pub fn enclosing_function(unit: &SourceUnit, line: usize) -> Option<(String, (usize, usize))> {
    unit.methods()
        .iter()
        .filter(|m| m.header_line <= line && line <= m.end_line)
        .max_by_key(|m| m.name_offset)
        .map(|m| (m.name.clone(), (m.header_line, m.end_line)))
}

pub(crate) fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

pub(crate) fn prev_non_ws(bytes: &[u8], before: usize) -> Option<(usize, u8)> {
    bytes[..before]
        .iter()
        .enumerate()
        .rev()
        .find(|(_, b)| !b.is_ascii_whitespace())
        .map(|(i, &b)| (i, b))
}

pub(crate) fn next_non_ws(bytes: &[u8], from: usize) -> Option<(usize, u8)> {
    bytes
        .get(from..)?
        .iter()
        .enumerate()
        .find(|(_, b)| !b.is_ascii_whitespace())
        .map(|(i, &b)| (from + i, b))
}

/// Identifier tokens as `(start, end)` byte ranges.
pub(crate) fn identifiers(masked: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let bytes = masked.as_bytes();
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < bytes.len() {
            if is_ident_byte(bytes[i]) && !bytes[i].is_ascii_digit() {
                let start = i;
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                return Some((start, i));
            }
            if is_ident_byte(bytes[i]) {
                // skip numeric literals such as 0x1F or 10L
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                continue;
            }
            i += 1;
        }
        None
    })
}

/// Offsets of `name (` tokens. With `dotted`, only `. name (` counts.
pub(crate) fn call_sites(masked: &str, name: &str, dotted: bool) -> Vec<usize> {
    let bytes = masked.as_bytes();
    identifiers(masked)
        .filter(|&(s, e)| &masked[s..e] == name)
        .filter(|&(_, e)| matches!(next_non_ws(bytes, e), Some((_, b'('))))
        .filter(|&(s, _)| {
            let prev = prev_non_ws(bytes, s);
            if dotted {
                matches!(prev, Some((_, b'.')))
            } else {
                !methods::looks_like_declaration(masked, s)
            }
        })
        .map(|(s, _)| s)
        .collect()
}
