//! Duplicates every `@Test` method into an old-level and a new-level copy,
//! each pinned with a method-level `@Config(sdk = N)`.

use std::sync::LazyLock;

use regex::Regex;

use super::{HarnessError, LevelPair};
use crate::analysis::{lex_strip, SourceUnit};

pub const OLD_SUFFIX: &str = "_oldApi";
pub const NEW_SUFFIX: &str = "_newApi";
const CONFIG_IMPORT: &str = "import org.robolectric.annotation.Config;";

static CLASS_DECL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bclass\s+([A-Za-z_$][\w$]*)").unwrap());
static PACKAGE_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*package\s+([\w$.]+)\s*;").unwrap());
static TEST_ANNOTATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@\s*(?:org\s*\.\s*junit\s*\.\s*)?Test\b").unwrap());
static CONFIG_ANNOTATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@\s*(?:org\s*\.\s*robolectric\s*\.\s*annotation\s*\.\s*)?Config\s*\(").unwrap());
static IMPORT_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\s*import\s+[^;]+;[^\n]*$").unwrap());
static CONFIG_IMPORTED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"import\s+org\s*\.\s*robolectric\s*\.\s*annotation\s*\.\s*(?:Config|\*)\s*;").unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrappedTest {
    pub source: String,
    pub package: Option<String>,
    pub class_name: String,
    /// Emitted test method names, old copy then new copy per input test.
    pub methods: Vec<String>,
}

impl WrappedTest {
    pub fn fully_qualified_name(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.class_name),
            None => self.class_name.clone(),
        }
    }

    /// Relative path of the test file under a test source root.
    pub fn relative_path(&self) -> std::path::PathBuf {
        let mut path = std::path::PathBuf::new();
        if let Some(p) = &self.package {
            path.extend(p.split('.'));
        }
        path.push(format!("{}.java", self.class_name));
        path
    }
}

struct TestMethod {
    /// Byte range of the whole member, annotations through closing brace.
    start: usize,
    end: usize,
    name: String,
    name_offset: usize,
}

/// Wraps the test class for `levels`. Input that was already wrapped (paired
/// `_oldApi`/`_newApi` methods) is unwrapped first, so wrapping is idempotent.
pub fn wrap_test(test_source: &str, levels: LevelPair) -> Result<WrappedTest, HarnessError> {
    let source = unwrap_pairs(test_source)?;
    let unit = SourceUnit::new("Test.java", source.as_str());
    let masked = unit.masked();

    let class = CLASS_DECL
        .captures(masked)
        .ok_or_else(|| HarnessError::UnparsableTestClass("no class declaration".into()))?;
    let class_name = class[1].to_string();
    let class_decl_end = class.get(0).unwrap().end();
    let package = PACKAGE_DECL.captures(masked).map(|c| c[1].to_string());

    let tests = test_methods(&unit, class_decl_end)?;
    if tests.is_empty() {
        return Err(HarnessError::NoTestMethods);
    }

    let mut out = source.clone();
    let mut methods = Vec::new();
    for m in tests.iter().rev() {
        let original = &source[m.start..m.end];
        let indent = indentation_before(&source, m.start);
        let old = pinned_copy(&source, m, levels.old_level, OLD_SUFFIX);
        let new = pinned_copy(&source, m, levels.new_level, NEW_SUFFIX);
        debug_assert!(!original.is_empty());
        out.replace_range(m.start..m.end, &format!("{old}\n\n{indent}{new}"));
        methods.push(format!("{}{NEW_SUFFIX}", m.name));
        methods.push(format!("{}{OLD_SUFFIX}", m.name));
    }
    methods.reverse();

    let out = ensure_config_import(&out);
    Ok(WrappedTest {
        source: out,
        package,
        class_name,
        methods,
    })
}

/// `@Test` methods declared directly in the first class body.
fn test_methods(unit: &SourceUnit, class_decl_end: usize) -> Result<Vec<TestMethod>, HarnessError> {
    let masked = unit.masked();
    let bytes = masked.as_bytes();
    let body_open = masked[class_decl_end..]
        .find('{')
        .map(|i| class_decl_end + i)
        .ok_or_else(|| HarnessError::UnparsableTestClass("class has no body".into()))?;
    let mut depth = 0usize;
    let mut body_close = None;
    for (i, &b) in bytes.iter().enumerate().skip(body_open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    body_close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let body_close = body_close.ok_or_else(|| HarnessError::UnparsableTestClass("unbalanced braces".into()))?;

    let mut members: Vec<_> = unit
        .methods()
        .iter()
        .filter(|m| m.name_offset > body_open && m.body_close < body_close)
        .collect();
    // keep only members not nested in another method
    let outer: Vec<(usize, usize)> = members.iter().map(|m| (m.body_open, m.body_close)).collect();
    members.retain(|m| !outer.iter().any(|&(o, c)| o < m.name_offset && m.body_close < c));

    let mut tests = Vec::new();
    for m in members {
        let seg_start = masked[..m.name_offset]
            .rfind(['{', '}', ';'])
            .map_or(0, |i| i + 1);
        let header = &masked[seg_start..m.body_open];
        if !TEST_ANNOTATION.is_match(header) {
            continue;
        }
        let lead = header.len() - header.trim_start().len();
        if m.body_close >= masked.len() {
            return Err(HarnessError::UnparsableTestClass(format!("method {} never closes", m.name)));
        }
        tests.push(TestMethod {
            start: seg_start + lead,
            end: m.body_close + 1,
            name: m.name.clone(),
            name_offset: m.name_offset,
        });
    }
    Ok(tests)
}

/// The member text with any method-level `@Config(...)` removed, a new
/// `@Config(sdk = level)` after `@Test`, and the name suffixed.
fn pinned_copy(source: &str, m: &TestMethod, level: u32, suffix: &str) -> String {
    let masked = lex_strip(&source[m.start..m.end]).text;
    let text = &source[m.start..m.end];
    let name_rel = m.name_offset - m.start;
    let header_masked = &masked[..name_rel];

    // edits as (start, end, replacement), applied back to front
    let mut edits: Vec<(usize, usize, String)> = Vec::new();
    edits.push((name_rel, name_rel + m.name.len(), format!("{}{suffix}", m.name)));

    for found in CONFIG_ANNOTATION.find_iter(header_masked) {
        let open = found.end() - 1;
        let Some(close) = matching_paren(masked.as_bytes(), open) else { continue };
        let line_start = text[..found.start()].rfind('\n').map_or(0, |i| i + 1);
        let line_end = text[close..].find('\n').map_or(text.len(), |i| close + i);
        let before = &masked[line_start..found.start()];
        let after = masked[close + 1..line_end].trim();
        let only_annotation = before.trim().is_empty() && (after.is_empty() || after.starts_with("//"));
        if only_annotation && line_end < text.len() {
            edits.push((line_start, line_end + 1, String::new()));
        } else {
            edits.push((found.start(), close + 1, String::new()));
        }
    }

    let test_at = TEST_ANNOTATION.find(header_masked).expect("test method has @Test");
    let test_line_start = text[..test_at.start()].rfind('\n').map_or(0, |i| i + 1);
    let test_indent: String = if test_line_start == 0 {
        indentation_before(source, m.start)
    } else {
        text[test_line_start..test_at.start()].to_string()
    };
    let after_test_line = text[test_at.end()..]
        .find('\n')
        .map(|i| test_at.end() + i);
    let config = format!("@Config(sdk = {level})");
    match after_test_line {
        Some(nl) if nl < name_rel && masked[test_at.end()..nl].trim().is_empty() => {
            edits.push((nl + 1, nl + 1, format!("{test_indent}{config}\n")));
        }
        _ => edits.push((test_at.end(), test_at.end(), format!(" {config}"))),
    }

    edits.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    let mut out = text.to_string();
    for (s, e, r) in edits {
        out.replace_range(s..e, &r);
    }
    out
}

fn matching_paren(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'(' => depth += 1,
            b')' => {
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

fn indentation_before(source: &str, at: usize) -> String {
    let line_start = source[..at].rfind('\n').map_or(0, |i| i + 1);
    source[line_start..at]
        .chars()
        .take_while(|c| c.is_whitespace())
        .collect()
}

/// Collapses `x_oldApi` / `x_newApi` pairs back into a single `x`.
fn unwrap_pairs(source: &str) -> Result<String, HarnessError> {
    let unit = SourceUnit::new("Test.java", source);
    let Some(class) = CLASS_DECL.captures(unit.masked()) else {
        return Ok(source.to_string());
    };
    let tests = test_methods(&unit, class.get(0).unwrap().end())?;
    let names: Vec<&str> = tests.iter().map(|t| t.name.as_str()).collect();
    let mut edits: Vec<(usize, usize, String)> = Vec::new();
    for t in &tests {
        let Some(base) = t.name.strip_suffix(OLD_SUFFIX) else { continue };
        let partner = format!("{base}{NEW_SUFFIX}");
        let Some(new) = tests.iter().find(|n| n.name == partner) else { continue };
        if names.contains(&base) {
            continue;
        }
        edits.push((t.name_offset, t.name_offset + t.name.len(), base.to_string()));
        // drop the new-level copy along with the blank run before it
        let mut start = new.start;
        while start > 0 && source.as_bytes()[start - 1].is_ascii_whitespace() {
            start -= 1;
        }
        edits.push((start, new.end, String::new()));
    }
    edits.sort_by_key(|e| std::cmp::Reverse(e.0));
    let mut out = source.to_string();
    for (s, e, r) in edits {
        out.replace_range(s..e, &r);
    }
    Ok(out)
}

fn ensure_config_import(source: &str) -> String {
    let masked = lex_strip(source).text;
    if CONFIG_IMPORTED.is_match(&masked) {
        return source.to_string();
    }
    if let Some(last) = IMPORT_LINE.find_iter(&masked).last() {
        let mut out = source.to_string();
        out.insert_str(last.end(), &format!("\n{CONFIG_IMPORT}"));
        return out;
    }
    if let Some(pkg) = PACKAGE_DECL.find(&masked) {
        let mut out = source.to_string();
        out.insert_str(pkg.end(), &format!("\n\n{CONFIG_IMPORT}"));
        return out;
    }
    format!("{CONFIG_IMPORT}\n\n{source}")
}
