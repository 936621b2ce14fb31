//! Deprecated-API records: signature parsing, the line-delimited catalog
//! format, and lookup by canonical or display form.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed signature `{text}`: {reason}")]
    MalformedSignature { text: String, reason: &'static str },
    #[error("catalog line {line}: {reason}")]
    SchemaError { line: usize, reason: String },
    #[error("duplicate record for {0}")]
    DuplicateRecord(String),
    #[error("`{query}` is ambiguous, matches: {}", candidates.join(", "))]
    AmbiguousLookup {
        query: String,
        candidates: Vec<String>,
    },
    #[error("reading catalog: {0}")]
    Io(String),
}

/// A method signature such as `android.widget.TimePicker#getCurrentHour()`.
///
/// Nested classes keep their outer class in `class_name`
/// (`Notification.Builder`); the package is the leading run of
/// lowercase-initial segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApiSignature {
    pub package_path: String,
    pub class_name: String,
    pub member_name: String,
    pub param_types: Vec<String>,
}

impl ApiSignature {
    /// Accepts `pkg.Class#member(T1, T2)` and `Class.member(T1, T2)`.
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let malformed = |reason| CatalogError::MalformedSignature {
            text: text.to_string(),
            reason,
        };
        let text = text.trim();
        if text.is_empty() {
            return Err(malformed("blank signature"));
        }
        let open = text.find('(').ok_or_else(|| malformed("missing parameter list"))?;
        if !text.ends_with(')') {
            return Err(malformed("unbalanced parentheses"));
        }
        let params = split_params(&text[open + 1..text.len() - 1]).ok_or_else(|| malformed("unbalanced parentheses"))?;
        if params.iter().any(|p| p.is_empty()) {
            return Err(malformed("empty parameter type"));
        }

        let head = text[..open].trim();
        let (qualified, member) = match head.split_once('#') {
            Some((q, m)) => (q, m),
            None => match head.rsplit_once('.') {
                Some((q, m)) => (q, m),
                None => return Err(malformed("missing class segment")),
            },
        };
        let member = member.trim();
        if member.is_empty() {
            return Err(malformed("missing member name"));
        }
        if !is_identifier(member) {
            return Err(malformed("member name is not an identifier"));
        }

        let segments: Vec<&str> = qualified.split('.').map(str::trim).collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(malformed("empty class segment"));
        }
        if segments.iter().any(|s| !is_identifier(s)) {
            return Err(malformed("class segment is not an identifier"));
        }
        let mut split = segments
            .iter()
            .position(|s| s.starts_with(|c: char| c.is_ascii_uppercase()))
            .unwrap_or(segments.len());
        if split == segments.len() {
            // no capitalised segment: treat the last one as the class
            split = segments.len() - 1;
        }
        Ok(Self {
            package_path: segments[..split].join("."),
            class_name: segments[split..].join("."),
            member_name: member.to_string(),
            param_types: params,
        })
    }

    /// `package.Class#member(type1, type2)`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        if !self.package_path.is_empty() {
            out.push_str(&self.package_path);
            out.push('.');
        }
        out.push_str(&self.class_name);
        out.push('#');
        out.push_str(&self.member_name);
        out.push('(');
        out.push_str(&self.param_types.join(", "));
        out.push(')');
        out
    }

    /// `Class.member(type1, type2)`, the form used in prompts.
    pub fn display(&self) -> String {
        format!(
            "{}.{}({})",
            self.class_name,
            self.member_name,
            self.param_types.join(", ")
        )
    }

    fn same_shape(&self, other: &ApiSignature) -> bool {
        self.class_name == other.class_name
            && self.member_name == other.member_name
            && self.param_types == other.param_types
    }
}

impl fmt::Display for ApiSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Splits a parameter list on top-level commas. `None` on unbalanced
/// brackets.
fn split_params(inner: &str) -> Option<Vec<String>> {
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in inner.chars() {
        match c {
            '(' | '<' | '[' => depth += 1,
            ')' | '>' | ']' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    if depth != 0 {
        return None;
    }
    out.push(current.trim().to_string());
    Some(out)
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeprecationRecord {
    pub deprecated: ApiSignature,
    /// Android API level in which the signature was deprecated.
    pub deprecation_level: u32,
    pub replacements: Vec<ApiSignature>,
    pub notes: Option<String>,
}

impl DeprecationRecord {
    pub fn new(
        deprecated: ApiSignature,
        deprecation_level: u32,
        replacements: Vec<ApiSignature>,
    ) -> Result<Self, String> {
        if deprecation_level < 1 {
            return Err("level must be at least 1".into());
        }
        if replacements.is_empty() {
            return Err("replacements must not be empty".into());
        }
        for (i, r) in replacements.iter().enumerate() {
            if replacements[..i].contains(r) {
                return Err(format!("duplicate replacement {r}"));
            }
        }
        Ok(Self {
            deprecated,
            deprecation_level,
            replacements,
            notes: None,
        })
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = Some(notes.into());
        self
    }

    pub fn replacements_display(&self) -> Vec<String> {
        self.replacements.iter().map(ApiSignature::display).collect()
    }
}

/// On-disk shape of one catalog line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    deprecated: String,
    level: i64,
    replacements: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
}

/// Immutable after load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    records: Vec<DeprecationRecord>,
    by_canonical: HashMap<String, usize>,
}

impl Catalog {
    pub fn from_records(records: Vec<DeprecationRecord>) -> Result<Self, CatalogError> {
        let mut by_canonical = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let key = r.deprecated.canonical();
            if by_canonical.insert(key.clone(), i).is_some() {
                return Err(CatalogError::DuplicateRecord(key));
            }
        }
        Ok(Self {
            records,
            by_canonical,
        })
    }

    /// Reads line-delimited JSON records; blank lines are skipped and line
    /// numbers in errors are 1-based.
    pub fn load<R: BufRead>(source: R) -> Result<Self, CatalogError> {
        let mut records = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| CatalogError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(parse_line(&line, line_no)?);
        }
        Self::from_records(records)
    }

    pub fn load_path(path: &std::path::Path) -> Result<Self, CatalogError> {
        let file = std::fs::File::open(path)
            .map_err(|e| CatalogError::Io(format!("{}: {e}", path.display())))?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            let line = RecordLine {
                deprecated: r.deprecated.canonical(),
                level: i64::from(r.deprecation_level),
                replacements: r.replacements.iter().map(ApiSignature::canonical).collect(),
                notes: r.notes.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[DeprecationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Canonical queries match exactly. Queries without a package match on
    /// class, member and parameter types, and more than one hit is an error.
    pub fn lookup(&self, query: &str) -> Result<Option<&DeprecationRecord>, CatalogError> {
        let Ok(sig) = ApiSignature::parse(query) else {
            return Ok(None);
        };
        if !sig.package_path.is_empty() {
            return Ok(self
                .by_canonical
                .get(&sig.canonical())
                .map(|&i| &self.records[i]));
        }
        let hits: Vec<&DeprecationRecord> = self
            .records
            .iter()
            .filter(|r| r.deprecated.same_shape(&sig))
            .collect();
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            _ => Err(CatalogError::AmbiguousLookup {
                query: query.to_string(),
                candidates: hits.iter().map(|r| r.deprecated.canonical()).collect(),
            }),
        }
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<DeprecationRecord, CatalogError> {
    let schema = |reason: String| CatalogError::SchemaError {
        line: line_no,
        reason,
    };
    let raw: RecordLine = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
    if !raw.deprecated.contains('#') {
        return Err(schema(format!(
            "`deprecated` must be canonical (pkg.Class#member(...)), got `{}`",
            raw.deprecated
        )));
    }
    let deprecated = ApiSignature::parse(&raw.deprecated).map_err(|e| schema(e.to_string()))?;
    let level = u32::try_from(raw.level)
        .ok()
        .filter(|&l| l >= 1)
        .ok_or_else(|| schema(format!("level must be a positive integer, got {}", raw.level)))?;
    let replacements = raw
        .replacements
        .iter()
        .map(|r| ApiSignature::parse(r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| schema(e.to_string()))?;
    let mut record = DeprecationRecord::new(deprecated, level, replacements).map_err(schema)?;
    record.notes = raw.notes;
    Ok(record)
}
