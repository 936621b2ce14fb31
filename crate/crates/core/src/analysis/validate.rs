//! Structural checks on a generated update: is the replacement called, is
//! the deprecated call kept for old levels, and is there an SDK guard.
//!
//! These are token checks only. They do not verify that the two calls sit on
//! opposite branches of the guard, nor that objects handed to the
//! replacement are initialised.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{call_sites, lex_strip};
use crate::catalog::DeprecationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    MissingReplacement,
    MissingGuard,
    ReplacementOnly,
}

impl Verdict {
    pub fn from_checks(replacement_present: bool, guard_present: bool, deprecated_retained: bool) -> Self {
        match (replacement_present, deprecated_retained, guard_present) {
            (false, _, _) => Verdict::MissingReplacement,
            (true, false, _) => Verdict::ReplacementOnly,
            (true, true, false) => Verdict::MissingGuard,
            (true, true, true) => Verdict::Valid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateValidation {
    pub replacement_present: bool,
    pub guard_present: bool,
    pub deprecated_retained: bool,
    pub verdict: Verdict,
}

static SDK_INT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bBuild\s*\.\s*VERSION\s*\.\s*SDK_INT\b").unwrap());

pub fn validate_update(updated_text: &str, record: &DeprecationRecord) -> UpdateValidation {
    let masked = lex_strip(updated_text).text;
    let called = |member: &str| !call_sites(&masked, member, false).is_empty();

    let replacement_present = record
        .replacements
        .iter()
        .all(|r| called(&r.member_name));
    let deprecated_retained = called(&record.deprecated.member_name);
    let guard_present = has_sdk_guard(&masked);

    UpdateValidation {
        replacement_present,
        guard_present,
        deprecated_retained,
        verdict: Verdict::from_checks(replacement_present, guard_present, deprecated_retained),
    }
}

/// `Build.VERSION.SDK_INT` followed, within the same statement, by a
/// comparison operator. Any direction is accepted.
fn has_sdk_guard(masked: &str) -> bool {
    SDK_INT.find_iter(masked).any(|m| {
        let rest = &masked[m.end()..];
        let stmt_end = rest.find([';', '{', '}']).unwrap_or(rest.len());
        has_comparison(&rest[..stmt_end])
    })
}

fn has_comparison(s: &str) -> bool {
    let b = s.as_bytes();
    (0..b.len()).any(|i| match b[i] {
        b'=' | b'!' => b.get(i + 1) == Some(&b'=') && (b[i] == b'!' || i == 0 || !b"=<>!".contains(&b[i - 1])),
        b'<' | b'>' => {
            let prev = if i > 0 { b[i - 1] } else { b' ' };
            let next = b.get(i + 1).copied().unwrap_or(b' ');
            // skip `->`, `<<`, `>>`
            prev != b'-' && prev != b[i] && next != b[i]
        }
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ApiSignature;

    fn timepicker() -> DeprecationRecord {
        DeprecationRecord::new(
            ApiSignature::parse("android.widget.TimePicker#getCurrentHour()").unwrap(),
            23,
            vec![ApiSignature::parse("android.widget.TimePicker#getHour()").unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn truth_table_is_total() {
        for bits in 0..8u8 {
            let (r, g, d) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let v = Verdict::from_checks(r, g, d);
            assert_eq!(v == Verdict::Valid, r && g && d);
            assert_eq!(v == Verdict::MissingReplacement, !r);
            assert_eq!(v == Verdict::ReplacementOnly, r && !d);
            assert_eq!(v == Verdict::MissingGuard, r && d && !g);
        }
    }

    #[test]
    fn comparison_operators() {
        for s in [" >= 23", " <= 21", " < X", " > X", " == 9", " != 9"] {
            assert!(has_comparison(s), "{s}");
        }
        for s in [" = 3", "", " -> x", " << 2", " >> 2"] {
            assert!(!has_comparison(s), "{s}");
        }
    }

    #[test]
    fn guard_needs_comparison_in_same_statement() {
        let has_sdk_guard = |s: &str| has_sdk_guard(&crate::analysis::lex_strip(s).text);
        assert!(has_sdk_guard("if (Build.VERSION.SDK_INT >= 23) {"));
        assert!(has_sdk_guard("if (android.os.Build.VERSION.SDK_INT >=\n   N) {"));
        assert!(!has_sdk_guard("int v = Build.VERSION.SDK_INT; if (v > 3) {}"));
        assert!(!has_sdk_guard("// Build.VERSION.SDK_INT >= 23"));
    }

    #[test]
    fn comment_mentions_do_not_count() {
        let text = "// x.getHour();\nint h = t.getCurrentHour();";
        let v = validate_update(text, &timepicker());
        assert!(!v.replacement_present);
        assert_eq!(v.verdict, Verdict::MissingReplacement);
    }

    #[test]
    fn declaration_of_member_is_not_a_call() {
        let text = "public int getCurrentHour() { return t.getHour(); }";
        let v = validate_update(text, &timepicker());
        assert!(!v.deprecated_retained);
        assert_eq!(v.verdict, Verdict::ReplacementOnly);
    }

    #[test]
    fn multiple_replacements_must_all_be_called() {
        let rec = DeprecationRecord::new(
            ApiSignature::parse("android.net.ConnectivityManager#getAllNetworkInfo()").unwrap(),
            23,
            vec![
                ApiSignature::parse("android.net.ConnectivityManager#getAllNetworks()").unwrap(),
                ApiSignature::parse("android.net.ConnectivityManager#getNetworkInfo(android.net.Network)").unwrap(),
            ],
        )
        .unwrap();
        let partial = "if (Build.VERSION.SDK_INT >= 23) { cm.getAllNetworks(); } else { cm.getAllNetworkInfo(); }";
        assert_eq!(validate_update(partial, &rec).verdict, Verdict::MissingReplacement);
        let full = "if (Build.VERSION.SDK_INT >= 23) { for (Network n : cm.getAllNetworks()) cm.getNetworkInfo(n); } else { cm.getAllNetworkInfo(); }";
        assert_eq!(validate_update(full, &rec).verdict, Verdict::Valid);
    }
}
