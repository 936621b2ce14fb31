//! Masks the interiors of comments and literals so later passes can scan
//! Java source for call tokens and braces without false hits.
//!
//! Output has the same byte length as the input and keeps every `\n` and
//! `\r` in place, so offsets and line numbers carry over unchanged.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexWarningKind {
    UnterminatedString,
    UnterminatedChar,
    UnterminatedTextBlock,
    UnterminatedBlockComment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexWarning {
    /// 1-based line where the literal or comment opened.
    pub line: usize,
    pub kind: LexWarningKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masked {
    pub text: String,
    pub warnings: Vec<LexWarning>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Code,
    LineComment,
    BlockComment,
    Str,
    Char,
    TextBlock,
}

pub fn lex_strip(text: &str) -> Masked {
    let src = text.as_bytes();
    let mut out = Vec::with_capacity(src.len());
    let mut warnings = Vec::new();
    let mut state = State::Code;
    let mut line = 1usize;
    let mut open_line = 1usize;
    let mut i = 0;

    let mask = |out: &mut Vec<u8>, b: u8| {
        if b == b'\n' || b == b'\r' {
            out.push(b);
        } else {
            out.push(b' ');
        }
    };

    while i < src.len() {
        let b = src[i];
        let next = src.get(i + 1).copied();
        match state {
            State::Code => {
                match (b, next) {
                    (b'/', Some(b'/')) => {
                        out.extend_from_slice(b"//");
                        i += 2;
                        state = State::LineComment;
                        continue;
                    }
                    (b'/', Some(b'*')) => {
                        out.extend_from_slice(b"/*");
                        i += 2;
                        open_line = line;
                        state = State::BlockComment;
                        continue;
                    }
                    (b'"', _) if src[i..].starts_with(b"\"\"\"") => {
                        out.extend_from_slice(b"\"\"\"");
                        i += 3;
                        open_line = line;
                        state = State::TextBlock;
                        continue;
                    }
                    (b'"', _) => {
                        open_line = line;
                        state = State::Str;
                    }
                    (b'\'', _) => {
                        open_line = line;
                        state = State::Char;
                    }
                    _ => {}
                }
                out.push(b);
            }
            State::LineComment => {
                if b == b'\n' {
                    state = State::Code;
                }
                mask(&mut out, b);
            }
            State::BlockComment => {
                if b == b'*' && next == Some(b'/') {
                    out.extend_from_slice(b"*/");
                    i += 2;
                    state = State::Code;
                    continue;
                }
                mask(&mut out, b);
            }
            State::Str | State::Char => {
                let (quote, kind) = if state == State::Str {
                    (b'"', LexWarningKind::UnterminatedString)
                } else {
                    (b'\'', LexWarningKind::UnterminatedChar)
                };
                if b == b'\\' && next.is_some_and(|n| n != b'\n' && n != b'\r') {
                    out.extend_from_slice(b"  ");
                    i += 2;
                    continue;
                }
                if b == quote {
                    out.push(b);
                    state = State::Code;
                } else if b == b'\n' || b == b'\r' {
                    warnings.push(LexWarning { line: open_line, kind });
                    out.push(b);
                    state = State::Code;
                } else {
                    out.push(b' ');
                }
            }
            State::TextBlock => {
                if let (b'\\', Some(n)) = (b, next) {
                    mask(&mut out, b);
                    mask(&mut out, n);
                    if next == Some(b'\n') {
                        line += 1;
                    }
                    i += 2;
                    continue;
                }
                if src[i..].starts_with(b"\"\"\"") {
                    out.extend_from_slice(b"\"\"\"");
                    i += 3;
                    state = State::Code;
                    continue;
                }
                mask(&mut out, b);
            }
        }
        if b == b'\n' {
            line += 1;
        }
        i += 1;
    }

    let eof_warning = match state {
        State::BlockComment => Some(LexWarningKind::UnterminatedBlockComment),
        State::TextBlock => Some(LexWarningKind::UnterminatedTextBlock),
        State::Str => Some(LexWarningKind::UnterminatedString),
        State::Char => Some(LexWarningKind::UnterminatedChar),
        State::Code | State::LineComment => None,
    };
    if let Some(kind) = eof_warning {
        warnings.push(LexWarning { line: open_line, kind });
    }

    // Only ASCII delimiters start or end a masked run, so multi-byte
    // characters are either copied whole or blanked whole.
    let text = String::from_utf8(out).expect("masking keeps UTF-8 boundaries");
    Masked { text, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strip(s: &str) -> String {
        lex_strip(s).text
    }

    #[test]
    fn masks_line_comment() {
        let body = " getCurrentHour()";
        assert_eq!(
            strip(&format!("x = 1; //{body}")),
            format!("x = 1; //{}", " ".repeat(body.len()))
        );
    }

    #[test]
    fn masks_string_literal() {
        assert_eq!(strip(r#"s = "a.getHour()";"#), r#"s = "           ";"#);
    }

    #[test]
    fn masks_chars_and_escapes() {
        let (ch, st) = (r"\'", r#"\"x\""#);
        assert_eq!(
            strip(&format!(r#"c = '{ch}'; d = "{st}";"#)),
            format!(r#"c = '{}'; d = "{}";"#, " ".repeat(ch.len()), " ".repeat(st.len()))
        );
    }

    #[test]
    fn block_comment_keeps_newlines() {
        let src = "a /* one\n two */ b";
        let out = strip(src);
        assert_eq!(out, "a /*    \n     */ b");
    }

    #[test]
    fn text_block_masked() {
        let src = "s = \"\"\"\n  foo()\n  \"\"\";";
        assert_eq!(strip(src), "s = \"\"\"\n       \n  \"\"\";");
    }

    #[test]
    fn external_storage_snippet_only_loses_comments() {
        let src = include_str!("../../tests/fixtures/listings/external_storage_usage.java");
        // masking applied by hand: comment bodies become spaces, code is untouched
        let blank = |comment: &str| format!("//{}", " ".repeat(comment.len() - 2));
        let expected = [
            blank("// Deprecated API to get external storage directory"),
            "File externalStorageDir = Environment.getExternalStorageDirectory();".into(),
            String::new(),
            blank("// Recommended API to get external storage directory"),
            "File externalFilesDir = getExternalFilesDir(null);".into(),
            String::new(),
        ]
        .join("\n");
        assert_eq!(strip(src), expected);
    }

    #[test]
    fn unterminated_string_warns_and_resumes_next_line() {
        let m = lex_strip("s = \"abc\nfoo.bar();");
        assert_eq!(m.text, "s = \"   \nfoo.bar();");
        assert_eq!(
            m.warnings,
            vec![LexWarning { line: 1, kind: LexWarningKind::UnterminatedString }]
        );
    }

    #[test]
    fn unterminated_block_comment_masks_to_eof() {
        let m = lex_strip("a();\n/* x.b(\n c()");
        assert_eq!(m.text, "a();\n/*     \n    ");
        assert_eq!(m.warnings[0].kind, LexWarningKind::UnterminatedBlockComment);
        assert_eq!(m.warnings[0].line, 2);
    }

    #[test]
    fn non_ascii_inside_comment_keeps_byte_length() {
        let src = "x(); // héllo ✓\ny();";
        let out = strip(src);
        assert_eq!(out.len(), src.len());
        assert!(out.ends_with("\ny();"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn preserves_length_and_newlines(src in "[a-z(){};./*\"'\\\\\n \té]{0,200}") {
            let out = strip(&src);
            prop_assert_eq!(out.len(), src.len());
            let src_nl: Vec<usize> = src.match_indices('\n').map(|(i, _)| i).collect();
            let out_nl: Vec<usize> = out.match_indices('\n').map(|(i, _)| i).collect();
            prop_assert_eq!(src_nl, out_nl);
        }
    }
}
