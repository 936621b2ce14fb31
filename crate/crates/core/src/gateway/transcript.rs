//! Line-delimited transcript store. Each exchange is a request line followed
//! immediately by its response line at the same sequence number.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatExchange, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Request,
    Response,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    pub session: String,
    pub seq: usize,
    pub kind: LineKind,
    pub model: String,
    pub text: String,
}

impl TranscriptLine {
    fn pair(exchange: &ChatExchange) -> [TranscriptLine; 2] {
        let line = |kind, text: &str| TranscriptLine {
            session: exchange.session_id.clone(),
            seq: exchange.sequence,
            kind,
            model: exchange.model.clone(),
            text: text.to_string(),
        };
        [
            line(LineKind::Request, &exchange.prompt_text),
            line(LineKind::Response, &exchange.response_text),
        ]
    }
}

/// All exchanges of a transcript file, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    exchanges: Vec<ChatExchange>,
}

impl Transcript {
    pub fn new(exchanges: Vec<ChatExchange>) -> Self {
        Self { exchanges }
    }

    pub fn exchanges(&self) -> &[ChatExchange] {
        &self.exchanges
    }

    pub fn for_session<'a>(&'a self, session: &'a str) -> impl Iterator<Item = &'a ChatExchange> + 'a {
        self.exchanges.iter().filter(move |e| e.session_id == session)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path).map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        Self::parse(BufReader::new(file))
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, GatewayError> {
        let bad = |n: usize, why: String| GatewayError::Transcript(format!("line {n}: {why}"));
        let mut exchanges = Vec::new();
        let mut next_seq: HashMap<String, usize> = HashMap::new();
        let mut pending: Option<(usize, TranscriptLine)> = None;
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| bad(n, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptLine = serde_json::from_str(&line).map_err(|e| bad(n, e.to_string()))?;
            match (pending.take(), rec.kind) {
                (None, LineKind::Request) => {
                    let expected = next_seq.get(&rec.session).copied().unwrap_or(0);
                    if rec.seq != expected {
                        return Err(bad(n, format!("session {} expects seq {expected}, found {}", rec.session, rec.seq)));
                    }
                    if rec.text.is_empty() {
                        return Err(bad(n, "empty request text".into()));
                    }
                    pending = Some((n, rec));
                }
                (None, LineKind::Response) => return Err(bad(n, "response without a preceding request".into())),
                (Some((_, req)), LineKind::Response) => {
                    if req.session != rec.session || req.seq != rec.seq {
                        return Err(bad(n, "response does not match the preceding request".into()));
                    }
                    next_seq.insert(req.session.clone(), req.seq + 1);
                    exchanges.push(ChatExchange {
                        session_id: req.session,
                        sequence: req.seq,
                        model: rec.model,
                        prompt_text: req.text,
                        response_text: rec.text,
                        latency_ms: 0,
                        token_usage: None,
                    });
                }
                (Some((m, _)), LineKind::Request) => return Err(bad(m, "request without a response".into())),
            }
        }
        if let Some((m, _)) = pending {
            return Err(bad(m, "request without a response".into()));
        }
        Ok(Self { exchanges })
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for exchange in &self.exchanges {
            write_exchange(&mut out, exchange)?;
        }
        out.flush()
    }
}

fn write_exchange<W: Write>(out: &mut W, exchange: &ChatExchange) -> std::io::Result<()> {
    for line in TranscriptLine::pair(exchange) {
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Appends exchanges to a transcript file; request and response lines are
/// written together under one lock so sessions may interleave only between
/// exchanges.
pub struct TranscriptWriter {
    out: Mutex<BufWriter<File>>,
}

impl TranscriptWriter {
    /// Truncates `path`.
    pub fn create(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Self {
            out: Mutex::new(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn append(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn record(&self, exchange: &ChatExchange) -> std::io::Result<()> {
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        write_exchange(&mut *out, exchange)?;
        out.flush()
    }
}
