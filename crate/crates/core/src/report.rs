//! Aggregation of session results: per-API rows, the iteration histogram and
//! mean model time per phase.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{SessionResult, SessionStatus, DEFAULT_MAX_ITERATIONS};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiResultRow {
    pub api: String,
    pub usages: usize,
    pub succeeded: usize,
    pub flagged: usize,
    pub failed: usize,
}

impl ApiResultRow {
    fn add(&mut self, status: SessionStatus) {
        self.usages += 1;
        match status {
            SessionStatus::Succeeded => self.succeeded += 1,
            SessionStatus::SucceededValidatorFlagged => self.flagged += 1,
            _ => self.failed += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationHistogram {
    /// Succeeded sessions (flagged included) by refinement rounds used.
    pub buckets: BTreeMap<usize, usize>,
    pub failed: usize,
    pub total: usize,
    /// Highest bucket shown when rendering.
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingMeans {
    pub update_ms: Option<f64>,
    pub test_gen_ms: Option<f64>,
    /// Mean over all refinement rounds of all sessions.
    pub refinement_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub rows: Vec<ApiResultRow>,
    pub totals: ApiResultRow,
    pub histogram: IterationHistogram,
    pub timings: TimingMeans,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("session {session} has non-terminal status {status:?}")]
    NonTerminalRecord { session: String, status: SessionStatus },
    #[error("{path}: {reason}")]
    Load { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    PlainTable,
    DelimitedValues,
    StructuredDocument,
}

pub fn aggregate(results: &[SessionResult]) -> Result<Aggregates, ReportError> {
    let mut rows: BTreeMap<&str, ApiResultRow> = BTreeMap::new();
    let mut totals = ApiResultRow {
        api: "Total".into(),
        ..Default::default()
    };
    let mut histogram = IterationHistogram {
        max_iterations: DEFAULT_MAX_ITERATIONS,
        ..Default::default()
    };
    let mut update = Vec::new();
    let mut test_gen = Vec::new();
    let mut refinements = Vec::new();

    for r in results {
        if !r.status.is_terminal() {
            return Err(ReportError::NonTerminalRecord {
                session: r.session.clone(),
                status: r.status,
            });
        }
        rows.entry(&r.api)
            .or_insert_with(|| ApiResultRow {
                api: r.api.clone(),
                ..Default::default()
            })
            .add(r.status);
        totals.add(r.status);
        histogram.total += 1;
        if r.status.is_success() {
            *histogram.buckets.entry(r.iterations).or_default() += 1;
            histogram.max_iterations = histogram.max_iterations.max(r.iterations);
        } else {
            histogram.failed += 1;
        }
        update.extend(r.timings_ms.update);
        test_gen.extend(r.timings_ms.test_gen);
        refinements.extend(r.timings_ms.refinements.iter().copied());
    }

    Ok(Aggregates {
        rows: rows.into_values().collect(),
        totals,
        histogram,
        timings: TimingMeans {
            update_ms: mean(&update),
            test_gen_ms: mean(&test_gen),
            refinement_ms: mean(&refinements),
        },
    })
}

fn mean(values: &[u64]) -> Option<f64> {
    // integer sum keeps the result independent of input order
    (!values.is_empty()).then(|| values.iter().map(|&v| v as u128).sum::<u128>() as f64 / values.len() as f64)
}

pub fn render_report(agg: &Aggregates, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::PlainTable => plain(agg).into_bytes(),
        ReportFormat::DelimitedValues => delimited(agg),
        ReportFormat::StructuredDocument => {
            let mut out = serde_json::to_vec_pretty(agg).expect("aggregates serialize");
            out.push(b'\n');
            out
        }
    }
}

/// `(label, count)` for buckets `0..=max` then `failed`.
pub fn histogram_lines(h: &IterationHistogram) -> Vec<(String, usize)> {
    let mut lines: Vec<_> = (0..=h.max_iterations)
        .map(|i| (i.to_string(), h.buckets.get(&i).copied().unwrap_or(0)))
        .collect();
    lines.push(("failed".into(), h.failed));
    lines
}

fn plain(agg: &Aggregates) -> String {
    let headers = ["API", "#Usages", "Succeeded", "Flagged", "Failed"];
    let cells: Vec<[String; 5]> = agg
        .rows
        .iter()
        .chain(std::iter::once(&agg.totals))
        .map(|r| {
            [
                r.api.clone(),
                r.usages.to_string(),
                r.succeeded.to_string(),
                r.flagged.to_string(),
                r.failed.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..5)
        .map(|c| cells.iter().map(|r| r[c].len()).chain([headers[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let mut text = format!("{:<w$}", row[0], w = widths[0]);
        for c in 1..5 {
            let _ = write!(text, "  {:>w$}", row[c], w = widths[c]);
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&mut out, &headers);
    for (i, r) in cells.iter().enumerate() {
        if i == cells.len() - 1 {
            let rule: usize = widths.iter().sum::<usize>() + 2 * 4;
            out.push_str(&"-".repeat(rule));
            out.push('\n');
        }
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }

    out.push_str("\nIterations  Sessions\n");
    for (label, count) in histogram_lines(&agg.histogram) {
        let _ = writeln!(out, "{label:<10}  {count:>8}");
    }
    let _ = writeln!(out, "{:<10}  {:>8}", "total", agg.histogram.total);

    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
    let _ = writeln!(
        out,
        "\nMean model time (ms): update {}, test generation {}, refinement {}",
        fmt(agg.timings.update_ms),
        fmt(agg.timings.test_gen_ms),
        fmt(agg.timings.refinement_ms)
    );
    out
}

fn delimited(agg: &Aggregates) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut put = |rec: &[String]| w.write_record(rec).expect("in-memory write");
    put(&["api", "usages", "succeeded", "flagged", "failed"].map(String::from));
    for r in agg.rows.iter().chain(std::iter::once(&agg.totals)) {
        put(&[
            r.api.clone(),
            r.usages.to_string(),
            r.succeeded.to_string(),
            r.flagged.to_string(),
            r.failed.to_string(),
        ]);
    }
    put(&["iterations".into(), "sessions".into()]);
    for (label, count) in histogram_lines(&agg.histogram) {
        put(&[label, count.to_string()]);
    }
    put(&["total".into(), agg.histogram.total.to_string()]);
    put(&["phase".into(), "mean_ms".into()]);
    for (phase, v) in [
        ("update", agg.timings.update_ms),
        ("test_gen", agg.timings.test_gen_ms),
        ("refinement", agg.timings.refinement_ms),
    ] {
        put(&[phase.into(), v.map(|v| format!("{v:.1}")).unwrap_or_default()]);
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads every `*.json` session result in `dir`, sorted by file name.
pub fn load_results(dir: &Path) -> Result<Vec<SessionResult>, ReportError> {
    let load_err = |path: &Path, reason: String| ReportError::Load {
        path: path.display().to_string(),
        reason,
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| load_err(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| load_err(p, e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| load_err(p, e.to_string()))
        })
        .collect()
}
