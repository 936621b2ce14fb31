//! The `evolve` command: `scan`, `migrate`, `report` and `catalog`.
//!
//! Exit codes: 0 when every session succeeded, 3 when some succeeded only
//! with a validator flag, 4 when any failed, 2 for configuration errors.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use walkdir::WalkDir;

use crate::analysis::{find_usages, SourceUnit, UsageSite};
use crate::catalog::{Catalog, DeprecationRecord};
use crate::gateway::{Gateway, HttpTransport, ReplayMatch, DEFAULT_BASE_URL, DEFAULT_MODEL};
use crate::harness::{default_level_pair, CommandRunner, LevelPair, ProjectTree, TestRunner};
use crate::report::{aggregate, load_results, render_report, ReportFormat};
use crate::session::{
    run_session, session_id, MigrationSession, PromptVariant, SessionConfig, SessionInputs, SessionStatus,
    DEFAULT_MAX_ITERATIONS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "evolve", version, about = "Migrate deprecated Android API usages with a chat model, checked by tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once
pub enum Command {
    /// List usages of catalog APIs in a project.
    Scan(ScanArgs),
    /// Run one migration session per usage.
    Migrate(MigrateArgs),
    /// Aggregate session results from an output directory.
    Report(ReportArgs),
    /// Validate a catalog and print it normalized, or look one API up.
    Catalog(CatalogArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub project: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Live,
    Replay,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Full,
    A,
    B,
}

#[derive(Debug, Args)]
pub struct MigrateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    /// Project root; repeat for several projects (see `--jobs`).
    #[arg(long, required = true)]
    pub project: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "live")]
    pub provider: ProviderArg,
    /// Transcript to replay from, or to record to (default `<out>/transcript.jsonl`).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Match replayed exchanges by sequence only, ignoring prompt text.
    #[arg(long)]
    pub relaxed_replay: bool,
    /// Test runner command; receives `--project --test-class --sdk`.
    #[arg(long)]
    pub runner: String,
    #[arg(long, default_value_t = 900)]
    pub runner_timeout_secs: u64,
    /// Level pair override, `OLD:NEW`.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, value_enum, default_value = "full")]
    pub prompt_variant: VariantArg,
    #[arg(long)]
    pub keep_changes: bool,
    #[arg(long, default_value = "evolve-out")]
    pub out: PathBuf,
    /// Projects migrated in parallel; sessions within a project stay sequential.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Only the usage at `FILE:LINE` (relative to the project); repeatable.
    #[arg(long)]
    pub select: Vec<String>,
    /// File whose contents are appended to every refinement prompt.
    #[arg(long)]
    pub supplemental_context: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_MODEL)]
    pub model: String,
    #[arg(long, default_value = DEFAULT_BASE_URL)]
    pub base_url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "evolve-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub lookup: Option<String>,
}

/// Error that maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Scan(a) => cmd_scan(&a, out, err),
        Command::Migrate(a) => cmd_migrate(&a, err).map(|o| o.exit_code),
        Command::Report(a) => cmd_report(&a, out),
        Command::Catalog(a) => cmd_catalog(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(ConfigError(msg)) => {
            let _ = writeln!(err, "evolve: {msg}");
            EXIT_CONFIG
        }
    }
}

/// 4 if any session failed, else 3 if any was flagged, else 0.
pub fn exit_code(statuses: &[SessionStatus]) -> i32 {
    if statuses.iter().any(|s| !s.is_success()) {
        EXIT_FAILED
    } else if statuses.contains(&SessionStatus::SucceededValidatorFlagged) {
        EXIT_FLAGGED
    } else {
        EXIT_OK
    }
}

#[derive(Debug, Serialize)]
struct ScanLine<'a> {
    file: &'a str,
    line: usize,
    column: usize,
    api: String,
    function: Option<&'a str>,
}

/// `(record, usage)` for every usage in `project`, files in path order.
pub fn scan_project<'c>(
    catalog: &'c Catalog,
    project: &Path,
) -> Result<Vec<(&'c DeprecationRecord, UsageSite)>, ConfigError> {
    if !project.is_dir() {
        return Err(ConfigError(format!("{} is not a directory", project.display())));
    }
    let mut found = Vec::new();
    let walker = WalkDir::new(project).sort_by_file_name().into_iter().filter_entry(|e| {
        let name = e.file_name().to_string_lossy();
        e.depth() == 0 || !(name.starts_with('.') || name == "build")
    });
    for entry in walker {
        let entry = entry?;
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|x| x != "java") {
            continue;
        }
        let text = std::fs::read_to_string(entry.path())
            .map_err(|e| ConfigError(format!("{}: {e}", entry.path().display())))?;
        let rel = entry.path().strip_prefix(project).unwrap_or(entry.path());
        let unit = SourceUnit::new(rel.to_string_lossy().replace('\\', "/"), text);
        for record in catalog.records() {
            for usage in find_usages(&unit, record) {
                found.push((record, usage));
            }
        }
    }
    found.sort_by(|a, b| (&a.1.unit_path, a.1.line, a.1.column).cmp(&(&b.1.unit_path, b.1.line, b.1.column)));
    Ok(found)
}

pub fn cmd_scan(args: &ScanArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, ConfigError> {
    let catalog = Catalog::load_path(&args.catalog)?;
    let usages = scan_project(&catalog, &args.project)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (record, usage) in &usages {
        let line = ScanLine {
            file: &usage.unit_path,
            line: usage.line,
            column: usage.column,
            api: record.deprecated.canonical(),
            function: usage.enclosing_function.as_deref(),
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
        *counts.entry(record.deprecated.canonical()).or_default() += 1;
    }
    for (api, n) in &counts {
        writeln!(err, "{api}: {n} usage(s)")?;
    }
    writeln!(err, "{} usage(s) in total", usages.len())?;
    if !usages.is_empty() {
        writeln!(err, "note: matches are by member name; receivers are not type-checked")?;
    }
    Ok(EXIT_OK)
}

/// Everything `migrate` needs, validated.
pub struct RunConfig {
    pub catalog: Catalog,
    pub projects: Vec<PathBuf>,
    pub gateway: Gateway,
    pub runner: Box<dyn TestRunner>,
    pub levels: Option<LevelPair>,
    pub session: SessionConfig,
    pub out: PathBuf,
    pub jobs: usize,
    pub select: Vec<(String, usize)>,
}

impl RunConfig {
    pub fn from_args(args: &MigrateArgs) -> Result<Self, ConfigError> {
        if args.max_iterations < 1 {
            return Err(ConfigError("--max-iterations must be at least 1".into()));
        }
        if args.jobs < 1 {
            return Err(ConfigError("--jobs must be at least 1".into()));
        }
        let catalog = Catalog::load_path(&args.catalog)?;
        std::fs::create_dir_all(&args.out)?;
        let levels = args.levels.as_deref().map(LevelPair::parse).transpose()?;
        let select = args
            .select
            .iter()
            .map(|s| {
                let (file, line) = s
                    .rsplit_once(':')
                    .ok_or_else(|| ConfigError(format!("--select expects FILE:LINE, got `{s}`")))?;
                let line = line.parse().map_err(|_| ConfigError(format!("bad line in `{s}`")))?;
                Ok((file.replace('\\', "/"), line))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let timeout = Duration::from_secs(args.runner_timeout_secs);
        let runner = Box::new(CommandRunner::from_command_line(&args.runner, timeout)?);
        let transcript = args.transcript.clone().unwrap_or_else(|| args.out.join("transcript.jsonl"));
        let gateway = match args.provider {
            ProviderArg::Replay => {
                let path = args
                    .transcript
                    .as_ref()
                    .ok_or_else(|| ConfigError("--provider replay needs --transcript".into()))?;
                if !path.is_file() {
                    return Err(ConfigError(format!("transcript {} does not exist", path.display())));
                }
                let matching = if args.relaxed_replay {
                    ReplayMatch::Relaxed
                } else {
                    ReplayMatch::Strict
                };
                Gateway::replay_file(path, matching)?
            }
            ProviderArg::Live | ProviderArg::Record => {
                let transport = HttpTransport::from_env(&args.base_url, Duration::from_secs(300))?;
                let gw = Gateway::live(transport, args.model.clone());
                if args.provider == ProviderArg::Record {
                    gw.recording_to(&transcript)?
                } else {
                    gw
                }
            }
        };
        let supplemental_context = args
            .supplemental_context
            .as_ref()
            .map(std::fs::read_to_string)
            .transpose()?;
        Ok(Self {
            catalog,
            projects: args.project.clone(),
            gateway,
            runner,
            levels,
            session: SessionConfig {
                max_iterations: args.max_iterations,
                variant: match args.prompt_variant {
                    VariantArg::Full => PromptVariant::Full,
                    VariantArg::A => PromptVariant::A,
                    VariantArg::B => PromptVariant::B,
                },
                keep_changes: args.keep_changes,
                supplemental_context,
                ..SessionConfig::default()
            },
            out: args.out.clone(),
            jobs: args.jobs,
            select,
        })
    }
}

pub struct MigrateOutcome {
    pub sessions: Vec<MigrationSession>,
    pub notes: Vec<String>,
    pub exit_code: i32,
}

pub fn cmd_migrate(args: &MigrateArgs, err: &mut dyn Write) -> Result<MigrateOutcome, ConfigError> {
    let config = RunConfig::from_args(args)?;
    let outcome = migrate(&config)?;
    for note in &outcome.notes {
        writeln!(err, "note: {note}")?;
    }
    for s in &outcome.sessions {
        writeln!(err, "{}: {:?} after {} refinement(s)", s.session_id, s.status, s.iteration)?;
    }
    Ok(outcome)
}

struct Planned<'c> {
    id: String,
    record: &'c DeprecationRecord,
    usage: UsageSite,
    levels: LevelPair,
}

/// Plans every session up front so configuration errors surface before any
/// project is touched, then runs projects on up to `jobs` threads.
pub fn migrate(config: &RunConfig) -> Result<MigrateOutcome, ConfigError> {
    let mut notes = Vec::new();
    let multi_project = config.projects.len() > 1;
    let mut plans: Vec<(ProjectTree, Vec<Planned>)> = Vec::new();
    let mut selected_total = 0;
    for (p, root) in config.projects.iter().enumerate() {
        let project = ProjectTree::open(root, &config.out.join("backups").join(p.to_string()))?;
        let found = scan_project(&config.catalog, project.root())?;
        let chosen: Vec<_> = if config.select.is_empty() {
            found.iter().collect()
        } else {
            found
                .iter()
                .filter(|(_, u)| config.select.iter().any(|(f, l)| *f == u.unit_path && *l == u.line))
                .collect()
        };
        if config.session.variant == PromptVariant::A {
            let mut per_file: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
            for (record, usage) in &found {
                per_file.entry(&usage.unit_path).or_default().insert(record.deprecated.canonical());
            }
            for (file, apis) in per_file.iter().filter(|(_, apis)| apis.len() > 1) {
                if chosen.iter().any(|(_, u)| u.unit_path == *file) {
                    notes.push(format!(
                        "{file} uses {} deprecated APIs; the unnamed-API prompt cannot target one of them, \
                         so each needs its own session and a single session may update the wrong one",
                        apis.len()
                    ));
                }
            }
        }
        let mut planned = Vec::new();
        for (record, usage) in chosen {
            let levels = default_level_pair(record, config.levels)?;
            if usage.enclosing_function.is_none() {
                return Err(ConfigError(format!("{}:{} is not inside a method", usage.unit_path, usage.line)));
            }
            let id = if multi_project {
                format!("{p}/{}", session_id(usage))
            } else {
                session_id(usage)
            };
            planned.push(Planned {
                id,
                record,
                usage: usage.clone(),
                levels,
            });
        }
        selected_total += planned.len();
        plans.push((project, planned));
    }
    if selected_total == 0 {
        return Err(ConfigError(if config.select.is_empty() {
            "no usages of catalog APIs found".into()
        } else {
            "no usage matches --select".into()
        }));
    }

    let queue = Mutex::new(plans.iter().enumerate().collect::<Vec<_>>());
    type Finished = (usize, usize, Result<MigrationSession, String>);
    let done: Mutex<Vec<Finished>> = Mutex::default();
    std::thread::scope(|scope| {
        for _ in 0..config.jobs.min(plans.len()) {
            scope.spawn(|| loop {
                let Some((p, (project, planned))) = queue.lock().unwrap().pop() else { break };
                for (i, plan) in planned.iter().enumerate() {
                    let inputs = SessionInputs {
                        session_id: plan.id.clone(),
                        record: plan.record,
                        usage: &plan.usage,
                        levels: plan.levels,
                        project,
                        config: &config.session,
                    };
                    let result = run_session(inputs, &config.gateway, config.runner.as_ref()).map_err(|e| e.to_string());
                    done.lock().unwrap().push((p, i, result));
                }
            });
        }
    });
    let mut done = done.into_inner().unwrap();
    done.sort_by_key(|(p, i, _)| (*p, *i));

    let sessions_dir = config.out.join("sessions");
    let history_dir = config.out.join("history");
    std::fs::create_dir_all(&sessions_dir)?;
    std::fs::create_dir_all(&history_dir)?;
    let mut sessions = Vec::new();
    for (n, (_, _, result)) in done.into_iter().enumerate() {
        let session = result.map_err(ConfigError)?;
        let stem = format!("{n:04}-{}", file_stem(&session.session_id));
        let mut doc = serde_json::to_vec_pretty(&session.result())?;
        doc.push(b'\n');
        std::fs::write(sessions_dir.join(format!("{stem}.json")), doc)?;
        let mut history = Vec::new();
        for entry in &session.history {
            serde_json::to_writer(&mut history, entry)?;
            history.push(b'\n');
        }
        std::fs::write(history_dir.join(format!("{stem}.jsonl")), history)?;
        sessions.push(session);
    }
    let statuses: Vec<_> = sessions.iter().map(|s| s.status).collect();
    Ok(MigrateOutcome {
        exit_code: exit_code(&statuses),
        sessions,
        notes,
    })
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, ConfigError> {
    let dir = args.out.join("sessions");
    let results = if dir.is_dir() { load_results(&dir)? } else { Vec::new() };
    if results.is_empty() {
        return Err(ConfigError(format!("no session results under {}", dir.display())));
    }
    let agg = aggregate(&results)?;
    let format = match args.format {
        FormatArg::Table => ReportFormat::PlainTable,
        FormatArg::Csv => ReportFormat::DelimitedValues,
        FormatArg::Json => ReportFormat::StructuredDocument,
    };
    out.write_all(&render_report(&agg, format))?;
    Ok(EXIT_OK)
}

pub fn cmd_catalog(args: &CatalogArgs, out: &mut dyn Write) -> Result<i32, ConfigError> {
    let catalog = Catalog::load_path(&args.catalog)?;
    match &args.lookup {
        Some(query) => match catalog.lookup(query)? {
            Some(record) => Catalog::from_records(vec![record.clone()])?.write(&mut *out)?,
            None => return Err(ConfigError(format!("`{query}` is not in the catalog"))),
        },
        None => catalog.write(&mut *out)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SessionStatus::*;

    #[test]
    fn exit_codes_depend_only_on_the_status_multiset() {
        assert_eq!(exit_code(&[]), EXIT_OK);
        assert_eq!(exit_code(&[Succeeded, Succeeded]), EXIT_OK);
        assert_eq!(exit_code(&[Succeeded, SucceededValidatorFlagged]), EXIT_FLAGGED);
        assert_eq!(exit_code(&[SucceededValidatorFlagged, FailedNoCode]), EXIT_FAILED);
        assert_eq!(exit_code(&[FailedNoCode, SucceededValidatorFlagged]), EXIT_FAILED);
        assert_eq!(exit_code(&[FailedBoundReached]), EXIT_FAILED);
    }

    #[test]
    fn parse_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["evolve", "migrate"], &mut out, &mut err), EXIT_CONFIG);
        assert_eq!(run(["evolve", "--help"], &mut out, &mut err), EXIT_OK);
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("app/Main.java:12#getCurrentHour"), "app_Main_java_12_getCurrentHour");
    }
}
