//! Test-validated migration of deprecated Android API usages with a chat model.
//!
//! The pipeline takes one deprecated-API call site, asks a model for a
//! backward-compatible rewrite, asks it again for a Robolectric test, runs that
//! test at one API level before and one at the deprecation level, and feeds
//! failures back until both levels pass or the iteration bound is hit.
//!
//! Modules map onto the stages:
//!
//! - [`catalog`]: deprecated signatures, deprecation levels and replacements.
//! - [`analysis`]: comment/literal masking, call-site detection, enclosing
//!   method lookup and the structural update validator.
//! - [`prompts`]: byte-exact prompt rendering.
//! - [`gateway`]: chat providers (live HTTP, record, replay) and code extraction.
//! - [`harness`]: project rewrites with backups, dual-level test wrapping and
//!   the external runner protocol.
//! - [`session`]: the bounded refinement state machine.
//! - [`report`]: per-API tables, iteration histograms and timing means.
//! - [`cli`]: the `evolve` command (scan, migrate, report, catalog).
//!
//! See `examples/` for one runnable program per capability.

pub mod analysis;
pub mod catalog;
pub mod cli;
pub mod gateway;
pub mod harness;
pub mod prompts;
pub mod report;
pub mod session;

pub use analysis::{SourceUnit, UpdateValidation, UsageSite, Verdict};
pub use catalog::{ApiSignature, Catalog, DeprecationRecord};
pub use gateway::{ChatExchange, ExtractedCode, Gateway};
pub use harness::{LevelPair, TestRunOutcome, TestStatus};
pub use prompts::{PromptContext, PromptKind, RenderedPrompt};
pub use session::{MigrationSession, SessionStatus};
