//! Pipeline orchestration: configuration, surprisal-source registry,
//! batch evaluation, reports, and synthetic fixtures.

pub mod config;
pub mod report;
pub mod run;
pub mod source;
pub mod synth;

pub use config::{EvalConfig, ModelEntry};
pub use report::{emit_report, ReportFormat};
pub use run::{run, Report, ReportRow};
pub use source::{SourceRegistry, SurprisalSource};
pub use synth::{synth_fixtures, SynthModelSpec, SynthParams};
