//! Configuration-driven task runner.
//!
//! A parameters file holds task blocks in execution order, plus optional
//! `defaults` (merged into every block), `thresholds` and `llm` sections.
//! Each task loads its inputs, optionally sends prompts (`execute`), writes
//! the raw replies, then optionally parses and joins them and runs its
//! analysis function (`analyze`). Outputs are versioned by tag:
//!
//! ```text
//! <output_path>/raw/<task>_<tag>.jsonl
//! <output_path>/joined/<task>_<tag>.{csv,json}
//! <output_path>/quarantine/<task>_<tag>.json
//! <output_path>/reports/<report>_<tag>.{csv,json,md}
//! ```
//!
//! With `delta` on, a task whose primary output already exists is skipped
//! without contacting the backend.

mod analyses;
mod config;
mod runner;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use analyses::{catalog_accuracy, load_catalog_file, AnalysisKind};
pub use config::{
    load_config, parse_config, ConfigFile, LlmSettings, TaskConfig, RESERVED_KEYS, TASK_TYPE, VERSION_PLACEHOLDER,
};
pub use runner::{OutputDirs, PlannedTask, Runner};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("task `{task}`: invalid configuration: {}", messages.join("; "))]
    InvalidConfig { task: String, messages: Vec<String> },
    #[error("task `{task}`: unknown analysis function `{name}` (expected one of {})", AnalysisKind::names().join(", "))]
    UnknownAnalysisFunction { task: String, name: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Architecture(#[from] crate::architecture::ArchitectureError),
    #[error(transparent)]
    Requirements(#[from] crate::requirements::RequirementsError),
    #[error(transparent)]
    Classify(#[from] crate::classify::ClassifyError),
    #[error(transparent)]
    Coverage(#[from] crate::coverage::CoverageError),
    #[error(transparent)]
    Pairwise(#[from] crate::pairwise::PairwiseError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

impl OrchestratorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TaskStatus {
    Executed,
    SkippedDeltaHit,
    SkippedRunFalse,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskOutcome {
    pub task_name: String,
    pub version_tag: String,
    pub status: TaskStatus,
    /// Files written by the task, report files included for the last
    /// executed task of an output directory.
    pub outputs: Vec<PathBuf>,
    pub diagnostics: Vec<String>,
    /// Backend attempts made by this task.
    pub calls: usize,
}
