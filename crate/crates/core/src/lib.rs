//! Safety requirement analysis toolchain.
//!
//! The crate ingests a system architecture model (OPL text or a simplified
//! SysML XMI block definition diagram), derives the catalog of system
//! functions, and drives an LLM backend through a batched, delta-aware task
//! runner to:
//!
//! - rewrite and classify stakeholder requirements by function and type
//!   (functional `FUNC`, probabilistic `PROB`, or unclear `_OT_`),
//! - build the function/type coverage matrix and flag functions whose
//!   requirement set is insufficient,
//! - detect duplicate and contradicting requirement pairs,
//! - emit an allocation, classification, duplicate and conflict report set
//!   with a metrics summary.
//!
//! Every LLM interaction goes through [`gateway::Gateway`], which can be
//! backed by an OpenAI-compatible HTTP endpoint or by a deterministic fixture
//! replay ([`gateway::MockBackend`]), so whole pipelines run offline.
//!
//! Runnable walkthroughs for each capability live in `examples/`:
//!
//! ```bash
//! cargo run --example parse_opl
//! cargo run --example run_pipeline
//! ```

pub mod architecture;
pub mod classify;
pub mod coverage;
pub mod gateway;
pub mod orchestrator;
pub mod pairwise;
pub mod report;
pub mod requirements;

mod diag;

pub use diag::WithWarnings;

pub use architecture::{ArchitectureGraph, CatalogEntry, FunctionCatalog, OplRelation, OplThing};
pub use classify::{ClassifiedRequirement, RequirementType};
pub use coverage::{CoverageMatrix, CoverageRow, Verdict};
pub use gateway::{Gateway, LlmRequestParams, LlmResult, PromptEnvelope};
pub use orchestrator::{Runner, TaskConfig, TaskOutcome, TaskStatus};
pub use pairwise::{GoldPairs, PairFinding, PairKind, PairScore};
pub use report::{MetricsThresholds, ReportSet};
pub use requirements::{Requirement, RequirementChunk};

/// Alias of the catch-all function every catalog carries.
pub const OTHER_FUNCTION: &str = "_OF_";
/// Lineage label of the catch-all function.
pub const OTHER_FUNCTION_NAME: &str = "Other Function";
