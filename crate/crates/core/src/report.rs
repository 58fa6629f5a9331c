//! Report set and metrics summary.
//!
//! [`emit_report_set`] writes, under one directory and for one version tag:
//! the allocation, classification, duplicate and contradiction reports (CSV
//! and JSON each), the coverage matrix, a metrics table and a Markdown
//! summary. Inputs that were not produced render as "not run".

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::architecture::FunctionCatalog;
use crate::classify::{self, ClassifiedRequirement, Flag, RequirementType};
use crate::coverage::{build_matrix, CoverageMatrix};
use crate::pairwise::{consolidate, PairAnalysis, PairFinding, PairKind};
use crate::OTHER_FUNCTION;

pub const NOT_RUN: &str = "not run";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// Pass marks, in percent. A metric passes when strictly above its mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsThresholds {
    pub subsystem_identification: f64,
    pub classification: f64,
    pub duplicates: f64,
    pub contradictions: f64,
    pub stability: f64,
}

impl Default for MetricsThresholds {
    fn default() -> Self {
        Self { subsystem_identification: 90.0, classification: 80.0, duplicates: 80.0, contradictions: 80.0, stability: 80.0 }
    }
}

/// Measured percentages; absent ones are left out of the metrics table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub subsystem_identification: Option<f64>,
    pub classification: Option<f64>,
    pub duplicates: Option<f64>,
    pub contradictions: Option<f64>,
    pub stability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub fn metrics_summary(scores: &Scores, thresholds: &MetricsThresholds) -> Vec<MetricRow> {
    [
        ("subsystem_identification", scores.subsystem_identification, thresholds.subsystem_identification),
        ("classification", scores.classification, thresholds.classification),
        ("duplicates", scores.duplicates, thresholds.duplicates),
        ("contradictions", scores.contradictions, thresholds.contradictions),
        ("stability", scores.stability, thresholds.stability),
    ]
    .into_iter()
    .filter_map(|(metric, value, threshold)| {
        value.map(|value| MetricRow { metric: metric.into(), value, threshold, passed: value > threshold })
    })
    .collect()
}

/// Which data the reports were built from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIdentity {
    pub name: String,
    pub source: String,
    /// SHA-256 of the input file bytes.
    pub sha256: Option<String>,
}

impl DatasetIdentity {
    pub fn of_file(name: impl Into<String>, path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        Ok(Self {
            name: name.into(),
            source: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: Some(crate::gateway::prompt_hash(&String::from_utf8_lossy(&bytes))),
        })
    }
}

/// Everything the report set can draw on.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub dataset: DatasetIdentity,
    pub catalog: Option<FunctionCatalog>,
    pub classification: Option<Vec<ClassifiedRequirement>>,
    pub duplicates: Option<PairAnalysis>,
    pub contradictions: Option<PairAnalysis>,
    pub scores: Scores,
    pub thresholds: MetricsThresholds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub req_id: String,
    pub function: String,
    pub lineage: String,
    pub primary_system: String,
    pub confidence: u8,
    pub explanation: String,
}

/// The reports as written.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSet {
    pub version_tag: String,
    pub dataset: DatasetIdentity,
    pub allocation: Option<Vec<AllocationRow>>,
    pub classification: Option<Vec<ClassifiedRequirement>>,
    pub duplicates: Option<Vec<PairFinding>>,
    pub contradictions: Option<Vec<PairFinding>>,
    pub coverage: Option<CoverageMatrix>,
    pub metrics: Vec<MetricRow>,
    pub files: Vec<PathBuf>,
}

pub fn allocation_rows(table: &[ClassifiedRequirement], catalog: Option<&FunctionCatalog>) -> Vec<AllocationRow> {
    table
        .iter()
        .map(|r| {
            let entry = catalog.and_then(|c| c.get(&r.function));
            AllocationRow {
                req_id: r.req_id.clone(),
                function: r.function.clone(),
                lineage: entry.map(|e| e.lineage.clone()).unwrap_or_default(),
                primary_system: entry.map(|e| e.primary_system.clone()).unwrap_or_default(),
                confidence: r.confidence,
                explanation: r.function_explanation.clone(),
            }
        })
        .collect()
}

struct Writer<'a> {
    dir: &'a Path,
    tag: &'a str,
    header: Value,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}_{}.{ext}", self.tag))
    }

    fn bytes(&mut self, stem: &str, ext: &str, bytes: &[u8]) -> Result<(), ReportError> {
        let path = self.path(stem, ext);
        fs::write(&path, bytes).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, stem: &str, rows: Option<Value>) -> Result<(), ReportError> {
        let mut doc = self.header.clone();
        doc["report"] = json!(stem);
        doc["status"] = json!(if rows.is_some() { "ok" } else { NOT_RUN });
        doc["rows"] = rows.unwrap_or_else(|| json!([]));
        let mut text = serde_json::to_string_pretty(&doc).expect("report JSON");
        text.push('\n');
        self.bytes(stem, "json", text.as_bytes())
    }

    fn csv(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), ReportError> {
        let path = self.path(stem, "csv");
        let csv_err = |source| ReportError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
        self.bytes(stem, "csv", &bytes)
    }
}

const PAIR_HEADER: [&str; 7] = ["ReqID A", "ReqID B", "Relation", "Function A", "Function B", "Rationale", "Notes"];

fn pair_rows(findings: &[PairFinding]) -> Vec<Vec<String>> {
    findings
        .iter()
        .map(|f| {
            vec![
                f.req_a.clone(),
                f.req_b.clone(),
                f.kind.to_string(),
                f.function_a.clone(),
                f.function_b.clone(),
                f.rationale.clone(),
                f.notes.join("; "),
            ]
        })
        .collect()
}

/// Builds the report set and writes it to `out_dir`, creating the directory.
///
/// Equal inputs give byte-equal files.
pub fn emit_report_set(inputs: &ReportInputs, out_dir: &Path, version_tag: &str) -> Result<ReportSet, ReportError> {
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io { path: out_dir.to_path_buf(), source })?;
    let table = inputs.classification.as_deref();
    let catalog = inputs.catalog.as_ref();
    let allocation = table.map(|t| allocation_rows(t, catalog));
    let coverage = match (table, catalog) {
        (Some(t), Some(c)) => match build_matrix(t, c) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("coverage matrix skipped: {e}");
                None
            }
        },
        _ => None,
    };
    let duplicates = inputs.duplicates.as_ref().map(|a| a.findings.clone());
    let contradictions = inputs.contradictions.as_ref().map(|a| a.findings.clone());
    let metrics = metrics_summary(&inputs.scores, &inputs.thresholds);

    let mut w = Writer {
        dir: out_dir,
        tag: version_tag,
        header: json!({ "version_tag": version_tag, "dataset": inputs.dataset }),
        files: Vec::new(),
    };

    let alloc_rows: Vec<Vec<String>> = allocation
        .iter()
        .flatten()
        .map(|a| {
            vec![
                a.req_id.clone(),
                a.function.clone(),
                a.lineage.clone(),
                a.primary_system.clone(),
                a.confidence.to_string(),
                a.explanation.clone(),
            ]
        })
        .collect();
    w.csv("allocation", &["ReqID", "Function", "Lineage", "Primary System", "Confidence", "Explanation"], &alloc_rows)?;
    w.json("allocation", allocation.as_ref().map(|a| json!(a)))?;

    let mut buf = Vec::new();
    classify::write_table_csv(table.unwrap_or_default(), &mut buf)
        .map_err(|source| ReportError::Csv { path: w.path("classification", "csv"), source })?;
    w.bytes("classification", "csv", &buf)?;
    w.json("classification", table.map(|t| json!(t)))?;

    w.csv("duplicates", &PAIR_HEADER, &pair_rows(duplicates.as_deref().unwrap_or_default()))?;
    w.json("duplicates", duplicates.as_ref().map(|d| json!(d)))?;
    w.csv("contradictions", &PAIR_HEADER, &pair_rows(contradictions.as_deref().unwrap_or_default()))?;
    w.json("contradictions", contradictions.as_ref().map(|d| json!(d)))?;

    match &coverage {
        Some(m) => {
            let mut buf = Vec::new();
            m.write_csv(&mut buf).map_err(|source| ReportError::Csv { path: w.path("coverage", "csv"), source })?;
            w.bytes("coverage", "csv", &buf)?;
        }
        None => w.csv("coverage", &["Function", "N Reqs FUNC", "N Reqs PROB", "N Reqs _OT_", "Result"], &[])?,
    }

    let mut doc = w.header.clone();
    doc["metrics"] = json!(metrics);
    let mut text = serde_json::to_string_pretty(&doc).expect("metrics JSON");
    text.push('\n');
    w.bytes("metrics", "json", text.as_bytes())?;

    let set = ReportSet {
        version_tag: version_tag.to_string(),
        dataset: inputs.dataset.clone(),
        allocation,
        classification: inputs.classification.clone(),
        duplicates,
        contradictions,
        coverage,
        metrics,
        files: Vec::new(),
    };
    let summary = render_summary(&set, inputs);
    w.bytes("summary", "md", summary.as_bytes())?;
    Ok(ReportSet { files: w.files, ..set })
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn pair_section(out: &mut String, title: &str, analysis: Option<&PairAnalysis>, kinds: &[PairKind]) {
    let _ = writeln!(out, "## {title}\n");
    let Some(a) = analysis else {
        let _ = writeln!(out, "{NOT_RUN}\n");
        return;
    };
    for kind in kinds {
        let _ = writeln!(out, "- {}: {}", kind, a.of_kind(*kind).count());
    }
    let _ = writeln!(out, "- quarantined records: {}\n", a.quarantine.len());
    if !a.findings.is_empty() {
        out.push_str("| ReqID A | ReqID B | Relation | Functions | Rationale |\n|---|---|---|---|---|\n");
        for f in &a.findings {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} / {} | {} |",
                f.req_a,
                f.req_b,
                f.kind,
                f.function_a,
                f.function_b,
                cell(&f.rationale)
            );
        }
        out.push('\n');
    }
    if kinds.contains(&PairKind::Duplicate) {
        let groups = consolidate(&a.findings);
        for g in &groups.groups {
            let _ = writeln!(out, "- keep {}, drop {}", g[0], g[1..].join(", "));
        }
        if !groups.groups.is_empty() {
            out.push('\n');
        }
    }
    for n in &a.notes {
        let _ = writeln!(out, "> {}", cell(n));
    }
    if !a.notes.is_empty() {
        out.push('\n');
    }
}

fn render_summary(set: &ReportSet, inputs: &ReportInputs) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Safety requirements report `{}`\n", set.version_tag);
    let _ = writeln!(out, "- dataset: {}", if set.dataset.name.is_empty() { "(unnamed)" } else { &set.dataset.name });
    if !set.dataset.source.is_empty() {
        let _ = writeln!(out, "- source: {}", set.dataset.source);
    }
    if let Some(h) = &set.dataset.sha256 {
        let _ = writeln!(out, "- sha256: {h}");
    }
    if let Some(t) = &set.classification {
        let _ = writeln!(out, "- requirements: {}", t.len());
    }
    out.push('\n');

    out.push_str("## Coverage\n\n");
    match &set.coverage {
        None => {
            let _ = writeln!(out, "{NOT_RUN}\n");
        }
        Some(m) => {
            out.push_str("| Function | FUNC | PROB | _OT_ | Result |\n|---|---|---|---|---|\n");
            for r in &m.rows {
                let _ = writeln!(out, "| {} | {} | {} | {} | {} |", r.function, r.n_func, r.n_prob, r.n_other, r.verdict.as_str());
            }
            let t = &m.totals;
            let _ = writeln!(out, "| Total | {} | {} | {} | |\n", t.n_func, t.n_prob, t.n_other);
        }
    }

    out.push_str("## Gaps\n\n");
    match &set.coverage {
        None => {
            let _ = writeln!(out, "{NOT_RUN}\n");
        }
        Some(m) if m.gaps().is_empty() => out.push_str("every function is complete\n\n"),
        Some(m) => {
            for (rank, r) in m.gaps().into_iter().enumerate() {
                let need_f = crate::coverage::MIN_FUNC.saturating_sub(r.n_func);
                let need_p = crate::coverage::MIN_PROB.saturating_sub(r.n_prob);
                let lineage = inputs.catalog.as_ref().and_then(|c| c.get(&r.function)).map_or("", |e| e.lineage.as_str());
                let needs: Vec<String> = [(need_f, "FUNC"), (need_p, "PROB")]
                    .into_iter()
                    .filter(|(n, _)| *n > 0)
                    .map(|(n, t)| format!("{n} more {t}"))
                    .collect();
                let _ = writeln!(out, "{}. {} ({lineage}): needs {}", rank + 1, r.function, needs.join(" and "));
            }
            out.push('\n');
        }
    }

    pair_section(
        &mut out,
        "Duplicates",
        inputs.duplicates.as_ref(),
        &[PairKind::Duplicate, PairKind::Complementary, PairKind::Refinement],
    );
    pair_section(&mut out, "Contradictions", inputs.contradictions.as_ref(), &[PairKind::Contradiction]);

    out.push_str("## Triage\n\n");
    match &set.classification {
        None => {
            let _ = writeln!(out, "{NOT_RUN}\n");
        }
        Some(t) => {
            let rows: Vec<_> = t
                .iter()
                .filter(|r| r.has(Flag::LowConfidence) || r.function == OTHER_FUNCTION || r.rtype == RequirementType::Other)
                .collect();
            if rows.is_empty() {
                out.push_str("nothing to review\n\n");
            } else {
                out.push_str("| ReqID | Function | Type | Confidence | Flags | Requirement |\n|---|---|---|---|---|---|\n");
                for r in rows {
                    let flags: Vec<String> = r.flags.iter().map(|f| format!("{f:?}")).collect();
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} |",
                        r.req_id,
                        r.function,
                        r.rtype,
                        r.confidence,
                        flags.join(", "),
                        cell(&r.original_text)
                    );
                }
                out.push('\n');
            }
        }
    }

    out.push_str("## Metrics\n\n");
    if set.metrics.is_empty() {
        let _ = writeln!(out, "{NOT_RUN}");
    } else {
        out.push_str("| Metric | Value | Threshold | Result |\n|---|---|---|---|\n");
        for m in &set.metrics {
            let _ = writeln!(
                out,
                "| {} | {:.2} | > {:.2} | {} |",
                m.metric,
                m.value,
                m.threshold,
                if m.passed { "pass" } else { "fail" }
            );
        }
    }
    out
}
