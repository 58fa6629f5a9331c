use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use super::runner::OutputDirs;
use super::{OrchestratorError, TaskConfig};
use crate::architecture::{
    extract_catalog, function_identification_envelope, parse_catalog_reply, parse_opl, parse_xmi_bdd, CatalogEntry,
    FunctionCatalog,
};
use crate::classify::{
    self, build_classification_prompt, consistency, join_replies, ClassificationPrompt, ClassifiedRequirement,
    TABLE_HEADER,
};
use crate::coverage::{build_matrix, CoverageMatrix};
use crate::gateway::Resource;
use crate::pairwise::{
    cluster_by_function, plan_contradictions, plan_duplicates, score, GoldPairs, PairAnalysis, PairKind, PairPlan,
};
use crate::report::{DatasetIdentity, ReportInputs};
use crate::requirements::{chunk, load_requirements, Requirement, RequirementChunk};
use crate::{WithWarnings, OTHER_FUNCTION};

type Result<T> = std::result::Result<T, OrchestratorError>;

/// Analysis functions a task may name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    /// Ask the model for the function catalog of an architecture description.
    IdentifyFunctions,
    /// Derive the function catalog from an OPL or XMI model, without the model.
    ExtractFunctions,
    ClassifyRequirements,
    /// Classification followed by the function/type coverage matrix.
    AnalyzeRequirementCompleteness,
    /// Coverage matrix over an existing classification table.
    AnalyzeCoverage,
    DetectDuplicates,
    DetectContradictions,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 7] = [
        Self::IdentifyFunctions,
        Self::ExtractFunctions,
        Self::ClassifyRequirements,
        Self::AnalyzeRequirementCompleteness,
        Self::AnalyzeCoverage,
        Self::DetectDuplicates,
        Self::DetectContradictions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::IdentifyFunctions => "identify_functions",
            Self::ExtractFunctions => "extract_functions",
            Self::ClassifyRequirements => "classify_requirements",
            Self::AnalyzeRequirementCompleteness => "analyze_requirement_completeness",
            Self::AnalyzeCoverage => "analyze_coverage",
            Self::DetectDuplicates => "detect_duplicates",
            Self::DetectContradictions => "detect_contradictions",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|k| k.name()).collect()
    }

    pub fn uses_llm(self) -> bool {
        !matches!(self, Self::ExtractFunctions | Self::AnalyzeCoverage)
    }

    fn classifies(self) -> bool {
        matches!(self, Self::ClassifyRequirements | Self::AnalyzeRequirementCompleteness)
    }

    /// Extension of the main analysis output under `joined/`.
    pub(crate) fn joined_ext(self) -> &'static str {
        match self {
            Self::ClassifyRequirements | Self::AnalyzeRequirementCompleteness | Self::AnalyzeCoverage => "csv",
            _ => "json",
        }
    }

    pub(crate) fn validate(self, cfg: &TaskConfig) -> std::result::Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.uses_llm() && !cfg.execute && !cfg.analyze {
            errors.push("at least one of `execute` and `analyze` must be true".to_string());
        }
        if !self.uses_llm() && !cfg.analyze {
            errors.push(format!("`analyze` must be true for {}", self.name()));
        }
        if self.classifies() {
            if cfg.dataset_columns.is_empty() {
                errors.push("`dataset_columns` must name the requirement text column".into());
            }
            let canon = |s: &str| s.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_ascii_lowercase();
            let known: Vec<String> = TABLE_HEADER.iter().map(|h| canon(h)).collect();
            for c in &cfg.result_columns {
                if !known.contains(&canon(c)) {
                    errors.push(format!("result column `{c}` is not produced (known: {})", TABLE_HEADER.join(", ")));
                }
            }
        }
        if (matches!(self, Self::AnalyzeCoverage) || self.classifies())
            && cfg.architecture_file.is_none()
            && cfg.resources.is_none()
        {
            errors.push(format!("{} needs a function catalog in `architecture_file` or `resources`", self.name()));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

impl FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s.trim()).ok_or_else(|| format!("unknown analysis function `{s}`"))
    }
}

/// Reads a function catalog: catalog JSON (optionally under `results`), an
/// XMI block diagram (`.xmi`, `.xml`), or OPL text (anything else).
pub fn load_catalog_file(path: &Path) -> Result<WithWarnings<FunctionCatalog>> {
    let text = read(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase();
    let catalog = match ext.as_str() {
        "json" => {
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| OrchestratorError::Input(format!("{}: {e}", path.display())))?;
            FunctionCatalog::from_json(v.get("results").unwrap_or(&v))?
        }
        "xmi" | "xml" => {
            let g = parse_xmi_bdd(&text)?;
            let c = extract_catalog(&g.value, None)?;
            WithWarnings::new(c.value, [g.warnings, c.warnings].concat())
        }
        _ => {
            let g = parse_opl(&text)?;
            let c = extract_catalog(&g.value, None)?;
            WithWarnings::new(c.value, [g.warnings, c.warnings].concat())
        }
    };
    Ok(catalog)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| OrchestratorError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(path, bytes).map_err(|e| OrchestratorError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn read_table(path: &Path) -> Result<Vec<ClassifiedRequirement>> {
    let file = fs::File::open(path).map_err(|e| OrchestratorError::io(path, e))?;
    classify::read_table_csv(file).map_err(|e| OrchestratorError::Input(format!("{}: {e}", path.display())))
}

/// Share of reference lineages (catch-all excluded) found in `got`, in percent.
pub fn catalog_accuracy(got: &FunctionCatalog, reference: &FunctionCatalog) -> f64 {
    let norm = |s: &str| s.split('/').map(|p| p.trim().to_lowercase()).collect::<Vec<_>>().join("/");
    let have: Vec<String> = got.entries().iter().map(|e| norm(&e.lineage)).collect();
    let wanted: Vec<&CatalogEntry> = reference.entries().iter().filter(|e| !e.is_catch_all()).collect();
    if wanted.is_empty() {
        return 100.0;
    }
    let hits = wanted.iter().filter(|e| have.contains(&norm(&e.lineage))).count();
    classify::round2(100.0 * hits as f64 / wanted.len() as f64)
}

/// Catalog used to order clusters when the task names no architecture file.
fn catalog_from_table(table: &[ClassifiedRequirement]) -> Result<FunctionCatalog> {
    let mut entries: Vec<CatalogEntry> = Vec::new();
    for r in table.iter().filter(|r| r.function != OTHER_FUNCTION) {
        if !entries.iter().any(|e| e.alias == r.function) {
            entries.push(CatalogEntry { alias: r.function.clone(), lineage: r.function.clone(), primary_system: "System".into() });
        }
    }
    Ok(FunctionCatalog::new(entries)?)
}

/// A task with its inputs loaded, ready to produce prompts and analyse replies.
pub(crate) enum Prepared {
    Identify {
        model_text: String,
        reference: Option<FunctionCatalog>,
    },
    Extract {
        catalog: WithWarnings<FunctionCatalog>,
        reference: Option<FunctionCatalog>,
    },
    Classify {
        reqs: Vec<Requirement>,
        chunks: Vec<RequirementChunk>,
        catalog: FunctionCatalog,
        prompt: ClassificationPrompt,
        identity: DatasetIdentity,
        reference: Option<(Vec<ClassifiedRequirement>, bool)>,
        coverage: bool,
    },
    Coverage {
        table: Vec<ClassifiedRequirement>,
        catalog: FunctionCatalog,
    },
    Pairs {
        plan: PairPlan,
        kind: PairKind,
        table: Vec<ClassifiedRequirement>,
        catalog: Option<FunctionCatalog>,
        gold: Option<GoldPairs>,
    },
}

pub(crate) struct Analysed {
    pub outputs: Vec<PathBuf>,
    pub diagnostics: Vec<String>,
}

impl Prepared {
    /// Loads every input of `cfg`. Never contacts the backend.
    pub fn load(cfg: &TaskConfig, tag: &str, diagnostics: &mut Vec<String>) -> Result<Self> {
        let at = |p: &PathBuf| cfg.tagged(p, tag);
        let input = at(&cfg.input_file);
        let mut catalog_at = |p: &PathBuf| -> Result<FunctionCatalog> {
            let c = load_catalog_file(&at(p))?;
            diagnostics.extend(c.warnings.iter().map(|w| format!("{}: {w}", at(p).display())));
            Ok(c.value)
        };
        Ok(match cfg.analysis_function {
            AnalysisKind::IdentifyFunctions | AnalysisKind::ExtractFunctions => {
                let reference = cfg.gold_file.as_ref().map(&mut catalog_at).transpose()?;
                if cfg.analysis_function == AnalysisKind::IdentifyFunctions {
                    Prepared::Identify { model_text: read(&input)?, reference }
                } else {
                    Prepared::Extract { catalog: load_catalog_file(&input)?, reference }
                }
            }
            k if k.classifies() => {
                let (catalog, resources) = match &cfg.architecture_file {
                    Some(p) => (catalog_at(p)?, cfg.resources.as_ref()),
                    None => (catalog_at(cfg.resources.as_ref().expect("validated"))?, None),
                };
                let reqs = load_requirements(&input, &cfg.dataset_id_column, &cfg.dataset_columns)?;
                let chunks = chunk(&reqs, cfg.chunk_size, cfg.max_items)?;
                let reqs: Vec<Requirement> = chunks.iter().flat_map(|c| c.items.iter().cloned()).collect();
                let mut prompt = ClassificationPrompt::new(cfg.dataset_name.clone());
                prompt.data_columns = cfg.dataset_columns.clone();
                if let Some(p) = &cfg.instructions {
                    prompt.instructions = read(&at(p))?;
                }
                if let Some(p) = resources {
                    let p = at(p);
                    let tag = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect())
                        .unwrap_or_else(|| "resources".to_string());
                    prompt.extra_resources.push(Resource::json_or_text(&tag, &read(&p)?)?);
                }
                let reference = match &cfg.gold_file {
                    None => None,
                    Some(p) => {
                        let p = at(p);
                        let f = fs::File::open(&p).map_err(|e| OrchestratorError::io(&p, e))?;
                        Some(classify::read_reference_csv(f)?)
                    }
                };
                let identity = DatasetIdentity::of_file(cfg.dataset_name.clone(), &input)
                    .map_err(|e| OrchestratorError::io(&input, e))?;
                Prepared::Classify {
                    reqs,
                    chunks,
                    catalog,
                    prompt,
                    identity,
                    reference,
                    coverage: k == AnalysisKind::AnalyzeRequirementCompleteness,
                }
            }
            AnalysisKind::AnalyzeCoverage => Prepared::Coverage {
                table: read_table(&input)?,
                catalog: catalog_at(cfg.architecture_file.as_ref().or(cfg.resources.as_ref()).expect("validated"))?,
            },
            AnalysisKind::DetectDuplicates | AnalysisKind::DetectContradictions => {
                let table = read_table(&input)?;
                let catalog = cfg.architecture_file.as_ref().map(&mut catalog_at).transpose()?;
                let order = match &catalog {
                    Some(c) => c.clone(),
                    None => catalog_from_table(&table)?,
                };
                let clusters = cluster_by_function(&table, &order);
                let (plan, kind) = if cfg.analysis_function == AnalysisKind::DetectDuplicates {
                    (plan_duplicates(&clusters, cfg.prompt_version), PairKind::Duplicate)
                } else {
                    let duplicates = match &cfg.duplicates_file {
                        Some(p) => {
                            let p = at(p);
                            let a: PairAnalysis = serde_json::from_str(&read(&p)?)
                                .map_err(|e| OrchestratorError::Input(format!("{}: {e}", p.display())))?;
                            a.findings
                        }
                        None => {
                            diagnostics.push("no duplicates_file: contradictions run over every requirement".into());
                            Vec::new()
                        }
                    };
                    (plan_contradictions(&clusters, &duplicates), PairKind::Contradiction)
                };
                let gold = cfg.gold_file.as_ref().map(|p| GoldPairs::load_csv(at(p), kind)).transpose()?;
                if let Some(g) = &gold {
                    g.check_ids(table.iter().map(|r| r.req_id.as_str()))?;
                }
                Prepared::Pairs { plan, kind, table, catalog, gold }
            }
            _ => unreachable!("every kind handled"),
        })
    }

    /// `(label, prompt)` per backend call, in order.
    pub fn prompts(&self) -> Vec<(String, String)> {
        match self {
            Prepared::Identify { model_text, .. } => {
                vec![("model".to_string(), function_identification_envelope(model_text).render())]
            }
            Prepared::Classify { chunks, catalog, prompt, .. } => chunks
                .iter()
                .map(|c| (format!("chunk {}", c.index), build_classification_prompt(c, catalog, prompt).render()))
                .collect(),
            Prepared::Pairs { plan, .. } => plan.calls.iter().map(|c| (c.cluster.clone(), c.prompt.clone())).collect(),
            Prepared::Extract { .. } | Prepared::Coverage { .. } => Vec::new(),
        }
    }

    /// Parses replies, joins them and writes the analysis outputs, then
    /// records the results in `inputs`.
    pub fn analyse(
        self,
        cfg: &TaskConfig,
        tag: &str,
        dirs: &OutputDirs,
        replies: &[String],
        inputs: &mut ReportInputs,
    ) -> Result<Analysed> {
        let main = dirs.joined_file(&cfg.task_name, tag, cfg.analysis_function.joined_ext());
        let mut out = Analysed { outputs: Vec::new(), diagnostics: Vec::new() };
        match self {
            Prepared::Identify { reference, .. } => {
                let parsed = parse_catalog_reply(&replies[0])?;
                out.diagnostics.extend(parsed.warnings);
                out.outputs.push(write(&main, &pretty(&parsed.value.to_json()))?);
                contribute_catalog(parsed.value, reference.as_ref(), inputs);
            }
            Prepared::Extract { catalog, reference } => {
                out.diagnostics.extend(catalog.warnings);
                out.outputs.push(write(&main, &pretty(&catalog.value.to_json()))?);
                contribute_catalog(catalog.value, reference.as_ref(), inputs);
            }
            Prepared::Classify { reqs, catalog, identity, reference, coverage, .. } => {
                let joined = join_replies(&reqs, replies, &catalog)?;
                out.diagnostics.extend(joined.diagnostics);
                let mut buf = Vec::new();
                classify::write_table_csv(&joined.rows, &mut buf)
                    .map_err(|e| OrchestratorError::Input(format!("{}: {e}", main.display())))?;
                out.outputs.push(write(&main, &buf)?);
                let q = dirs.quarantine_file(&cfg.task_name, tag);
                out.outputs.push(write(&q, &pretty(&joined.quarantine))?);
                if !joined.quarantine.is_empty() {
                    out.diagnostics.push(format!("{} record(s) quarantined in {}", joined.quarantine.len(), q.display()));
                }
                if coverage {
                    let m = build_matrix(&joined.rows, &catalog)?;
                    out.outputs.push(write_matrix(&dirs.joined_file(&cfg.task_name, tag, "coverage.csv"), &m)?);
                    log_gaps(&m, &mut out.diagnostics);
                }
                contribute_table(joined.rows, catalog, Some(identity), reference.as_ref(), inputs, &mut out.diagnostics);
            }
            Prepared::Coverage { table, catalog } => {
                let m = build_matrix(&table, &catalog)?;
                out.outputs.push(write_matrix(&main, &m)?);
                log_gaps(&m, &mut out.diagnostics);
                contribute_table(table, catalog, None, None, inputs, &mut out.diagnostics);
            }
            Prepared::Pairs { plan, kind, table, catalog, gold } => {
                let analysis = plan.interpret(replies)?;
                out.diagnostics.extend(analysis.notes.iter().cloned());
                out.outputs.push(write(&main, &pretty(&analysis))?);
                let q = dirs.quarantine_file(&cfg.task_name, tag);
                out.outputs.push(write(&q, &pretty(&analysis.quarantine))?);
                contribute_pairs(analysis, kind, table, catalog, gold.as_ref(), inputs, &mut out.diagnostics)?;
            }
        }
        Ok(out)
    }

    /// Records the outputs of an earlier run in `inputs`, as if analysed now.
    pub fn reload(self, cfg: &TaskConfig, tag: &str, dirs: &OutputDirs, inputs: &mut ReportInputs) -> Result<Vec<String>> {
        let main = dirs.joined_file(&cfg.task_name, tag, cfg.analysis_function.joined_ext());
        let mut diagnostics = Vec::new();
        if !main.exists() {
            diagnostics.push(format!("{} not found; nothing to report from this task", main.display()));
            return Ok(diagnostics);
        }
        match self {
            Prepared::Identify { reference, .. } | Prepared::Extract { reference, .. } => {
                let v: Value = serde_json::from_str(&read(&main)?)
                    .map_err(|e| OrchestratorError::Input(format!("{}: {e}", main.display())))?;
                contribute_catalog(FunctionCatalog::from_json(&v)?.value, reference.as_ref(), inputs);
            }
            Prepared::Classify { catalog, identity, reference, .. } => {
                let table = read_table(&main)?;
                contribute_table(table, catalog, Some(identity), reference.as_ref(), inputs, &mut diagnostics);
            }
            Prepared::Coverage { table, catalog } => contribute_table(table, catalog, None, None, inputs, &mut diagnostics),
            Prepared::Pairs { kind, table, catalog, gold, .. } => {
                let analysis: PairAnalysis = serde_json::from_str(&read(&main)?)
                    .map_err(|e| OrchestratorError::Input(format!("{}: {e}", main.display())))?;
                contribute_pairs(analysis, kind, table, catalog, gold.as_ref(), inputs, &mut diagnostics)?;
            }
        }
        Ok(diagnostics)
    }
}

fn write_matrix(path: &Path, m: &CoverageMatrix) -> Result<PathBuf> {
    let mut buf = Vec::new();
    m.write_csv(&mut buf).map_err(|e| OrchestratorError::Input(format!("{}: {e}", path.display())))?;
    write(path, &buf)
}

fn log_gaps(m: &CoverageMatrix, diagnostics: &mut Vec<String>) {
    let gaps: Vec<String> = m.gaps().iter().map(|r| format!("{} (short {})", r.function, r.shortfall())).collect();
    if !gaps.is_empty() {
        diagnostics.push(format!("missing coverage: {}", gaps.join(", ")));
    }
}

fn contribute_catalog(catalog: FunctionCatalog, reference: Option<&FunctionCatalog>, inputs: &mut ReportInputs) {
    if let Some(r) = reference {
        inputs.scores.subsystem_identification = Some(catalog_accuracy(&catalog, r));
    }
    inputs.catalog = Some(catalog);
}

fn contribute_table(
    table: Vec<ClassifiedRequirement>,
    catalog: FunctionCatalog,
    identity: Option<DatasetIdentity>,
    reference: Option<&(Vec<ClassifiedRequirement>, bool)>,
    inputs: &mut ReportInputs,
    diagnostics: &mut Vec<String>,
) {
    if let Some((gold, typed)) = reference {
        match consistency(&[&table], Some(gold), *typed) {
            Ok(v) => inputs.scores.classification = Some(v),
            Err(e) => diagnostics.push(format!("classification not scored: {e}")),
        }
    }
    if let Some(id) = identity {
        inputs.dataset = id;
    }
    inputs.classification = Some(table);
    inputs.catalog = Some(catalog);
}

fn contribute_pairs(
    analysis: PairAnalysis,
    kind: PairKind,
    table: Vec<ClassifiedRequirement>,
    catalog: Option<FunctionCatalog>,
    gold: Option<&GoldPairs>,
    inputs: &mut ReportInputs,
    diagnostics: &mut Vec<String>,
) -> Result<()> {
    if let Some(g) = gold {
        let s = score(&analysis.findings, g)?;
        diagnostics.push(format!(
            "{kind}: {} of {} known pairs found ({:.2}%), {} false positive(s)",
            s.detected_true, s.gold_total, s.rate, s.false_positive
        ));
        match kind {
            PairKind::Contradiction => inputs.scores.contradictions = Some(s.rate),
            _ => inputs.scores.duplicates = Some(s.rate),
        }
    }
    if inputs.classification.is_none() {
        inputs.classification = Some(table);
    }
    if inputs.catalog.is_none() {
        inputs.catalog = catalog;
    }
    match kind {
        PairKind::Contradiction => inputs.contradictions = Some(analysis),
        _ => inputs.duplicates = Some(analysis),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in AnalysisKind::ALL {
            assert_eq!(k.name().parse::<AnalysisKind>(), Ok(k));
        }
        assert!("analyse".parse::<AnalysisKind>().is_err());
    }

    #[test]
    fn accuracy_ignores_alias_and_case() {
        let e = |a: &str, l: &str| CatalogEntry { alias: a.into(), lineage: l.into(), primary_system: "D".into() };
        let reference = FunctionCatalog::new(vec![e("NAV", "D/Navigating"), e("EN", "D/Engine")]).unwrap();
        let got = FunctionCatalog::new(vec![e("N", "d / navigating"), e("X", "D/Other")]).unwrap();
        assert_eq!(catalog_accuracy(&got, &reference), 50.0);
    }
}
