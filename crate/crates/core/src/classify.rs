//! Requirement classification by function and type.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::architecture::FunctionCatalog;
use crate::gateway::{
    parse_results_json, FieldKind, FieldSpec, Gateway, GatewayError, PromptEnvelope, RecordSchema, Resource,
};
use crate::requirements::{Requirement, RequirementChunk};
use crate::OTHER_FUNCTION;

pub const CLASSIFICATION_INSTRUCTIONS: &str = include_str!("../assets/classification.txt");

/// Replies below this confidence are flagged [`Flag::LowConfidence`].
pub const LOW_CONFIDENCE: u8 = 80;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("chunk {index}: {source}")]
    Gateway { index: usize, source: GatewayError },
    #[error("chunk {index}: unparseable reply: {source}")]
    Parse { index: usize, source: GatewayError },
    #[error("classification tables cover different requirement ids: {0}")]
    MismatchedIdSets(String),
    #[error("consistency needs {0}")]
    NotEnoughRuns(&'static str),
    #[error("classification table is empty")]
    EmptyTable,
    #[error("bad classification table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RequirementType {
    #[serde(rename = "FUNC")]
    Func,
    #[serde(rename = "PROB")]
    Prob,
    #[serde(rename = "_OT_")]
    Other,
}

impl RequirementType {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Func => "FUNC",
            Self::Prob => "PROB",
            Self::Other => "_OT_",
        }
    }
}

impl fmt::Display for RequirementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequirementType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().trim_matches('_').to_ascii_uppercase().as_str() {
            "FUNC" | "FUNCTIONAL" => Ok(Self::Func),
            "PROB" | "PROBABILISTIC" => Ok(Self::Prob),
            "OT" | "OTHER" | "OTHER TYPE" => Ok(Self::Other),
            _ => Err(format!("unknown requirement type `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Flag {
    RemappedToOF,
    Unreturned,
    LowConfidence,
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "RemappedToOF" => Ok(Self::RemappedToOF),
            "Unreturned" => Ok(Self::Unreturned),
            "LowConfidence" => Ok(Self::LowConfidence),
            other => Err(format!("unknown flag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedRequirement {
    pub req_id: String,
    pub original_text: String,
    /// Rewritten shall-statement.
    pub system_requirement: String,
    pub function: String,
    pub rtype: RequirementType,
    pub confidence: u8,
    pub function_explanation: String,
    pub type_explanation: String,
    pub flags: BTreeSet<Flag>,
    /// Validator remarks, e.g. the alias a remapped row originally carried.
    pub notes: Vec<String>,
}

impl ClassifiedRequirement {
    /// Placeholder for a requirement the model did not return.
    pub fn unreturned(req: &Requirement) -> Self {
        Self {
            req_id: req.req_id.clone(),
            original_text: req.text.clone(),
            system_requirement: req.text.clone(),
            function: OTHER_FUNCTION.to_string(),
            rtype: RequirementType::Other,
            confidence: 0,
            function_explanation: String::new(),
            type_explanation: String::new(),
            flags: BTreeSet::from([Flag::Unreturned, Flag::LowConfidence]),
            notes: vec!["not returned by the model".to_string()],
        }
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    /// The rewritten statement, falling back to the original text.
    pub fn best_text(&self) -> &str {
        if self.system_requirement.trim().is_empty() {
            &self.original_text
        } else {
            &self.system_requirement
        }
    }
}

/// A reply record that could not be joined to an input requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantinedRecord {
    pub chunk: Option<usize>,
    pub req_id: Option<String>,
    pub reason: String,
    pub record: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinOutcome {
    /// One row per input requirement, in input order.
    pub rows: Vec<ClassifiedRequirement>,
    pub quarantine: Vec<QuarantinedRecord>,
    pub diagnostics: Vec<String>,
}

pub fn record_schema() -> RecordSchema {
    RecordSchema::new(
        Some("ReqID"),
        vec![
            FieldSpec::required("Function", FieldKind::String),
            FieldSpec::required("Type", FieldKind::String),
            FieldSpec::optional("Confidence", FieldKind::Integer),
            FieldSpec::optional("System_Requirement", FieldKind::String),
            FieldSpec::optional("Function_Explanation", FieldKind::String),
            FieldSpec::optional("Type_Explanation", FieldKind::String),
        ],
    )
}

/// Catalog rendered as `{alias: lineage}` for the ARCHITECTURE resource.
pub fn catalog_resource(catalog: &FunctionCatalog) -> Value {
    Value::Object(catalog.entries().iter().map(|e| (e.alias.clone(), Value::String(e.lineage.clone()))).collect())
}

pub fn type_resource() -> Value {
    json!({
        "FUNC": "Functional safety requirement: defines safe operational behavior of a function.",
        "PROB": "Probabilistic safety requirement: quantifies acceptable risk or failure likelihood.",
        "_OT_": "Other type: the requirement is neither clearly functional nor clearly probabilistic."
    })
}

/// Settings shared by every classification prompt of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationPrompt {
    pub instructions: String,
    pub dataset_name: String,
    pub data_columns: Vec<String>,
    pub extra_resources: Vec<Resource>,
}

impl ClassificationPrompt {
    pub fn new(dataset_name: impl Into<String>) -> Self {
        Self {
            instructions: CLASSIFICATION_INSTRUCTIONS.to_string(),
            dataset_name: dataset_name.into(),
            data_columns: Vec::new(),
            extra_resources: Vec::new(),
        }
    }
}

/// Envelope for one chunk: instructions, ARCHITECTURE, type definitions,
/// any extra resources, then the rows.
pub fn build_classification_prompt(
    chunk: &RequirementChunk,
    catalog: &FunctionCatalog,
    prompt: &ClassificationPrompt,
) -> PromptEnvelope {
    let mut env = PromptEnvelope::new(prompt.instructions.replace("{dataset_name}", &prompt.dataset_name))
        .resource(Resource::json("ARCHITECTURE", catalog_resource(catalog)).expect("static tag"))
        .resource(Resource::json("safety_function_type", type_resource()).expect("static tag"));
    for r in &prompt.extra_resources {
        env = env.resource(r.clone());
    }
    let rows = chunk.items.iter().map(|r| r.prompt_row(&prompt.data_columns)).collect();
    env.dataset(prompt.dataset_name.clone(), rows)
}

fn text_field(record: &Map<String, Value>, key: &str) -> String {
    record.get(key).and_then(Value::as_str).map(str::trim).unwrap_or_default().to_string()
}

fn classify_record(req: &Requirement, record: &Map<String, Value>, catalog: &FunctionCatalog) -> ClassifiedRequirement {
    let mut flags = BTreeSet::new();
    let mut notes = Vec::new();

    let returned = text_field(record, "Function");
    let function = if catalog.contains(&returned) {
        returned
    } else {
        flags.insert(Flag::RemappedToOF);
        notes.push(format!("alias `{returned}` is not in the catalog; remapped to {OTHER_FUNCTION}"));
        OTHER_FUNCTION.to_string()
    };

    let type_text = text_field(record, "Type");
    let rtype = type_text.parse().unwrap_or_else(|e| {
        notes.push(format!("{e}; treated as _OT_"));
        RequirementType::Other
    });

    let confidence = match record.get("Confidence").and_then(Value::as_i64) {
        Some(c) if (0..=100).contains(&c) => c as u8,
        Some(c) => {
            notes.push(format!("confidence {c} clamped to 0..=100"));
            c.clamp(0, 100) as u8
        }
        None => {
            notes.push("no confidence returned".to_string());
            0
        }
    };
    if confidence < LOW_CONFIDENCE {
        flags.insert(Flag::LowConfidence);
    }

    let rewritten = text_field(record, "System_Requirement");
    ClassifiedRequirement {
        req_id: req.req_id.clone(),
        original_text: req.text.clone(),
        system_requirement: if rewritten.is_empty() { req.text.clone() } else { rewritten },
        function,
        rtype,
        confidence,
        function_explanation: text_field(record, "Function_Explanation"),
        type_explanation: text_field(record, "Type_Explanation"),
        flags,
        notes,
    }
}

/// Joins validated reply records to `reqs` by id.
///
/// Every input gets exactly one row; records with unknown or repeated ids
/// go to quarantine.
pub fn join_records(
    reqs: &[Requirement],
    records: Vec<(Option<usize>, Map<String, Value>)>,
    catalog: &FunctionCatalog,
) -> JoinOutcome {
    let known: HashSet<&str> = reqs.iter().map(|r| r.req_id.as_str()).collect();
    let mut by_id: HashMap<String, Map<String, Value>> = HashMap::new();
    let mut out = JoinOutcome::default();
    for (chunk, record) in records {
        let id = text_field(&record, "ReqID");
        let reason = if !known.contains(id.as_str()) {
            Some("ReqID matches no input requirement")
        } else if by_id.contains_key(&id) {
            Some("ReqID returned more than once")
        } else {
            None
        };
        match reason {
            Some(reason) => out.quarantine.push(QuarantinedRecord {
                chunk,
                req_id: Some(id),
                reason: reason.into(),
                record: Value::Object(record),
            }),
            None => {
                by_id.insert(id, record);
            }
        }
    }
    for req in reqs {
        let row = match by_id.get(&req.req_id) {
            Some(record) => classify_record(req, record, catalog),
            None => {
                out.diagnostics.push(format!("requirement {} not returned", req.req_id));
                ClassifiedRequirement::unreturned(req)
            }
        };
        out.rows.push(row);
    }
    out
}

/// Parses raw replies (one per chunk, in chunk order) and joins them to `reqs`.
pub fn join_replies(
    reqs: &[Requirement],
    replies: &[String],
    catalog: &FunctionCatalog,
) -> Result<JoinOutcome, ClassifyError> {
    let schema = record_schema();
    let mut records = Vec::new();
    let mut quarantine = Vec::new();
    let mut diagnostics = Vec::new();
    for (index, raw) in replies.iter().enumerate() {
        let parsed = parse_results_json(raw, &schema).map_err(|source| ClassifyError::Parse { index, source })?;
        diagnostics.extend(parsed.repairs.iter().map(|r| format!("chunk {index}: repaired reply JSON ({r})")));
        for v in parsed.violations {
            quarantine.push(QuarantinedRecord {
                chunk: Some(index),
                req_id: v.id,
                reason: v.reason,
                record: Value::Null,
            });
        }
        records.extend(parsed.records.into_iter().map(|r| (Some(index), r)));
    }
    let mut out = join_records(reqs, records, catalog);
    quarantine.append(&mut out.quarantine);
    out.quarantine = quarantine;
    diagnostics.append(&mut out.diagnostics);
    out.diagnostics = diagnostics;
    Ok(out)
}

/// Sends every chunk and joins the replies.
///
/// Returns the raw replies in chunk order alongside the joined table. Any
/// chunk failure aborts the whole call.
pub fn classify(
    chunks: &[RequirementChunk],
    catalog: &FunctionCatalog,
    gateway: &Gateway,
    prompt: &ClassificationPrompt,
) -> Result<(Vec<String>, JoinOutcome), ClassifyError> {
    let prompts: Vec<String> =
        chunks.iter().map(|c| build_classification_prompt(c, catalog, prompt).render()).collect();
    let mut replies = Vec::with_capacity(prompts.len());
    for (index, result) in gateway.send_batch(&prompts).into_iter().enumerate() {
        replies.push(result.map_err(|source| ClassifyError::Gateway { index, source })?.text);
    }
    let reqs: Vec<Requirement> = chunks.iter().flat_map(|c| c.items.iter().cloned()).collect();
    let joined = join_replies(&reqs, &replies, catalog)?;
    Ok((replies, joined))
}

/// Label agreement as a percentage rounded to two decimals.
///
/// With a `reference`, every (run, requirement) pair is compared with the
/// reference label and the matches are pooled. Without one, a requirement
/// counts when all runs agree on it. `strict` compares `(function, type)`
/// instead of the function alone.
pub fn consistency(
    runs: &[&[ClassifiedRequirement]],
    reference: Option<&[ClassifiedRequirement]>,
    strict: bool,
) -> Result<f64, ClassifyError> {
    match (runs.len(), reference) {
        (0, _) => return Err(ClassifyError::NotEnoughRuns("at least one run")),
        (1, None) => return Err(ClassifyError::NotEnoughRuns("two runs or a reference table")),
        _ => {}
    }
    let label = |r: &ClassifiedRequirement| (r.function.clone(), strict.then_some(r.rtype));
    let index = |t: &[ClassifiedRequirement]| -> HashMap<String, (String, Option<RequirementType>)> {
        t.iter().map(|r| (r.req_id.clone(), label(r))).collect()
    };
    let base = reference.unwrap_or(runs[0]);
    let base_idx = index(base);
    if base_idx.is_empty() {
        return Err(ClassifyError::EmptyTable);
    }
    let tables: Vec<_> = runs.iter().map(|t| index(t)).collect();
    for (i, t) in tables.iter().enumerate() {
        if t.len() != base_idx.len() || t.keys().any(|k| !base_idx.contains_key(k)) {
            let missing = base_idx.keys().filter(|k| !t.contains_key(*k)).count();
            let extra = t.keys().filter(|k| !base_idx.contains_key(*k)).count();
            return Err(ClassifyError::MismatchedIdSets(format!(
                "run {i} lacks {missing} and adds {extra} id(s) relative to the {}",
                if reference.is_some() { "reference" } else { "first run" }
            )));
        }
    }
    let (hits, total) = match reference {
        Some(_) => {
            let hits = tables.iter().flat_map(|t| t.iter().filter(|(id, l)| base_idx[*id] == **l)).count();
            (hits, tables.len() * base_idx.len())
        }
        None => {
            let hits = base_idx.iter().filter(|(id, l)| tables.iter().all(|t| t[*id] == **l)).count();
            (hits, base_idx.len())
        }
    };
    Ok(round2(100.0 * hits as f64 / total as f64))
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub const TABLE_HEADER: [&str; 10] = [
    "ReqID",
    "Function",
    "Type",
    "Confidence",
    "System Requirement",
    "Original Requirement",
    "Function Explanation",
    "Type Explanation",
    "Flags",
    "Notes",
];

/// Writes the joined table as CSV.
pub fn write_table_csv(rows: &[ClassifiedRequirement], out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        let flags = r.flags.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>().join(";");
        w.write_record([
            r.req_id.as_str(),
            &r.function,
            r.rtype.as_str(),
            &r.confidence.to_string(),
            &r.system_requirement,
            &r.original_text,
            &r.function_explanation,
            &r.type_explanation,
            &flags,
            &r.notes.join("; "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table_csv`].
pub fn read_table_csv(input: impl std::io::Read) -> Result<Vec<ClassifiedRequirement>, ClassifyError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| ClassifyError::Table(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != TABLE_HEADER {
        return Err(ClassifyError::Table(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ClassifyError::Table(e.to_string()))?;
        let f = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let bad = |what: String| ClassifyError::Table(format!("row {}: {what}", f(0)));
        let flags = f(8)
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Flag>().map_err(bad))
            .collect::<Result<_, _>>()?;
        rows.push(ClassifiedRequirement {
            req_id: f(0),
            function: f(1),
            rtype: f(2).parse().map_err(bad)?,
            confidence: f(3).parse().map_err(|e| bad(format!("confidence: {e}")))?,
            system_requirement: f(4),
            original_text: f(5),
            function_explanation: f(6),
            type_explanation: f(7),
            flags,
            notes: f(9).split("; ").filter(|s| !s.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

/// Reads reference labels from a CSV with `ReqID` and `Function` columns and
/// an optional `Type` column (header names match case-insensitively).
///
/// Returns the rows and whether types were present.
pub fn read_reference_csv(input: impl std::io::Read) -> Result<(Vec<ClassifiedRequirement>, bool), ClassifyError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| ClassifyError::Table(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(id), Some(func)) = (col("ReqID"), col("Function")) else {
        return Err(ClassifyError::Table("reference table needs ReqID and Function columns".into()));
    };
    let ty = col("Type");
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ClassifyError::Table(e.to_string()))?;
        let get = |i: usize| rec.get(i).unwrap_or_default().trim().to_string();
        let mut row = ClassifiedRequirement::unreturned(&Requirement::new(get(id), ""));
        row.function = get(func);
        row.flags.clear();
        if let Some(t) = ty {
            row.rtype = get(t).parse().map_err(|e| ClassifyError::Table(format!("row {}: {e}", get(id))))?;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ClassifyError::EmptyTable);
    }
    Ok((rows, ty.is_some()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::CatalogEntry;
    use proptest::prelude::*;

    fn catalog() -> FunctionCatalog {
        let e = |a: &str, l: &str| CatalogEntry { alias: a.into(), lineage: l.into(), primary_system: "Drone".into() };
        FunctionCatalog::new(vec![e("NAV", "Drone/Navigating"), e("EN", "Drone/Power Generating")]).unwrap()
    }

    fn reqs(ids: &[&str]) -> Vec<Requirement> {
        ids.iter().map(|i| Requirement::new(*i, format!("text {i}"))).collect()
    }

    fn rec(v: Value) -> (Option<usize>, Map<String, Value>) {
        (Some(0), v.as_object().unwrap().clone())
    }

    fn row(id: &str, f: &str, t: RequirementType) -> ClassifiedRequirement {
        let mut r = ClassifiedRequirement::unreturned(&Requirement::new(id, "x"));
        r.function = f.into();
        r.rtype = t;
        r
    }

    #[test]
    fn type_parsing() {
        assert_eq!("FUNC".parse(), Ok(RequirementType::Func));
        assert_eq!(" _OT_ ".parse(), Ok(RequirementType::Other));
        assert_eq!("Probabilistic".parse(), Ok(RequirementType::Prob));
        assert!("maybe".parse::<RequirementType>().is_err());
    }

    #[test]
    fn join_remaps_flags_and_quarantines() {
        let records = vec![
            rec(json!({"ReqID": "1", "Function": "XYZ", "Type": "FUNC", "Confidence": 95})),
            rec(json!({"ReqID": "2", "Function": "EN", "Type": "weird", "Confidence": 70})),
            rec(json!({"ReqID": "2", "Function": "NAV", "Type": "FUNC", "Confidence": 99})),
            rec(json!({"ReqID": "99", "Function": "NAV", "Type": "FUNC", "Confidence": 99})),
        ];
        let out = join_records(&reqs(&["1", "2", "3"]), records, &catalog());
        assert_eq!(out.rows.iter().map(|r| r.req_id.as_str()).collect::<Vec<_>>(), ["1", "2", "3"]);
        assert_eq!(out.rows[0].function, "_OF_");
        assert!(out.rows[0].has(Flag::RemappedToOF));
        assert_eq!((out.rows[1].function.as_str(), out.rows[1].rtype), ("EN", RequirementType::Other));
        assert!(out.rows[1].has(Flag::LowConfidence));
        assert!(out.rows[2].has(Flag::Unreturned));
        assert_eq!((out.rows[2].function.as_str(), out.rows[2].rtype), ("_OF_", RequirementType::Other));
        let q: Vec<_> = out.quarantine.iter().map(|q| q.req_id.clone().unwrap()).collect();
        assert_eq!(q, ["2", "99"]);
    }

    #[test]
    fn prompt_lists_every_alias_and_row() {
        let chunk = RequirementChunk { index: 0, items: reqs(&["1000"]) };
        let p = build_classification_prompt(&chunk, &catalog(), &ClassificationPrompt::new("Drone Safety Requirements"))
            .render();
        for alias in ["\"NAV\"", "\"EN\"", "\"_OF_\"", "\"FUNC\"", "\"PROB\"", "\"_OT_\""] {
            assert!(p.contains(alias), "{alias}");
        }
        assert!(p.contains("under the tag Drone Safety Requirements"));
        assert!(p.contains("ReqID 1000: text 1000"));
        assert!(p.contains("Classify each one of the requirements as Functional (FUNC) or Probabilistic (PROB)"));
    }

    #[test]
    fn reference_reader() {
        let (rows, typed) = read_reference_csv("reqid,FUNCTION,Type\n1,NAV,FUNC\n2,EN,PROB\n".as_bytes()).unwrap();
        assert!(typed);
        assert_eq!((rows[1].function.as_str(), rows[1].rtype), ("EN", RequirementType::Prob));
        let (_, typed) = read_reference_csv("ReqID,Function\n1,NAV\n".as_bytes()).unwrap();
        assert!(!typed);
        assert!(read_reference_csv("ReqID\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn consistency_cases() {
        use RequirementType::Func;
        let a = vec![row("1", "NAV", Func), row("2", "EN", Func)];
        assert_eq!(consistency(&[&a, &a], None, false).unwrap(), 100.0);
        let b = vec![row("1", "NAV", Func), row("2", "NAV", Func)];
        assert_eq!(consistency(&[&a, &b], None, false).unwrap(), 50.0);
        assert_eq!(consistency(&[&b], Some(&a), false).unwrap(), 50.0);
        let c = vec![row("3", "NAV", Func)];
        assert!(matches!(consistency(&[&a, &c], None, false), Err(ClassifyError::MismatchedIdSets(_))));
        assert!(matches!(consistency(&[&a], None, false), Err(ClassifyError::NotEnoughRuns(_))));
        let strict = vec![row("1", "NAV", RequirementType::Prob), row("2", "EN", Func)];
        assert_eq!(consistency(&[&a, &strict], None, false).unwrap(), 100.0);
        assert_eq!(consistency(&[&a, &strict], None, true).unwrap(), 50.0);
    }

    #[test]
    fn table_csv_round_trip() {
        let mut r = row("1", "NAV", RequirementType::Prob);
        r.system_requirement = "The drone shall, \"quoted\"\nnewline".into();
        r.notes.push("second note".into());
        let rows = vec![r, row("2", "_OF_", RequirementType::Other)];
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_table_csv(buf.as_slice()).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn consistency_bounds(labels in proptest::collection::vec((0usize..3, 0usize..3), 1..40)) {
            let fns = ["NAV", "EN", "_OF_"];
            let a: Vec<_> = labels.iter().enumerate().map(|(i, (x, _))| row(&i.to_string(), fns[*x], RequirementType::Func)).collect();
            let b: Vec<_> = labels.iter().enumerate().map(|(i, (_, y))| row(&i.to_string(), fns[*y], RequirementType::Func)).collect();
            let c = consistency(&[&a, &b], None, false).unwrap();
            prop_assert!((0.0..=100.0).contains(&c));
            prop_assert_eq!(consistency(&[&a, &a], None, false).unwrap(), 100.0);
        }

        #[test]
        fn join_is_total_and_order_independent(n in 1usize..30, seed in any::<u64>()) {
            let ids: Vec<String> = (0..n).map(|i| format!("R{i}")).collect();
            let input: Vec<Requirement> = ids.iter().map(|i| Requirement::new(i.clone(), "t")).collect();
            let mut records: Vec<_> = ids.iter().enumerate().filter(|(i, _)| (seed >> (i % 64)) & 1 == 1)
                .map(|(_, id)| rec(json!({"ReqID": id, "Function": "NAV", "Type": "FUNC", "Confidence": 90})))
                .collect();
            let forward = join_records(&input, records.clone(), &catalog());
            records.reverse();
            let backward = join_records(&input, records, &catalog());
            prop_assert_eq!(&forward.rows, &backward.rows);
            prop_assert_eq!(forward.rows.len(), n);
            prop_assert!(forward.rows.iter().all(|r| catalog().contains(&r.function)));
        }
    }
}
