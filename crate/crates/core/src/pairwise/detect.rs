use std::collections::{BTreeMap, HashMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::prompts::{build_pair_prompt, PairTask, PromptVersion};
use super::{canonical_pair, PairFinding, PairKind, PairwiseError};
use crate::architecture::FunctionCatalog;
use crate::classify::ClassifiedRequirement;
use crate::gateway::{parse_results_json, FieldKind, FieldSpec, Gateway, RecordSchema};
use crate::OTHER_FUNCTION;

/// Function alias -> its requirements, in catalog order.
pub type Clusters = IndexMap<String, Vec<ClassifiedRequirement>>;

/// Groups requirements by function. Clusters follow catalog order (aliases
/// unknown to the catalog go last, in first-seen order); members keep input
/// order. Empty clusters are omitted.
pub fn cluster_by_function(classified: &[ClassifiedRequirement], catalog: &FunctionCatalog) -> Clusters {
    let mut clusters: Clusters = IndexMap::new();
    for alias in catalog.aliases() {
        let members: Vec<_> = classified.iter().filter(|r| r.function == alias).cloned().collect();
        if !members.is_empty() {
            clusters.insert(alias.to_string(), members);
        }
    }
    for r in classified.iter().filter(|r| !catalog.contains(&r.function)) {
        clusters.entry(r.function.clone()).or_default().push(r.clone());
    }
    clusters
}

pub fn pair_record_schema() -> RecordSchema {
    RecordSchema::new(
        None,
        vec![
            FieldSpec::required("ReqID_A", FieldKind::String),
            FieldSpec::required("ReqID_B", FieldKind::String),
            FieldSpec::optional("Relation", FieldKind::String),
            FieldSpec::optional("Rationale", FieldKind::String),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantinedPair {
    pub cluster: String,
    pub reason: String,
    pub record: Value,
}

/// Findings of one analysis pass plus everything rejected along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairAnalysis {
    /// Canonical, deduplicated, sorted by `(req_a, req_b)`.
    pub findings: Vec<PairFinding>,
    pub quarantine: Vec<QuarantinedPair>,
    pub notes: Vec<String>,
}

impl PairAnalysis {
    pub fn of_kind(&self, kind: PairKind) -> impl Iterator<Item = &PairFinding> {
        self.findings.iter().filter(move |f| f.kind == kind)
    }
}

/// One cluster prompt and the requirements it carries.
#[derive(Debug, Clone)]
pub struct PairCall {
    pub cluster: String,
    pub members: Vec<ClassifiedRequirement>,
    pub prompt: String,
}

/// Prompts for one pairwise pass, ready to send; [`PairPlan::interpret`]
/// turns the replies into findings.
#[derive(Debug, Clone)]
pub struct PairPlan {
    pub task: PairTask,
    pub calls: Vec<PairCall>,
    /// Pairs already judged by an earlier pass.
    forbidden: HashMap<(String, String), PairKind>,
    notes: Vec<String>,
}

fn text(record: &Map<String, Value>, key: &str) -> String {
    record.get(key).and_then(Value::as_str).map(str::trim).unwrap_or_default().to_string()
}

impl PairPlan {
    fn new(task: PairTask, calls: Vec<(String, Vec<&ClassifiedRequirement>)>) -> Self {
        let calls = calls
            .into_iter()
            .map(|(cluster, members)| PairCall {
                prompt: build_pair_prompt(task, &cluster, &members).render(),
                members: members.into_iter().cloned().collect(),
                cluster,
            })
            .collect();
        Self { task, calls, forbidden: HashMap::new(), notes: Vec::new() }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.calls.iter().map(|c| c.prompt.clone()).collect()
    }

    /// Validates replies (one per call, in call order) into findings.
    pub fn interpret(&self, replies: &[String]) -> Result<PairAnalysis, PairwiseError> {
        let schema = pair_record_schema();
        let mut out = PairAnalysis { notes: self.notes.clone(), ..PairAnalysis::default() };
        let mut found: BTreeMap<(String, String), PairFinding> = BTreeMap::new();
        let default_kind = match self.task {
            PairTask::Duplicates(_) => PairKind::Duplicate,
            PairTask::Contradictions => PairKind::Contradiction,
        };
        if replies.len() != self.calls.len() {
            return Err(PairwiseError::ReplyCount { replies: replies.len(), calls: self.calls.len() });
        }

        for (call, reply) in self.calls.iter().zip(replies) {
            let cluster = call.cluster.clone();
            let parsed = parse_results_json(reply, &schema)
                .map_err(|source| PairwiseError::Parse { cluster: cluster.clone(), source })?;
            out.notes.extend(parsed.repairs.iter().map(|r| format!("cluster {cluster}: repaired reply JSON ({r})")));
            for v in parsed.violations {
                out.quarantine.push(QuarantinedPair { cluster: cluster.clone(), reason: v.reason, record: Value::Null });
            }
            let members: HashMap<&str, &ClassifiedRequirement> =
                call.members.iter().map(|r| (r.req_id.as_str(), r)).collect();
            for record in parsed.records {
                let mut reject = |reason: String, record: Map<String, Value>| {
                    out.quarantine.push(QuarantinedPair { cluster: cluster.clone(), reason, record: Value::Object(record) })
                };
                let (a, b) = (text(&record, "ReqID_A"), text(&record, "ReqID_B"));
                let Some(pair) = canonical_pair(&a, &b) else {
                    reject(format!("self-pair ({a}, {b})"), record);
                    continue;
                };
                let relation = text(&record, "Relation");
                let kind = if relation.is_empty() {
                    default_kind
                } else {
                    match relation.parse::<PairKind>() {
                        Ok(k) if k.is_duplicate_family() == default_kind.is_duplicate_family() => k,
                        Ok(k) => {
                            reject(format!("relation {k} not asked for by this prompt"), record);
                            continue;
                        }
                        Err(e) => {
                            reject(e, record);
                            continue;
                        }
                    }
                };
                if let Some(&first) = self.forbidden.get(&pair) {
                    return Err(PairwiseError::ConflictingKinds { a: pair.0, b: pair.1, first, second: kind });
                }
                let (Some(ra), Some(rb)) = (members.get(pair.0.as_str()), members.get(pair.1.as_str())) else {
                    reject(format!("pair ({}, {}) names a requirement not sent in this call", pair.0, pair.1), record);
                    continue;
                };
                let mut finding = PairFinding {
                    kind,
                    req_a: pair.0.clone(),
                    req_b: pair.1.clone(),
                    function_a: ra.function.clone(),
                    function_b: rb.function.clone(),
                    rationale: text(&record, "Rationale"),
                    source_chunk: cluster.clone(),
                    notes: Vec::new(),
                };
                let crosses = finding.function_a != finding.function_b
                    && finding.function_a != OTHER_FUNCTION
                    && finding.function_b != OTHER_FUNCTION;
                if kind == PairKind::Duplicate
                    && crosses
                    && matches!(self.task, PairTask::Duplicates(v) if v != PromptVersion::V1)
                {
                    finding.kind = PairKind::Complementary;
                    finding.notes.push(format!(
                        "duplicate across {} and {} downgraded to complementary",
                        finding.function_a, finding.function_b
                    ));
                }
                match found.get(&pair) {
                    Some(prev) if prev.kind != finding.kind => {
                        out.notes.push(format!(
                            "pair ({}, {}) also reported as {} by cluster {}; kept {}",
                            pair.0, pair.1, finding.kind, cluster, prev.kind
                        ));
                    }
                    Some(_) => {}
                    None => {
                        found.insert(pair, finding);
                    }
                }
            }
        }
        out.findings = found.into_values().collect();
        Ok(out)
    }

    /// Sends every call through `gateway` and interprets the replies.
    pub fn execute(&self, gateway: &Gateway) -> Result<PairAnalysis, PairwiseError> {
        let mut replies = Vec::with_capacity(self.calls.len());
        for (call, reply) in self.calls.iter().zip(gateway.send_batch(&self.prompts())) {
            replies.push(reply.map_err(|source| PairwiseError::Gateway { cluster: call.cluster.clone(), source })?.text);
        }
        self.interpret(&replies)
    }
}

/// Duplicate prompts, one per function cluster.
///
/// Clusters with fewer than two requirements make no call. Under
/// [`PromptVersion::V3`] the `_OF_` cluster is appended to every other
/// cluster instead of being sent on its own (unless it is the only one).
pub fn plan_duplicates(clusters: &Clusters, version: PromptVersion) -> PairPlan {
    let other = clusters.get(OTHER_FUNCTION);
    let co_submit = version == PromptVersion::V3 && other.is_some() && clusters.len() > 1;
    let mut calls = Vec::new();
    for (alias, members) in clusters {
        if co_submit && alias == OTHER_FUNCTION {
            continue;
        }
        let mut sent: Vec<&ClassifiedRequirement> = members.iter().collect();
        if co_submit {
            sent.extend(other.into_iter().flatten());
        }
        if sent.len() >= 2 {
            calls.push((alias.clone(), sent));
        }
    }
    PairPlan::new(PairTask::Duplicates(version), calls)
}

pub fn detect_duplicates(
    clusters: &Clusters,
    gateway: &Gateway,
    version: PromptVersion,
) -> Result<PairAnalysis, PairwiseError> {
    plan_duplicates(clusters, version).execute(gateway)
}

/// Duplicate groups and the requirement kept for each.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consolidated {
    /// Each group lists its representative first, then the other members sorted.
    pub groups: Vec<Vec<String>>,
    /// Requirements dropped because another member of their group represents it.
    pub removed: Vec<String>,
}

impl Consolidated {
    pub fn representative_of<'a>(&'a self, id: &'a str) -> &'a str {
        self.groups.iter().find(|g| g.iter().any(|m| m == id)).map_or(id, |g| g[0].as_str())
    }
}

/// Union-find over `Duplicate` findings; the smallest id represents its group.
pub fn consolidate(duplicates: &[PairFinding]) -> Consolidated {
    fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
        let p = parent.get(x).cloned().unwrap_or_else(|| x.to_string());
        if p == x {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(x.to_string(), root.clone());
        root
    }
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    for f in duplicates.iter().filter(|f| f.kind == PairKind::Duplicate) {
        for id in [&f.req_a, &f.req_b] {
            parent.entry(id.clone()).or_insert_with(|| id.clone());
        }
        let (ra, rb) = (find(&mut parent, &f.req_a), find(&mut parent, &f.req_b));
        if ra != rb {
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent.insert(drop, keep);
        }
    }
    let ids: Vec<String> = parent.keys().cloned().collect();
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in ids {
        let root = find(&mut parent, &id);
        groups.entry(root).or_default().push(id);
    }
    let mut out = Consolidated::default();
    for (root, mut members) in groups {
        members.retain(|m| *m != root);
        out.removed.extend(members.iter().cloned());
        members.insert(0, root);
        out.groups.push(members);
    }
    out.removed.sort();
    out
}

/// Contradiction prompts, one per function cluster, after removing all
/// but one member of every duplicate group.
///
/// A contradiction reported on a pair already judged by the duplicate pass
/// is an error: the kinds are mutually exclusive.
pub fn plan_contradictions(clusters: &Clusters, duplicates: &[PairFinding]) -> PairPlan {
    let merged = consolidate(duplicates);
    let removed: HashSet<&str> = merged.removed.iter().map(String::as_str).collect();
    let calls = clusters
        .iter()
        .map(|(alias, members)| {
            (alias.clone(), members.iter().filter(|r| !removed.contains(r.req_id.as_str())).collect::<Vec<_>>())
        })
        .filter(|(_, m)| m.len() >= 2)
        .collect();
    let mut plan = PairPlan::new(PairTask::Contradictions, calls);
    plan.forbidden = duplicates.iter().map(|f| (f.pair(), f.kind)).collect();
    if !merged.removed.is_empty() {
        plan.notes.push(format!("{} duplicate(s) withheld: {}", merged.removed.len(), merged.removed.join(", ")));
    }
    plan
}

pub fn detect_contradictions(
    clusters: &Clusters,
    gateway: &Gateway,
    duplicates: &[PairFinding],
) -> Result<PairAnalysis, PairwiseError> {
    plan_contradictions(clusters, duplicates).execute(gateway)
}

/// Fails if any pair appears with two different kinds across `findings`.
pub fn validate_exclusive<'a>(findings: impl IntoIterator<Item = &'a PairFinding>) -> Result<(), PairwiseError> {
    let mut seen: HashMap<(String, String), PairKind> = HashMap::new();
    for f in findings {
        match seen.get(&f.pair()) {
            Some(&first) if first != f.kind => {
                return Err(PairwiseError::ConflictingKinds {
                    a: f.req_a.clone(),
                    b: f.req_b.clone(),
                    first,
                    second: f.kind,
                });
            }
            _ => {
                seen.insert(f.pair(), f.kind);
            }
        }
    }
    Ok(())
}
