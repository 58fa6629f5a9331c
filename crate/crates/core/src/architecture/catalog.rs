use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ArchitectureError, ArchitectureGraph, RelationKind};
use crate::{WithWarnings, OTHER_FUNCTION, OTHER_FUNCTION_NAME};

/// Root name used for the catch-all entry when a catalog has no system at all.
const FALLBACK_SYSTEM: &str = "System";
const MAX_SEGMENTS: usize = 3;

/// One addressable function: `alias -> System/Subsystem/Function`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub alias: String,
    pub lineage: String,
    pub primary_system: String,
}

impl CatalogEntry {
    pub fn catch_all(primary_system: impl Into<String>) -> Self {
        Self {
            alias: OTHER_FUNCTION.to_string(),
            lineage: OTHER_FUNCTION_NAME.to_string(),
            primary_system: primary_system.into(),
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.lineage.split('/')
    }

    /// Last lineage segment.
    pub fn function_name(&self) -> &str {
        self.lineage.rsplit('/').next().unwrap_or(&self.lineage)
    }

    pub fn is_catch_all(&self) -> bool {
        self.alias == OTHER_FUNCTION
    }
}

/// The set of functions requirements can be allocated to.
///
/// Aliases are unique and exactly one entry is the `_OF_` catch-all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionCatalog {
    entries: Vec<CatalogEntry>,
}

impl FunctionCatalog {
    /// Validates `entries`, appending the catch-all if it is absent.
    pub fn new(mut entries: Vec<CatalogEntry>) -> Result<Self, ArchitectureError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.alias.trim().is_empty() {
                return Err(ArchitectureError::SchemaViolation(format!("empty alias for `{}`", e.lineage)));
            }
            if !seen.insert(e.alias.as_str()) {
                return Err(ArchitectureError::SchemaViolation(format!("duplicate alias `{}`", e.alias)));
            }
            let n = e.segments().count();
            if n > MAX_SEGMENTS || e.segments().any(|s| s.trim().is_empty()) {
                return Err(ArchitectureError::SchemaViolation(format!(
                    "lineage `{}` of `{}` must have 1 to {MAX_SEGMENTS} non-empty segments",
                    e.lineage, e.alias
                )));
            }
        }
        if !seen.contains(OTHER_FUNCTION) {
            let root = entries.first().map(|e| e.primary_system.clone()).unwrap_or_else(|| FALLBACK_SYSTEM.into());
            let pos = entries.iter().rposition(|e| e.primary_system == root).map_or(entries.len(), |p| p + 1);
            entries.insert(pos, CatalogEntry::catch_all(root));
        }
        Ok(Self { entries })
    }

    /// A catalog holding only the catch-all.
    pub fn catch_all_only(primary_system: &str) -> Self {
        Self { entries: vec![CatalogEntry::catch_all(primary_system)] }
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.alias.as_str())
    }

    pub fn get(&self, alias: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.alias == alias)
    }

    pub fn contains(&self, alias: &str) -> bool {
        self.get(alias).is_some()
    }

    pub fn contains_catch_all(&self) -> bool {
        self.contains(OTHER_FUNCTION)
    }

    /// Position of `alias` in catalog order.
    pub fn position(&self, alias: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.alias == alias)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Primary systems in first-appearance order.
    pub fn primary_systems(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.primary_system.as_str()) {
                out.push(&e.primary_system);
            }
        }
        out
    }

    /// Serializes to `{ "<system>": { "<alias>": "<lineage>", ... }, ... }`.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for system in self.primary_systems() {
            let group: Map<String, Value> = self
                .entries
                .iter()
                .filter(|e| e.primary_system == system)
                .map(|e| (e.alias.clone(), Value::String(e.lineage.clone())))
                .collect();
            root.insert(system.to_string(), Value::Object(group));
        }
        Value::Object(root)
    }

    /// Reads the per-system map produced by [`FunctionCatalog::to_json`] or returned by a model.
    ///
    /// Lineage whitespace is collapsed. Lineages with fewer than three segments
    /// that do not start with their system name get it prefixed, so
    /// `"Operator": {"CTRL": "Controlling"}` becomes `Operator/Controlling`.
    pub fn from_json(value: &Value) -> Result<WithWarnings<Self>, ArchitectureError> {
        let systems = value
            .as_object()
            .ok_or_else(|| ArchitectureError::SchemaViolation("catalog must be an object of systems".into()))?;
        let mut entries = Vec::new();
        for (system, group) in systems {
            let group = group.as_object().ok_or_else(|| {
                ArchitectureError::SchemaViolation(format!("system `{system}` must map aliases to lineages"))
            })?;
            for (alias, lineage) in group {
                let lineage = lineage.as_str().ok_or_else(|| {
                    ArchitectureError::SchemaViolation(format!("lineage of `{alias}` must be a string"))
                })?;
                entries.push(CatalogEntry {
                    alias: alias.trim().to_string(),
                    lineage: normalize_lineage(system, alias, lineage)?,
                    primary_system: system.clone(),
                });
            }
        }
        let mut warnings = Vec::new();
        if !entries.iter().any(CatalogEntry::is_catch_all) {
            warnings.push(format!("catalog had no `{OTHER_FUNCTION}` entry; catch-all injected"));
        }
        Ok(WithWarnings::new(Self::new(entries)?, warnings))
    }
}

impl<'de> Deserialize<'de> for FunctionCatalog {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        Self::from_json(&value).map(WithWarnings::into_value).map_err(serde::de::Error::custom)
    }
}

fn normalize_lineage(system: &str, alias: &str, raw: &str) -> Result<String, ArchitectureError> {
    let segments: Vec<String> =
        raw.split('/').map(|s| s.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
    if segments.iter().any(String::is_empty) {
        return Err(ArchitectureError::SchemaViolation(format!("lineage `{raw}` of `{alias}` has an empty segment")));
    }
    if segments.len() > MAX_SEGMENTS {
        return Err(ArchitectureError::SchemaViolation(format!(
            "lineage `{raw}` of `{alias}` has {} segments (at most {MAX_SEGMENTS})",
            segments.len()
        )));
    }
    let joined = segments.join("/");
    if alias == OTHER_FUNCTION || segments[0] == system || segments.len() == MAX_SEGMENTS {
        Ok(joined)
    } else {
        Ok(format!("{system}/{joined}"))
    }
}

/// Uppercase initials of the alphanumeric words of `name`: `Power Generating` -> `PG`.
pub fn derive_alias(name: &str) -> String {
    let initials: String = name
        .split(|c: char| !c.is_alphanumeric())
        .filter_map(|w| w.chars().next())
        .flat_map(char::to_uppercase)
        .collect();
    if initials.is_empty() {
        "F".to_string()
    } else {
        initials
    }
}

#[derive(Debug, Clone, Copy)]
enum Owner<'g> {
    Object(&'g str),
    Process(&'g str),
}

struct Walker<'g> {
    graph: &'g ArchitectureGraph,
    memo: HashMap<&'g str, Option<Vec<&'g str>>>,
}

impl<'g> Walker<'g> {
    fn is_object(&self, n: &str) -> bool {
        self.graph.thing(n).is_some_and(|t| t.is_object())
    }

    fn is_process(&self, n: &str) -> bool {
        self.graph.thing(n).is_some_and(|t| t.is_process())
    }

    /// First source of an exhibition/aggregation onto `child` that satisfies `want`.
    fn structural_parent(&self, child: &str, want: impl Fn(&str) -> bool) -> Option<&'g str> {
        self.graph
            .relations()
            .iter()
            .filter(|r| r.kind.is_structural() && want(&r.source))
            .find(|r| r.targets.iter().any(|t| t == child))
            .map(|r| r.source.as_str())
    }

    fn object_parent(&self, child: &str) -> Option<&'g str> {
        self.structural_parent(child, |n| self.is_object(n))
    }

    fn root_of(&self, mut obj: &'g str) -> &'g str {
        while let Some(parent) = self.object_parent(obj) {
            obj = parent;
        }
        obj
    }

    fn owner_of(&self, p: &str) -> Option<Owner<'g>> {
        if let Some(o) = self.object_parent(p) {
            return Some(Owner::Object(o));
        }
        if let Some(q) = self.structural_parent(p, |n| self.is_process(n)) {
            return Some(Owner::Process(q));
        }
        self.graph
            .relations()
            .iter()
            .filter(|r| r.kind == RelationKind::Handles && self.is_object(&r.source))
            .find(|r| r.targets.iter().any(|t| t == p))
            .map(|r| Owner::Object(r.source.as_str()))
    }

    /// Lineage segments of process `p`; `None` when it has no owner.
    fn lineage(&mut self, p: &'g str) -> Option<Vec<&'g str>> {
        if let Some(hit) = self.memo.get(p) {
            return hit.clone();
        }
        let result = match self.owner_of(p) {
            Some(Owner::Object(o)) => {
                let root = self.root_of(o);
                Some(if root == o { vec![root, p] } else { vec![root, o, p] })
            }
            Some(Owner::Process(q)) => self.lineage(q).map(|lq| vec![lq[0], q, p]),
            None => None,
        };
        self.memo.insert(p, result.clone());
        result
    }
}

/// Derives the function catalog from a linked graph.
///
/// * Flow objects (objects that appear only as `requires`/`yields` endpoints)
///   are never systems.
/// * Primary systems are the remaining objects with no structural parent
///   object.
/// * A process is a function of the object that exhibits (or aggregates) it;
///   failing that, of the owner of the process it is part of; failing that,
///   of the object that handles it. Unowned processes are skipped with a
///   warning.
/// * Lineage is `Primary/Owner/Function`, or `Primary/Function` when the owner
///   is the primary system itself.
/// * Aliases come from `alias_hints`, then the model, then [`derive_alias`],
///   with numeric suffixes on collision.
pub fn extract_catalog(
    graph: &ArchitectureGraph,
    alias_hints: Option<&HashMap<String, String>>,
) -> Result<WithWarnings<FunctionCatalog>, ArchitectureError> {
    let mut warnings = Vec::new();
    let mut walker = Walker { graph, memo: HashMap::new() };

    let mut flow_only: HashMap<&str, bool> = HashMap::new();
    for rel in graph.relations() {
        for name in std::iter::once(rel.source.as_str()).chain(rel.targets.iter().map(String::as_str)) {
            let entry = flow_only.entry(name).or_insert(true);
            *entry &= rel.kind.is_flow();
        }
    }

    let primaries: Vec<&str> = graph
        .objects()
        .map(|t| t.name.as_str())
        .filter(|n| !flow_only.get(n).copied().unwrap_or(false) && walker.object_parent(n).is_none())
        .collect();
    if primaries.is_empty() {
        return Err(ArchitectureError::NoPrimarySystem);
    }

    let mut functions: Vec<(&str, Vec<&str>)> = Vec::new();
    for process in graph.processes() {
        match walker.lineage(&process.name) {
            Some(l) => functions.push((process.name.as_str(), l)),
            None => warnings.push(format!("process `{}` has no owning object; not a catalog function", process.name)),
        }
    }

    let mut used: HashSet<String> = HashSet::from([OTHER_FUNCTION.to_string()]);
    let mut entries = Vec::new();
    let catch_all_root =
        primaries.iter().copied().find(|p| functions.iter().any(|(_, l)| l[0] == *p)).unwrap_or(primaries[0]);
    for &primary in &primaries {
        for (name, segments) in functions.iter().filter(|(_, l)| l[0] == primary) {
            let base = alias_hints
                .and_then(|h| h.get(*name).cloned())
                .or_else(|| graph.thing(name).and_then(|t| t.alias.clone()))
                .unwrap_or_else(|| derive_alias(name));
            let mut alias = base.clone();
            let mut n = 2;
            while used.contains(&alias) {
                alias = format!("{base}{n}");
                n += 1;
            }
            used.insert(alias.clone());
            let lineage: Vec<String> = segments
                .iter()
                .map(|s| {
                    if s.contains('/') {
                        warnings.push(format!("`/` in `{s}` replaced by `-` in lineage"));
                    }
                    s.replace('/', "-")
                })
                .collect();
            entries.push(CatalogEntry { alias, lineage: lineage.join("/"), primary_system: primary.to_string() });
        }
        if primary == catch_all_root {
            entries.push(CatalogEntry::catch_all(primary));
        }
    }
    if functions.is_empty() {
        warnings.push("model has no owned processes; catalog holds only the catch-all".to_string());
    }
    Ok(WithWarnings::new(FunctionCatalog::new(entries)?, warnings))
}
