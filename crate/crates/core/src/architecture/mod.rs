//! Architecture model ingestion.
//!
//! Two textual encodings of the system architecture are supported: OPL
//! sentences ([`parse_opl`]) and a simplified SysML XMI block definition
//! diagram ([`parse_xmi_bdd`]). Both produce an [`ArchitectureGraph`], from
//! which [`extract_catalog`] derives the [`FunctionCatalog`] deterministically.
//! [`extract_catalog_llm`] derives the same catalog by prompting a model.

mod catalog;
mod llm;
mod opl;
mod xmi;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;

pub use catalog::{derive_alias, extract_catalog, CatalogEntry, FunctionCatalog};
pub use llm::{extract_catalog_llm, function_identification_envelope, parse_catalog_reply, FUNCTION_IDENTIFICATION_INSTRUCTIONS};
pub use opl::parse_opl;
pub use xmi::parse_xmi_bdd;

#[derive(Debug, Error)]
pub enum ArchitectureError {
    #[error("model declares no things")]
    EmptyModel,
    #[error("unresolved name `{name}` in: {context}")]
    UnresolvedName { name: String, context: String },
    #[error("thing `{0}` declared twice with conflicting kinds")]
    ConflictingDeclaration(String),
    #[error("invalid relation: {0}")]
    InvalidRelation(String),
    #[error("structural cycle through {}", .0.join(" -> "))]
    CyclicStructure(Vec<String>),
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("no primary system found (empty or cyclic containment)")]
    NoPrimarySystem,
    #[error("catalog schema violation: {0}")]
    SchemaViolation(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThingKind {
    Object,
    Process,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Essence {
    Informatical,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Affiliation {
    Systemic,
    Environmental,
}

/// An OPM thing: an object or a process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OplThing {
    pub name: String,
    pub kind: ThingKind,
    pub essence: Essence,
    pub affiliation: Affiliation,
    /// Owner phrase from a `X of Y` declaration.
    pub qualifier: Option<String>,
    /// Model-supplied alias, if any.
    pub alias: Option<String>,
    /// Declared states, in declaration order.
    pub states: Vec<String>,
}

impl OplThing {
    pub fn new(name: impl Into<String>, kind: ThingKind) -> Self {
        Self {
            name: name.into(),
            kind,
            essence: Essence::Informatical,
            affiliation: Affiliation::Systemic,
            qualifier: None,
            alias: None,
            states: Vec::new(),
        }
    }

    pub fn is_object(&self) -> bool {
        self.kind == ThingKind::Object
    }

    pub fn is_process(&self) -> bool {
        self.kind == ThingKind::Process
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    Exhibition,
    Aggregation,
    Specialization,
    Instantiation,
    Requires,
    Yields,
    Handles,
    StateChange,
}

impl RelationKind {
    /// Whether the relation contributes to the containment hierarchy.
    pub fn is_structural(self) -> bool {
        matches!(self, RelationKind::Exhibition | RelationKind::Aggregation)
    }

    pub fn is_flow(self) -> bool {
        matches!(self, RelationKind::Requires | RelationKind::Yields)
    }
}

/// A directed relation from `source` to each of `targets`.
///
/// Direction conventions: exhibitor/whole/general/class/agent/process is the
/// source; the exhibited feature, part, specialization, instance, or flow
/// object is a target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OplRelation {
    pub kind: RelationKind,
    pub source: String,
    pub targets: Vec<String>,
    pub state_from: Option<String>,
    pub state_to: Option<String>,
}

impl OplRelation {
    pub fn new(kind: RelationKind, source: impl Into<String>, targets: Vec<String>) -> Self {
        Self { kind, source: source.into(), targets, state_from: None, state_to: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceFormat {
    Opl,
    Xmi,
}

/// A linked architecture model.
///
/// Only constructible through [`ArchitectureGraph::new`], which enforces that
/// names are unique, every relation endpoint resolves, and the
/// exhibition/aggregation edges are acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchitectureGraph {
    things: Vec<OplThing>,
    relations: Vec<OplRelation>,
    source_format: SourceFormat,
}

impl ArchitectureGraph {
    pub fn new(
        things: Vec<OplThing>,
        relations: Vec<OplRelation>,
        source_format: SourceFormat,
    ) -> Result<Self, ArchitectureError> {
        if things.is_empty() {
            return Err(ArchitectureError::EmptyModel);
        }
        let mut names = HashSet::new();
        for thing in &things {
            if thing.name.trim().is_empty() {
                return Err(ArchitectureError::InvalidRelation("thing with empty name".into()));
            }
            if !names.insert(thing.name.as_str()) {
                return Err(ArchitectureError::ConflictingDeclaration(thing.name.clone()));
            }
        }
        for rel in &relations {
            if rel.targets.is_empty() {
                return Err(ArchitectureError::InvalidRelation(format!(
                    "{:?} from `{}` has no targets",
                    rel.kind, rel.source
                )));
            }
            if rel.kind == RelationKind::StateChange && (rel.state_from.is_none() || rel.state_to.is_none()) {
                return Err(ArchitectureError::InvalidRelation(format!(
                    "state change by `{}` lacks source or destination state",
                    rel.source
                )));
            }
            for name in std::iter::once(&rel.source).chain(&rel.targets) {
                if !names.contains(name.as_str()) {
                    return Err(ArchitectureError::UnresolvedName {
                        name: name.clone(),
                        context: format!("{:?} relation from `{}`", rel.kind, rel.source),
                    });
                }
            }
        }
        let graph = Self { things, relations, source_format };
        if let Some(cycle) = graph.find_structural_cycle() {
            return Err(ArchitectureError::CyclicStructure(cycle));
        }
        Ok(graph)
    }

    pub fn things(&self) -> &[OplThing] {
        &self.things
    }

    pub fn relations(&self) -> &[OplRelation] {
        &self.relations
    }

    pub fn source_format(&self) -> SourceFormat {
        self.source_format
    }

    pub fn thing(&self, name: &str) -> Option<&OplThing> {
        self.things.iter().find(|t| t.name == name)
    }

    pub fn objects(&self) -> impl Iterator<Item = &OplThing> {
        self.things.iter().filter(|t| t.is_object())
    }

    pub fn processes(&self) -> impl Iterator<Item = &OplThing> {
        self.things.iter().filter(|t| t.is_process())
    }

    /// All `(source, target)` pairs of relations of the given kind.
    pub fn edges(&self, kind: RelationKind) -> impl Iterator<Item = (&str, &str)> {
        self.relations
            .iter()
            .filter(move |r| r.kind == kind)
            .flat_map(|r| r.targets.iter().map(move |t| (r.source.as_str(), t.as_str())))
    }

    fn find_structural_cycle(&self) -> Option<Vec<String>> {
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        for rel in self.relations.iter().filter(|r| r.kind.is_structural()) {
            for t in &rel.targets {
                children.entry(rel.source.as_str()).or_default().push(t.as_str());
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        let mut stack: Vec<&str> = Vec::new();

        fn visit<'a>(
            node: &'a str,
            children: &HashMap<&'a str, Vec<&'a str>>,
            state: &mut HashMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            state.insert(node, 1);
            stack.push(node);
            for &child in children.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                match state.get(child).copied().unwrap_or(0) {
                    1 => {
                        let start = stack.iter().position(|n| *n == child).unwrap_or(0);
                        let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(child.to_string());
                        return Some(cycle);
                    }
                    0 => {
                        if let Some(c) = visit(child, children, state, stack) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            stack.pop();
            state.insert(node, 2);
            None
        }

        for thing in &self.things {
            if state.get(thing.name.as_str()).copied().unwrap_or(0) == 0 {
                if let Some(c) = visit(&thing.name, &children, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(n: &str) -> OplThing {
        OplThing::new(n, ThingKind::Object)
    }

    #[test]
    fn rejects_empty_model() {
        let err = ArchitectureGraph::new(vec![], vec![], SourceFormat::Opl).unwrap_err();
        assert!(matches!(err, ArchitectureError::EmptyModel));
    }

    #[test]
    fn rejects_dangling_endpoint() {
        let rel = OplRelation::new(RelationKind::Aggregation, "A", vec!["B".into()]);
        let err = ArchitectureGraph::new(vec![obj("A")], vec![rel], SourceFormat::Opl).unwrap_err();
        assert!(matches!(err, ArchitectureError::UnresolvedName { ref name, .. } if name == "B"));
    }

    #[test]
    fn rejects_structural_cycle() {
        let rels = vec![
            OplRelation::new(RelationKind::Aggregation, "A", vec!["B".into()]),
            OplRelation::new(RelationKind::Exhibition, "B", vec!["A".into()]),
        ];
        let err = ArchitectureGraph::new(vec![obj("A"), obj("B")], rels, SourceFormat::Opl).unwrap_err();
        match err {
            ArchitectureError::CyclicStructure(path) => assert_eq!(path, ["A", "B", "A"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn state_change_needs_both_states() {
        let mut rel = OplRelation::new(RelationKind::StateChange, "P", vec!["A".into()]);
        rel.state_from = Some("off".into());
        let things = vec![obj("A"), OplThing::new("P", ThingKind::Process)];
        let err = ArchitectureGraph::new(things, vec![rel], SourceFormat::Opl).unwrap_err();
        assert!(matches!(err, ArchitectureError::InvalidRelation(_)));
    }
}
