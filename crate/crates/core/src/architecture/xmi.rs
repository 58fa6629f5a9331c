//! Reader for block definition diagrams serialized as XMI.
//!
//! Supported: `uml:Class` blocks (anywhere under models and packages),
//! composite `ownedAttribute` part properties, and `ownedOperation` /
//! `ownedBehavior` members. SysML `Block` stereotype applications are
//! accepted silently. Every other element is reported once per type.

use std::collections::HashMap;

use indexmap::IndexMap;
use roxmltree::{Document, Node};

use super::{
    ArchitectureError, ArchitectureGraph, Essence, OplRelation, OplThing, RelationKind, SourceFormat, ThingKind,
};
use crate::WithWarnings;

/// Elements whose children are walked for blocks.
const CONTAINERS: &[&str] = &["Model", "Package", "Profile"];
const BEHAVIORS: &[&str] = &["Operation", "Activity", "OpaqueBehavior", "StateMachine", "Interaction"];

fn is_xmi_ns(ns: Option<&str>) -> bool {
    ns.is_some_and(|n| n.contains("XMI") || n.contains("xmi"))
}

fn xmi_attr<'a>(node: Node<'a, '_>, local: &str) -> Option<&'a str> {
    node.attributes().find(|a| a.name() == local && is_xmi_ns(a.namespace())).map(|a| a.value())
}

fn plain_attr<'a>(node: Node<'a, '_>, local: &str) -> Option<&'a str> {
    node.attributes().find(|a| a.name() == local && a.namespace().is_none()).map(|a| a.value())
}

/// Metaclass of an element: `xmi:type` without prefix, else the tag name.
fn metaclass<'a>(node: Node<'a, '_>) -> &'a str {
    match xmi_attr(node, "type") {
        Some(t) => t.rsplit(':').next().unwrap_or(t),
        None => node.tag_name().name(),
    }
}

fn display_type(node: Node<'_, '_>) -> String {
    xmi_attr(node, "type").map_or_else(|| node.tag_name().name().to_string(), str::to_string)
}

struct Reader<'a, 'i> {
    warnings: IndexMap<String, usize>,
    things: Vec<OplThing>,
    relations: Vec<OplRelation>,
    /// xmi:id of each block -> block name.
    blocks: HashMap<&'a str, &'a str>,
    pending_parts: Vec<(String, Node<'a, 'i>)>,
}

impl<'a, 'i> Reader<'a, 'i> {
    fn unsupported(&mut self, node: Node<'_, '_>) {
        *self.warnings.entry(display_type(node)).or_default() += 1;
    }

    fn walk(&mut self, node: Node<'a, 'i>) -> Result<(), ArchitectureError> {
        for child in node.children().filter(Node::is_element) {
            let kind = metaclass(child);
            if CONTAINERS.contains(&kind) {
                self.walk(child)?;
            } else if kind == "Class" {
                self.block(child)?;
            } else if kind == "Block" && child.attributes().any(|a| a.name() == "base_Class") {
                // stereotype application marking a class as a block
            } else if matches!(kind, "Documentation" | "Extension") || child.tag_name().name() == "eAnnotations" {
                // tool metadata
            } else {
                self.unsupported(child);
            }
        }
        Ok(())
    }

    fn name_of(node: Node<'_, '_>) -> Result<String, ArchitectureError> {
        let name = plain_attr(node, "name").map(str::trim).unwrap_or("");
        if name.is_empty() {
            let id = xmi_attr(node, "id").unwrap_or("?");
            return Err(ArchitectureError::MalformedXml(format!("{} `{id}` has no name", display_type(node))));
        }
        Ok(name.split_whitespace().collect::<Vec<_>>().join(" "))
    }

    fn block(&mut self, node: Node<'a, 'i>) -> Result<(), ArchitectureError> {
        let name = Self::name_of(node)?;
        if let (Some(id), Some(raw)) = (xmi_attr(node, "id"), plain_attr(node, "name")) {
            self.blocks.insert(id, raw.trim());
        }
        let mut thing = OplThing::new(name.clone(), ThingKind::Object);
        thing.essence = Essence::Physical;
        thing.alias = plain_attr(node, "alias").map(str::to_string);
        self.things.push(thing);

        let mut exhibited = Vec::new();
        for child in node.children().filter(Node::is_element) {
            let tag = child.tag_name().name();
            let kind = metaclass(child);
            match tag {
                "ownedAttribute" if plain_attr(child, "aggregation") == Some("composite") => {
                    self.pending_parts.push((name.clone(), child));
                }
                "ownedOperation" | "ownedBehavior" if BEHAVIORS.contains(&kind) || kind == tag => {
                    let process_name = Self::name_of(child)?;
                    let mut process = OplThing::new(process_name.clone(), ThingKind::Process);
                    process.essence = Essence::Physical;
                    process.alias = plain_attr(child, "alias").map(str::to_string);
                    self.things.push(process);
                    exhibited.push(process_name);
                }
                "nestedClassifier" | "packagedElement" if kind == "Class" => self.block(child)?,
                "ownedComment" => {}
                _ => self.unsupported(child),
            }
        }
        if !exhibited.is_empty() {
            self.relations.push(OplRelation::new(RelationKind::Exhibition, name, exhibited));
        }
        Ok(())
    }

    fn link_parts(&mut self) -> Result<(), ArchitectureError> {
        let mut grouped: IndexMap<String, Vec<String>> = IndexMap::new();
        for (owner, prop) in std::mem::take(&mut self.pending_parts) {
            let type_ref = plain_attr(prop, "type").or_else(|| {
                prop.children()
                    .find(|c| c.is_element() && c.tag_name().name() == "type")
                    .and_then(|c| xmi_attr(c, "idref").or_else(|| plain_attr(c, "href")))
            });
            let Some(type_ref) = type_ref else {
                return Err(ArchitectureError::MalformedXml(format!(
                    "part `{}` of `{owner}` has no type",
                    plain_attr(prop, "name").unwrap_or("?")
                )));
            };
            let target = self.blocks.get(type_ref).ok_or_else(|| ArchitectureError::UnresolvedName {
                name: type_ref.to_string(),
                context: format!("part property of `{owner}`"),
            })?;
            grouped.entry(owner).or_default().push(target.split_whitespace().collect::<Vec<_>>().join(" "));
        }
        for (owner, parts) in grouped {
            self.relations.push(OplRelation::new(RelationKind::Aggregation, owner, parts));
        }
        Ok(())
    }
}

/// Parses a block definition diagram into an architecture graph.
pub fn parse_xmi_bdd(text: &str) -> Result<WithWarnings<ArchitectureGraph>, ArchitectureError> {
    let doc = Document::parse(text).map_err(|e| ArchitectureError::MalformedXml(e.to_string()))?;
    let mut reader = Reader {
        warnings: IndexMap::new(),
        things: Vec::new(),
        relations: Vec::new(),
        blocks: HashMap::new(),
        pending_parts: Vec::new(),
    };
    let root = doc.root_element();
    if CONTAINERS.contains(&metaclass(root)) {
        reader.walk(root)?;
    } else if metaclass(root) == "Class" {
        reader.block(root)?;
    } else {
        // <xmi:XMI> wrapper or similar
        reader.walk(root)?;
    }
    reader.link_parts()?;
    let warnings = reader
        .warnings
        .iter()
        .map(|(t, n)| format!("unsupported element `{t}` ignored ({n} occurrence{})", if *n == 1 { "" } else { "s" }))
        .collect();
    let graph = ArchitectureGraph::new(reader.things, reader.relations, SourceFormat::Xmi)?;
    Ok(WithWarnings::new(graph, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(body: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<xmi:XMI xmlns:xmi="http://www.omg.org/spec/XMI/20131001" xmlns:uml="http://www.omg.org/spec/UML/20131001"
         xmlns:sysml="http://www.omg.org/spec/SysML/20181001/SysML">
  <uml:Model xmi:id="model" name="M">{body}</uml:Model>
</xmi:XMI>"#
        )
    }

    #[test]
    fn single_block_with_operation() {
        let xml = wrap(
            r#"<packagedElement xmi:type="uml:Class" xmi:id="d" name="Drone">
                 <ownedOperation xmi:type="uml:Operation" xmi:id="o" name="Navigating"/>
               </packagedElement>"#,
        );
        let g = parse_xmi_bdd(&xml).unwrap();
        assert!(g.warnings.is_empty());
        let g = g.value;
        assert!(g.thing("Drone").unwrap().is_object());
        assert!(g.thing("Navigating").unwrap().is_process());
        assert_eq!(g.edges(RelationKind::Exhibition).collect::<Vec<_>>(), [("Drone", "Navigating")]);
        assert_eq!(g.source_format(), SourceFormat::Xmi);
    }

    #[test]
    fn composite_part_is_aggregation() {
        let xml = wrap(
            r#"<packagedElement xmi:type="uml:Class" xmi:id="d" name="Drone">
                 <ownedAttribute xmi:type="uml:Property" xmi:id="p" name="engine" type="e" aggregation="composite"/>
                 <ownedAttribute xmi:type="uml:Property" xmi:id="v" name="mass" type="real"/>
               </packagedElement>
               <packagedElement xmi:type="uml:Package" xmi:id="pk" name="Parts">
                 <packagedElement xmi:type="uml:Class" xmi:id="e" name="Engine"/>
               </packagedElement>
               <packagedElement xmi:type="uml:Association" xmi:id="a"/>
               <sysml:Block xmi:id="s" base_Class="d"/>"#,
        );
        let g = parse_xmi_bdd(&xml).unwrap();
        assert_eq!(g.value.edges(RelationKind::Aggregation).collect::<Vec<_>>(), [("Drone", "Engine")]);
        assert_eq!(g.warnings.len(), 2, "{:?}", g.warnings);
        assert!(g.warnings.iter().any(|w| w.contains("uml:Association")));
        assert!(g.warnings.iter().any(|w| w.contains("uml:Property")));
    }

    #[test]
    fn part_type_must_resolve() {
        let xml = wrap(
            r#"<packagedElement xmi:type="uml:Class" xmi:id="d" name="Drone">
                 <ownedAttribute xmi:id="p" name="x" type="nowhere" aggregation="composite"/>
               </packagedElement>"#,
        );
        assert!(matches!(parse_xmi_bdd(&xml), Err(ArchitectureError::UnresolvedName { .. })));
    }

    #[test]
    fn malformed_xml() {
        assert!(matches!(parse_xmi_bdd("<a><b></a>"), Err(ArchitectureError::MalformedXml(_))));
    }

    #[test]
    fn empty_model() {
        assert!(matches!(parse_xmi_bdd(&wrap("")), Err(ArchitectureError::EmptyModel)));
    }
}
