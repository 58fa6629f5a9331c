//! Parses an OPL model and prints the things, relations and derived catalog.
//!
//! ```bash
//! cargo run --example parse_opl -- crates/core/fixtures/drone.opl
//! ```

use std::collections::BTreeMap;

use safer::architecture::{extract_catalog, parse_opl, ThingKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/meta_model.opl").to_string());
    let text = std::fs::read_to_string(&path)?;
    let parsed = parse_opl(&text)?;
    for w in &parsed.warnings {
        println!("warning: {w}");
    }
    let graph = parsed.value;
    let objects = graph.things().iter().filter(|t| t.kind == ThingKind::Object).count();
    println!("{path}: {objects} objects, {} processes", graph.things().len() - objects);

    let mut by_kind: BTreeMap<String, usize> = BTreeMap::new();
    for rel in graph.relations() {
        *by_kind.entry(format!("{:?}", rel.kind)).or_default() += rel.targets.len();
    }
    for (kind, n) in by_kind {
        println!("  {kind:<15} {n}");
    }

    let catalog = extract_catalog(&graph, None)?;
    for w in &catalog.warnings {
        println!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&catalog.value.to_json())?);
    Ok(())
}
