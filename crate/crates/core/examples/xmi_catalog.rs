//! Derives the drone function catalog three ways and checks they agree:
//! from OPL text, from a block definition diagram, and from a replayed
//! model reply.

use safer::architecture::{extract_catalog, extract_catalog_llm, parse_opl, parse_xmi_bdd};
use safer::gateway::{Gateway, LlmRequestParams, MockBackend};
use safer::FunctionCatalog;

fn aliases(c: &FunctionCatalog) -> Vec<&str> {
    let mut a: Vec<&str> = c.aliases().collect();
    a.sort_unstable();
    a
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

    let xmi = std::fs::read_to_string(format!("{fixtures}/drone_bdd.xmi"))?;
    let graph = parse_xmi_bdd(&xmi)?;
    for w in &graph.warnings {
        println!("xmi warning: {w}");
    }
    let from_xmi = extract_catalog(&graph.value, None)?.value;
    println!("{}", serde_json::to_string_pretty(&from_xmi.to_json())?);

    let opl = std::fs::read_to_string(format!("{fixtures}/drone.opl"))?;
    let from_opl = extract_catalog(&parse_opl(&opl)?.value, None)?.value;

    let gateway = Gateway::new(MockBackend::open(format!("{fixtures}/mock/catalog"))?, LlmRequestParams::default());
    let from_llm = extract_catalog_llm(&opl, &gateway)?;
    for w in &from_llm.warnings {
        println!("llm warning: {w}");
    }

    println!("opl == xmi: {}", from_opl == from_xmi);
    println!("aliases opl={:?}", aliases(&from_opl));
    println!("aliases llm={:?}", aliases(&from_llm.value));
    println!("alias sets agree: {}", aliases(&from_opl) == aliases(&from_llm.value));
    Ok(())
}
