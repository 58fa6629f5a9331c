//! Classifies the ten-row sample through the mock backend and prints the joined table.
//!
//! ```bash
//! cargo run --example classify_mock
//! ```

use std::path::Path;

use safer::classify::{classify, write_table_csv, ClassificationPrompt, Flag};
use safer::gateway::MockBackend;
use safer::orchestrator::load_catalog_file;
use safer::requirements::{chunk, load_requirements};
use safer::{Gateway, LlmRequestParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = load_catalog_file(&fixtures.join("drone_catalog.json"))?.value;
    let columns = vec!["Requirements".to_string()];
    let reqs = load_requirements(fixtures.join("sample/requirements.csv"), "ReqID", &columns)?;
    let chunks = chunk(&reqs, 10, -1)?;

    let mut prompt = ClassificationPrompt::new("Drone Safety Requirements");
    prompt.data_columns = columns;
    let gateway = Gateway::new(MockBackend::open(fixtures.join("sample/mock"))?, LlmRequestParams::default());
    let (_, joined) = classify(&chunks, &catalog, &gateway, &prompt)?;

    for d in &joined.diagnostics {
        eprintln!("note: {d}");
    }
    for r in &joined.rows {
        let low = if r.has(Flag::LowConfidence) { " (low confidence)" } else { "" };
        println!("{} {:<5} {:<5} {:>3}{low}  {}", r.req_id, r.function, r.rtype.as_str(), r.confidence, r.system_requirement);
    }
    println!();
    write_table_csv(&joined.rows, std::io::stdout())?;
    Ok(())
}
