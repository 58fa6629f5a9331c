//! Builds the function-type matrix for the 110-row project set and lists the gaps.
//!
//! ```bash
//! cargo run --example coverage_matrix
//! ```

use std::path::Path;

use safer::classify::{classify, ClassificationPrompt};
use safer::coverage::build_matrix;
use safer::gateway::MockBackend;
use safer::orchestrator::load_catalog_file;
use safer::requirements::{chunk, load_requirements};
use safer::{Gateway, LlmRequestParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let project = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/project");
    let catalog = load_catalog_file(&project.join("data/drone_catalog.json"))?.value;
    let columns = vec!["Requirements".to_string()];
    let reqs = load_requirements(project.join("data/safety_requirements.csv"), "ReqID", &columns)?;

    let mut prompt = ClassificationPrompt::new("Drone Safety Requirements");
    prompt.data_columns = columns;
    let gateway = Gateway::new(MockBackend::open(project.join("mock"))?, LlmRequestParams::default())
        .with_max_in_flight(4);
    let (_, joined) = classify(&chunk(&reqs, 10, -1)?, &catalog, &gateway, &prompt)?;
    println!("{} rows, {} quarantined record(s)", joined.rows.len(), joined.quarantine.len());

    let matrix = build_matrix(&joined.rows, &catalog)?;
    matrix.write_csv(std::io::stdout())?;
    println!();
    for row in matrix.gaps() {
        println!("gap: {} needs {} more requirement(s)", row.function, row.shortfall());
    }
    Ok(())
}
