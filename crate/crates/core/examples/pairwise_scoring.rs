//! Runs duplicate detection under each prompt revision, then contradiction
//! detection, and scores both against the known pairs.
//!
//! ```bash
//! cargo run --example pairwise_scoring
//! ```

use std::path::Path;

use safer::classify::{classify, ClassificationPrompt};
use safer::gateway::MockBackend;
use safer::orchestrator::load_catalog_file;
use safer::pairwise::{cluster_by_function, plan_contradictions, plan_duplicates, score, PromptVersion};
use safer::requirements::{chunk, load_requirements};
use safer::{Gateway, GoldPairs, LlmRequestParams, PairKind, PairScore};

fn show(label: &str, s: &PairScore) {
    println!(
        "{label:<16} {}/{} = {:6.2}%  false positives {}  {}",
        s.detected_true,
        s.gold_total,
        s.rate,
        s.false_positive,
        if s.passed { "pass" } else { "fail" }
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let project = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/project");
    let catalog = load_catalog_file(&project.join("data/drone_catalog.json"))?.value;
    let columns = vec!["Requirements".to_string()];
    let reqs = load_requirements(project.join("data/safety_requirements.csv"), "ReqID", &columns)?;
    let gateway = Gateway::new(MockBackend::open(project.join("mock"))?, LlmRequestParams::default());

    let mut prompt = ClassificationPrompt::new("Drone Safety Requirements");
    prompt.data_columns = columns;
    let (_, joined) = classify(&chunk(&reqs, 10, -1)?, &catalog, &gateway, &prompt)?;
    let clusters = cluster_by_function(&joined.rows, &catalog);

    let dup_gold = GoldPairs::load_csv(project.join("data/duplicate_pairs.csv"), PairKind::Duplicate)?;
    let mut last = None;
    for version in [PromptVersion::V1, PromptVersion::V2, PromptVersion::V3] {
        let found = plan_duplicates(&clusters, version).execute(&gateway)?;
        show(&format!("duplicates {version:?}"), &score(&found.findings, &dup_gold)?);
        last = Some(found);
    }

    let duplicates = last.expect("three versions ran");
    let contradictions = plan_contradictions(&clusters, &duplicates.findings).execute(&gateway)?;
    for note in &contradictions.notes {
        println!("note: {note}");
    }
    let con_gold = GoldPairs::load_csv(project.join("data/contradiction_pairs.csv"), PairKind::Contradiction)?;
    show("contradictions", &score(&contradictions.findings, &con_gold)?);
    println!("{} backend call(s)", gateway.calls());
    Ok(())
}
