//! Sends one classification chunk to an OpenAI-compatible endpoint.
//!
//! ```bash
//! OPENAI_API_KEY=... cargo run --example http_client -- https://api.openai.com/v1
//! ```
//!
//! Without a key the prompt is printed instead.

use std::path::Path;

use safer::classify::{build_classification_prompt, join_replies, ClassificationPrompt};
use safer::gateway::HttpBackend;
use safer::orchestrator::load_catalog_file;
use safer::requirements::{chunk, load_requirements};
use safer::{Gateway, LlmRequestParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base_url = std::env::args().nth(1).unwrap_or_else(|| "https://api.openai.com/v1".into());
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = load_catalog_file(&fixtures.join("drone_catalog.json"))?.value;
    let columns = vec!["Requirements".to_string()];
    let reqs = load_requirements(fixtures.join("sample/requirements.csv"), "ReqID", &columns)?;
    let chunks = chunk(&reqs, 5, -1)?;

    let mut prompt = ClassificationPrompt::new("Drone Safety Requirements");
    prompt.data_columns = columns;
    let text = build_classification_prompt(&chunks[0], &catalog, &prompt).render();

    let key = match HttpBackend::resolve_api_key(None, "OPENAI_API_KEY") {
        Ok(k) => k,
        Err(e) => {
            eprintln!("{e}; printing the prompt instead\n");
            println!("{text}");
            return Ok(());
        }
    };
    let gateway = Gateway::new(HttpBackend::new(base_url, key)?, LlmRequestParams::default());
    let reply = gateway.send(&text)?;
    if let Some(u) = &reply.usage {
        eprintln!("tokens: {} in, {} out", u.prompt_tokens, u.completion_tokens);
    }
    let joined = join_replies(&chunks[0].items, &[reply.text], &catalog)?;
    for r in &joined.rows {
        println!("{} {} {} {}", r.req_id, r.function, r.rtype.as_str(), r.confidence);
    }
    for q in &joined.quarantine {
        println!("quarantined: {:?} ({})", q.req_id, q.reason);
    }
    Ok(())
}
