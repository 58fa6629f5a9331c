//! Runs the sample project twice in a scratch directory: the second run is a
//! delta hit for every task.
//!
//! ```bash
//! cargo run --example run_pipeline
//! ```

use std::fs;
use std::path::Path;

use safer::orchestrator::load_config;
use safer::Runner;

fn copy(from: &Path, to: &Path) -> std::io::Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            copy(&entry.path(), &to.join(entry.file_name()))?;
        } else {
            fs::copy(entry.path(), to.join(entry.file_name()))?;
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scratch = std::env::temp_dir().join(format!("safer-example-{}", std::process::id()));
    copy(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/project"), &scratch)?;

    let cfg = load_config(scratch.join("params.json"))?;
    let gateway = cfg.llm.gateway(None)?;
    for pass in 1..=2 {
        let runner = Runner::new(&gateway).version_tag(Some("demo".into())).thresholds(cfg.thresholds);
        println!("pass {pass}");
        for o in runner.run_all(&cfg.tasks) {
            println!("  {:<26} {:?}, {} call(s), {} file(s)", o.task_name, o.status, o.calls, o.outputs.len());
        }
    }
    let summary = scratch.join("results/reports/summary_demo.md");
    println!("\n{}", fs::read_to_string(&summary)?);
    fs::remove_dir_all(&scratch)?;
    Ok(())
}
