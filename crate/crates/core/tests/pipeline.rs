mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{project, snapshot};
use safer::orchestrator::load_config;
use safer::{Runner, TaskOutcome, TaskStatus};
use serde_json::Value;

fn edit_params(root: &Path, f: impl FnOnce(&mut Value)) {
    let path = root.join("params.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut v);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

fn run(root: &Path, force: bool) -> (Vec<TaskOutcome>, usize) {
    let cfg = load_config(root.join("params.json")).unwrap();
    let gateway = cfg.llm.gateway(None).unwrap();
    let outcomes = Runner::new(&gateway).version_tag(Some("v1".into())).force(force).run_all(&cfg.tasks);
    (outcomes, gateway.calls())
}

fn statuses(outcomes: &[TaskOutcome]) -> Vec<TaskStatus> {
    outcomes.iter().map(|o| o.status).collect()
}

#[test]
fn failed_call_leaves_partial_raw_and_blocks_downstream() {
    let dir = project();
    fs::remove_file(dir.path().join("mock/classify_chunk_05.json")).unwrap();
    let (outcomes, _) = run(dir.path(), false);
    assert_eq!(statuses(&outcomes), [TaskStatus::Failed; 3]);

    let raw = dir.path().join("results/raw");
    assert!(raw.join("b_classify_requirements_v1.jsonl.partial").exists());
    assert!(!raw.join("b_classify_requirements_v1.jsonl").exists());
    let partial = fs::read_to_string(raw.join("b_classify_requirements_v1.jsonl.partial")).unwrap();
    assert_eq!(partial.lines().count(), 10, "the ten answered chunks are kept");

    for o in &outcomes[1..] {
        assert!(o.diagnostics.iter().any(|d| d.contains("missing upstream output")), "{:?}", o.diagnostics);
        assert_eq!(o.calls, 0);
    }
    assert!(snapshot(&dir.path().join("results/reports")).is_empty(), "no report set without an executed task");
}

#[test]
fn run_false_skips_and_downstream_reports_it() {
    let dir = project();
    edit_params(dir.path(), |v| v["b_classify_requirements"]["run"] = Value::Bool(false));
    let (outcomes, calls) = run(dir.path(), false);
    assert_eq!(outcomes[0].status, TaskStatus::SkippedRunFalse);
    assert_eq!(outcomes[1].status, TaskStatus::Failed);
    assert!(outcomes[1].diagnostics[0].contains("SkippedRunFalse"), "{:?}", outcomes[1].diagnostics);
    assert_eq!(calls, 0);
}

#[test]
fn analyze_only_rerun_reads_raw_replies() {
    let dir = project();
    let (_, first_calls) = run(dir.path(), false);
    let joined = dir.path().join("results/joined/b_classify_requirements_v1.csv");
    let before = fs::read(&joined).unwrap();
    fs::remove_file(&joined).unwrap();

    edit_params(dir.path(), |v| v["defaults"]["execute"] = Value::Bool(false));
    let (outcomes, calls) = run(dir.path(), true);
    assert_eq!(statuses(&outcomes), [TaskStatus::Executed; 3]);
    assert_eq!(calls, 0);
    assert!(first_calls > 0);
    assert_eq!(fs::read(&joined).unwrap(), before);
}

#[test]
fn analyze_only_refuses_stale_raw_replies() {
    let dir = project();
    run(dir.path(), false);
    edit_params(dir.path(), |v| {
        v["defaults"]["execute"] = Value::Bool(false);
        v["defaults"]["chunk_size"] = Value::from(20);
    });
    let (outcomes, _) = run(dir.path(), true);
    assert_eq!(outcomes[0].status, TaskStatus::Failed);
    assert!(outcomes[0].diagnostics.iter().any(|d| d.contains("different prompts")), "{:?}", outcomes[0].diagnostics);
}

#[test]
fn tags_keep_runs_apart() {
    let dir = project();
    let cfg = load_config(dir.path().join("params.json")).unwrap();
    let gateway = cfg.llm.gateway(None).unwrap();
    Runner::new(&gateway).today("2025-01-31").run_all(&cfg.tasks);
    Runner::new(&gateway).version_tag(Some("other".into())).run_all(&cfg.tasks);
    let files = snapshot(&dir.path().join("results"));
    assert!(files.keys().any(|p| p.ends_with("b_classify_requirements_2025-01-31.csv")));
    assert!(files.keys().any(|p| p.ends_with("b_classify_requirements_other.csv")));
    assert!(files.keys().any(|p| p.ends_with("summary_other.md")));
    assert_eq!(gateway.calls(), 2 * 30);
}

#[test]
fn plan_counts_prompts_without_sending() {
    let dir = project();
    let cfg = load_config(dir.path().join("params.json")).unwrap();
    let gateway = cfg.llm.gateway(None).unwrap();
    let plan = Runner::new(&gateway).version_tag(Some("v1".into())).plan(&cfg.tasks);
    assert_eq!(plan[0].prompts, Some(11));
    assert_eq!(plan[1].prompts, None, "depends on an output that does not exist yet");
    assert!(plan.iter().all(|p| p.action.starts_with("run ")));
    assert_eq!(gateway.calls(), 0);
    assert!(!dir.path().join("results").exists());
}

fn safer() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safer"))
}

#[test]
fn cli_runs_filters_and_reports_config_errors() {
    let dir = project();
    let params = dir.path().join("params.json");
    let out = safer()
        .args(["run", "--config"])
        .arg(&params)
        .args(["--task", "b_classify_requirements", "--version-tag", "cli", "--backend", "mock"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("b_classify_requirements") && stdout.contains("Executed"), "{stdout}");
    assert!(!stdout.contains("c_detect_duplicates"));

    let dry = safer().args(["run", "--dry-run", "--version-tag", "cli", "--config"]).arg(&params).output().unwrap();
    assert!(dry.status.success());
    let text = String::from_utf8_lossy(&dry.stdout);
    assert!(text.contains("skip (delta: output exists)"), "{text}");

    let unknown = safer().args(["run", "--task", "nope", "--config"]).arg(&params).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    fs::write(&params, r#"{"t": {"analysis_function": "guess", "input_file": "i", "output_path": "o"}}"#).unwrap();
    let bad = safer().args(["run", "--config"]).arg(&params).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown analysis function"));
}

#[test]
fn cli_exit_code_reflects_failed_tasks() {
    let dir = project();
    let empty = tempfile::tempdir().unwrap();
    let out = safer()
        .args(["run", "--config"])
        .arg(dir.path().join("params.json"))
        .arg("--mock-dir")
        .arg(empty.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Failed"));
}
