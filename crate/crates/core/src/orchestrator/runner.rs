use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analyses::Prepared;
use super::{OrchestratorError, TaskConfig, TaskOutcome, TaskStatus};
use crate::gateway::{prompt_hash, Gateway};
use crate::report::{emit_report_set, MetricsThresholds, ReportInputs};

/// The four output directories of one `output_path`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputDirs {
    pub root: PathBuf,
    pub raw: PathBuf,
    pub joined: PathBuf,
    pub reports: PathBuf,
    pub quarantine: PathBuf,
}

impl OutputDirs {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        let root = root.into();
        Self {
            raw: root.join("raw"),
            joined: root.join("joined"),
            reports: root.join("reports"),
            quarantine: root.join("quarantine"),
            root,
        }
    }

    pub fn create(&self) -> std::io::Result<()> {
        for d in [&self.raw, &self.joined, &self.reports, &self.quarantine] {
            fs::create_dir_all(d)?;
        }
        Ok(())
    }

    pub fn raw_file(&self, task: &str, tag: &str) -> PathBuf {
        self.raw.join(format!("{task}_{tag}.jsonl"))
    }

    pub fn joined_file(&self, task: &str, tag: &str, ext: &str) -> PathBuf {
        self.joined.join(format!("{task}_{tag}.{ext}"))
    }

    pub fn quarantine_file(&self, task: &str, tag: &str) -> PathBuf {
        self.quarantine.join(format!("{task}_{tag}.json"))
    }
}

/// One line of a raw results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Exchange {
    label: String,
    prompt_sha256: String,
    reply: String,
}

fn write_raw(path: &Path, exchanges: &[Exchange]) -> Result<(), OrchestratorError> {
    let mut text = String::new();
    for e in exchanges {
        text.push_str(&serde_json::to_string(e).expect("exchange serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| OrchestratorError::io(path, e))
}

fn read_raw(path: &Path) -> Result<Vec<Exchange>, OrchestratorError> {
    let text = fs::read_to_string(path).map_err(|e| OrchestratorError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| OrchestratorError::Input(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// What a task would do, without doing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlannedTask {
    pub task_name: String,
    pub version_tag: String,
    pub action: String,
    pub primary_output: PathBuf,
    /// Backend calls the task would make, when its inputs are already available.
    pub prompts: Option<usize>,
}

/// Outputs of earlier tasks sharing a `(output_path, tag)` directory.
#[derive(Default)]
struct Group {
    inputs: ReportInputs,
    last_executed: Option<usize>,
}

/// Runs tasks in order against one gateway.
pub struct Runner<'g> {
    gateway: &'g Gateway,
    thresholds: MetricsThresholds,
    force: bool,
    version_tag: Option<String>,
    today: String,
}

impl<'g> Runner<'g> {
    pub fn new(gateway: &'g Gateway) -> Self {
        Self {
            gateway,
            thresholds: MetricsThresholds::default(),
            force: false,
            version_tag: None,
            today: chrono::Local::now().format("%Y-%m-%d").to_string(),
        }
    }

    /// Ignore existing outputs even for delta tasks.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    /// Overrides every task's version tag.
    pub fn version_tag(mut self, tag: Option<String>) -> Self {
        self.version_tag = tag;
        self
    }

    pub fn thresholds(mut self, thresholds: MetricsThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    /// Date used when no tag is configured, `YYYY-MM-DD`.
    pub fn today(mut self, date: impl Into<String>) -> Self {
        self.today = date.into();
        self
    }

    pub fn tag_for(&self, cfg: &TaskConfig) -> String {
        self.version_tag.clone().or_else(|| cfg.version_tag.clone()).unwrap_or_else(|| self.today.clone())
    }

    fn dirs(&self, cfg: &TaskConfig, tag: &str) -> OutputDirs {
        OutputDirs::new(cfg.tagged(&cfg.output_path, tag))
    }

    fn primary_output(&self, cfg: &TaskConfig, tag: &str) -> PathBuf {
        let dirs = self.dirs(cfg, tag);
        if cfg.analysis_function.uses_llm() && cfg.execute {
            dirs.raw_file(&cfg.task_name, tag)
        } else {
            dirs.joined_file(&cfg.task_name, tag, cfg.analysis_function.joined_ext())
        }
    }

    /// Runs every task in order and emits the report set of each output
    /// directory that saw at least one executed task.
    pub fn run_all(&self, configs: &[TaskConfig]) -> Vec<TaskOutcome> {
        let mut outcomes: Vec<TaskOutcome> = Vec::new();
        let mut groups: Vec<((PathBuf, String), Group)> = Vec::new();
        for (i, cfg) in configs.iter().enumerate() {
            let tag = self.tag_for(cfg);
            let key = (self.dirs(cfg, &tag).root, tag);
            let pos = match groups.iter().position(|(k, _)| *k == key) {
                Some(p) => p,
                None => {
                    let inputs = ReportInputs { thresholds: self.thresholds, ..ReportInputs::default() };
                    groups.push((key, Group { inputs, last_executed: None }));
                    groups.len() - 1
                }
            };
            let upstream: Vec<(&TaskConfig, &TaskOutcome)> = configs[..i].iter().zip(&outcomes).collect();
            let outcome = self.run_task_inner(cfg, &mut groups[pos].1.inputs, &upstream);
            if outcome.status == TaskStatus::Executed {
                groups[pos].1.last_executed = Some(i);
            }
            outcomes.push(outcome);
        }
        for ((root, tag), group) in groups {
            let Some(last) = group.last_executed else { continue };
            let dirs = OutputDirs::new(root);
            match emit_report_set(&group.inputs, &dirs.reports, &tag) {
                Ok(set) => {
                    log::info!("report set written to {}", dirs.reports.display());
                    outcomes[last].outputs.extend(set.files);
                }
                Err(e) => outcomes[last].diagnostics.push(format!("report set not written: {e}")),
            }
        }
        outcomes
    }

    /// Runs one task on its own; report inputs are discarded.
    pub fn run_task(&self, cfg: &TaskConfig) -> TaskOutcome {
        let mut inputs = ReportInputs::default();
        self.run_task_inner(cfg, &mut inputs, &[])
    }

    fn run_task_inner(
        &self,
        cfg: &TaskConfig,
        inputs: &mut ReportInputs,
        upstream: &[(&TaskConfig, &TaskOutcome)],
    ) -> TaskOutcome {
        let tag = self.tag_for(cfg);
        let calls_before = self.gateway.calls();
        let mut outcome = TaskOutcome {
            task_name: cfg.task_name.clone(),
            version_tag: tag.clone(),
            status: TaskStatus::Failed,
            outputs: Vec::new(),
            diagnostics: Vec::new(),
            calls: 0,
        };
        if !cfg.run {
            log::info!("[{}] run is false; skipped", cfg.task_name);
            outcome.status = TaskStatus::SkippedRunFalse;
            return outcome;
        }
        log::info!("[{}] {} (tag {tag})", cfg.task_name, cfg.analysis_function.name());
        if let Some(readme) = &cfg.readme {
            match fs::read_to_string(readme) {
                Ok(text) => text.lines().for_each(|l| log::info!("[{}] README: {l}", cfg.task_name)),
                Err(_) => log::debug!("[{}] no README at {}", cfg.task_name, readme.display()),
            }
        }
        match self.execute(cfg, &tag, inputs, upstream, &mut outcome) {
            Ok(status) => outcome.status = status,
            Err(e) => {
                log::error!("[{}] {e}", cfg.task_name);
                outcome.diagnostics.push(e.to_string());
                outcome.status = TaskStatus::Failed;
            }
        }
        outcome.calls = self.gateway.calls() - calls_before;
        for d in &outcome.diagnostics {
            if cfg.verbose {
                log::info!("[{}] {d}", cfg.task_name);
            } else {
                log::debug!("[{}] {d}", cfg.task_name);
            }
        }
        outcome
    }

    fn check_inputs(
        &self,
        cfg: &TaskConfig,
        tag: &str,
        upstream: &[(&TaskConfig, &TaskOutcome)],
    ) -> Result<(), OrchestratorError> {
        for path in cfg.inputs(tag) {
            if path.exists() {
                continue;
            }
            let producer = upstream.iter().rev().find(|(c, o)| path.starts_with(self.dirs(c, &o.version_tag).root));
            return Err(OrchestratorError::Input(match producer {
                Some((c, o)) => format!(
                    "missing upstream output {} (task `{}` {:?})",
                    path.display(),
                    c.task_name,
                    o.status
                ),
                None => format!("input not found: {}", path.display()),
            }));
        }
        Ok(())
    }

    fn execute(
        &self,
        cfg: &TaskConfig,
        tag: &str,
        inputs: &mut ReportInputs,
        upstream: &[(&TaskConfig, &TaskOutcome)],
        outcome: &mut TaskOutcome,
    ) -> Result<TaskStatus, OrchestratorError> {
        self.check_inputs(cfg, tag, upstream)?;
        let dirs = self.dirs(cfg, tag);
        let primary = self.primary_output(cfg, tag);
        let prepared = Prepared::load(cfg, tag, &mut outcome.diagnostics)?;

        if cfg.delta && !self.force && primary.exists() {
            log::info!("[{}] {} exists; delta skip", cfg.task_name, primary.display());
            outcome.diagnostics.extend(prepared.reload(cfg, tag, &dirs, inputs)?);
            return Ok(TaskStatus::SkippedDeltaHit);
        }
        dirs.create().map_err(|e| OrchestratorError::io(&dirs.root, e))?;

        let prompts = prepared.prompts();
        let raw = dirs.raw_file(&cfg.task_name, tag);
        let partial = raw.with_extension("jsonl.partial");
        let mut replies = Vec::new();
        if cfg.analysis_function.uses_llm() {
            if cfg.execute {
                let texts: Vec<String> = prompts.iter().map(|(_, p)| p.clone()).collect();
                log::info!("[{}] sending {} prompt(s) via {}", cfg.task_name, texts.len(), self.gateway.backend_name());
                let mut exchanges = Vec::new();
                let mut failure = None;
                for ((label, prompt), result) in prompts.iter().zip(self.gateway.send_batch(&texts)) {
                    match result {
                        Ok(c) => exchanges.push(Exchange {
                            label: label.clone(),
                            prompt_sha256: prompt_hash(prompt),
                            reply: c.text,
                        }),
                        Err(e) if failure.is_none() => failure = Some(format!("{label}: {e}")),
                        Err(e) => outcome.diagnostics.push(format!("{label}: {e}")),
                    }
                }
                if let Some(msg) = failure {
                    write_raw(&partial, &exchanges)?;
                    outcome.outputs.push(partial);
                    return Err(OrchestratorError::Input(format!("call failed, task aborted: {msg}")));
                }
                write_raw(&raw, &exchanges)?;
                if partial.exists() {
                    let _ = fs::remove_file(&partial);
                }
                outcome.outputs.push(raw.clone());
                replies = exchanges.into_iter().map(|e| e.reply).collect();
            } else {
                let exchanges = read_raw(&raw).map_err(|e| {
                    OrchestratorError::Input(format!("execute is false and no raw results are available: {e}"))
                })?;
                let stale = exchanges.len() != prompts.len()
                    || exchanges.iter().zip(&prompts).any(|(e, (_, p))| e.prompt_sha256 != prompt_hash(p));
                if stale {
                    return Err(OrchestratorError::Input(format!(
                        "{} was produced from different prompts; run with execute",
                        raw.display()
                    )));
                }
                replies = exchanges.into_iter().map(|e| e.reply).collect();
            }
        }
        if cfg.analyze {
            let analysed = prepared.analyse(cfg, tag, &dirs, &replies, inputs)?;
            outcome.outputs.extend(analysed.outputs);
            outcome.diagnostics.extend(analysed.diagnostics);
        }
        Ok(TaskStatus::Executed)
    }

    /// Describes what [`Runner::run_all`] would do, without writing or sending anything.
    pub fn plan(&self, configs: &[TaskConfig]) -> Vec<PlannedTask> {
        configs
            .iter()
            .map(|cfg| {
                let tag = self.tag_for(cfg);
                let primary = self.primary_output(cfg, &tag);
                let mut ignored = Vec::new();
                let prompts = if cfg.analysis_function.uses_llm() && cfg.execute {
                    Prepared::load(cfg, &tag, &mut ignored).ok().map(|p| p.prompts().len())
                } else {
                    Some(0)
                };
                let action = if !cfg.run {
                    "skip (run is false)".to_string()
                } else if cfg.delta && !self.force && primary.exists() {
                    "skip (delta: output exists)".to_string()
                } else {
                    format!("run {}", cfg.analysis_function.name())
                };
                PlannedTask {
                    task_name: cfg.task_name.clone(),
                    version_tag: tag,
                    action,
                    primary_output: primary,
                    prompts,
                }
            })
            .collect()
    }
}
