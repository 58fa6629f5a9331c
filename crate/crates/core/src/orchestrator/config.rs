use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::analyses::AnalysisKind;
use super::OrchestratorError;
use crate::gateway::{Backend, Gateway, HttpBackend, LlmRequestParams, MockBackend};
use crate::pairwise::PromptVersion;
use crate::report::MetricsThresholds;

pub const TASK_TYPE: &str = "GENERATIVE_ANALYSIS_TASK";

/// Top-level keys that are not tasks.
pub const RESERVED_KEYS: [&str; 3] = ["defaults", "thresholds", "llm"];

/// Placeholder replaced by the version tag in path fields.
pub const VERSION_PLACEHOLDER: &str = "{version_tag}";

/// One task block, merged with defaults and resolved against `project_dir`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskConfig {
    pub task_name: String,
    pub task_type: String,
    pub run: bool,
    pub delta: bool,
    pub project_dir: PathBuf,
    pub readme: Option<PathBuf>,
    pub input_file: PathBuf,
    pub dataset_name: String,
    pub dataset_id_column: String,
    pub dataset_columns: Vec<String>,
    pub result_columns: Vec<String>,
    pub instructions: Option<PathBuf>,
    pub resources: Option<PathBuf>,
    pub output_path: PathBuf,
    pub chunk_size: i64,
    pub max_items: i64,
    pub execute: bool,
    pub analyze: bool,
    pub analysis_function: AnalysisKind,
    pub verbose: bool,
    pub version_tag: Option<String>,
    /// Function catalog JSON, or an OPL/XMI model to extract one from.
    pub architecture_file: Option<PathBuf>,
    /// Reference data used to score the task's output.
    pub gold_file: Option<PathBuf>,
    /// Duplicate findings consumed by contradiction detection.
    pub duplicates_file: Option<PathBuf>,
    pub prompt_version: PromptVersion,
}

impl TaskConfig {
    /// `path` with the version placeholder substituted.
    pub fn tagged(&self, path: &Path, tag: &str) -> PathBuf {
        PathBuf::from(path.to_string_lossy().replace(VERSION_PLACEHOLDER, tag))
    }

    /// Every input file the task reads, placeholders substituted.
    pub fn inputs(&self, tag: &str) -> Vec<PathBuf> {
        std::iter::once(&self.input_file)
            .chain(&self.architecture_file)
            .chain(&self.duplicates_file)
            .chain(&self.gold_file)
            .chain(&self.instructions)
            .chain(&self.resources)
            .map(|p| self.tagged(p, tag))
            .collect()
    }
}

/// Model and backend settings from the `llm` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    /// `http` or `mock`.
    pub backend: String,
    pub base_url: String,
    pub api_key_file: Option<PathBuf>,
    pub api_key_env: String,
    /// Fixture directory for the mock backend.
    pub mock_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    #[serde(flatten)]
    pub params: LlmRequestParams,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            backend: "http".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_file: None,
            api_key_env: "OPENAI_API_KEY".into(),
            mock_dir: None,
            max_in_flight: 1,
            timeout_secs: 120,
            params: LlmRequestParams::default(),
        }
    }
}

impl LlmSettings {
    /// Builds the gateway for `backend` (`http` or `mock`), defaulting to the configured one.
    pub fn gateway(&self, backend: Option<&str>) -> Result<Gateway, OrchestratorError> {
        let backend: Box<dyn Backend> = match backend.unwrap_or(&self.backend) {
            "mock" => {
                let dir = self.mock_dir.as_ref().ok_or_else(|| {
                    OrchestratorError::InvalidConfig {
                        task: "llm".into(),
                        messages: vec!["`mock_dir` is required for the mock backend".into()],
                    }
                })?;
                Box::new(MockBackend::open(dir)?)
            }
            "http" => {
                let key = HttpBackend::resolve_api_key(self.api_key_file.as_deref(), &self.api_key_env)?;
                Box::new(HttpBackend::with_timeout(&self.base_url, key, Duration::from_secs(self.timeout_secs))?)
            }
            other => {
                return Err(OrchestratorError::InvalidConfig {
                    task: "llm".into(),
                    messages: vec![format!("unknown backend `{other}` (http or mock)")],
                })
            }
        };
        Ok(Gateway::from_boxed(backend, self.params.clone()).with_max_in_flight(self.max_in_flight))
    }
}

/// A parsed parameters file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub tasks: Vec<TaskConfig>,
    pub thresholds: MetricsThresholds,
    pub llm: LlmSettings,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile, OrchestratorError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| OrchestratorError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut cfg = parse_config(&text, &base)?;
    cfg.path = path.to_path_buf();
    Ok(cfg)
}

fn invalid(task: &str, messages: Vec<String>) -> OrchestratorError {
    OrchestratorError::InvalidConfig { task: task.to_string(), messages }
}

/// Parses parameters JSON; relative `project_dir`s (and `mock_dir`,
/// `api_key_file`) resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ConfigFile, OrchestratorError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| invalid("(file)", vec![format!("not valid JSON: {e}")]))?;
    let Value::Object(root) = root else {
        return Err(invalid("(file)", vec!["top level must be an object of task blocks".into()]));
    };
    let defaults = match root.get("defaults") {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(invalid("defaults", vec!["must be an object".into()])),
    };
    let thresholds = match root.get("thresholds") {
        None => MetricsThresholds::default(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid("thresholds", vec![e.to_string()]))?,
    };
    let mut llm: LlmSettings = match root.get("llm") {
        None => LlmSettings::default(),
        Some(v) => {
            let known = serde_json::to_value(LlmSettings::default()).expect("settings serialize");
            let unknown: Vec<String> = v
                .as_object()
                .into_iter()
                .flat_map(|m| m.keys())
                .filter(|k| known.get(k.as_str()).is_none())
                .map(|k| format!("unknown field `{k}`"))
                .collect();
            if !unknown.is_empty() {
                return Err(invalid("llm", unknown));
            }
            serde_json::from_value(v.clone()).map_err(|e| invalid("llm", vec![e.to_string()]))?
        }
    };
    llm.mock_dir = llm.mock_dir.map(|p| base_dir.join(p));
    llm.api_key_file = llm.api_key_file.map(|p| base_dir.join(p));

    let mut tasks = Vec::new();
    for (name, block) in root.iter().filter(|(k, _)| !RESERVED_KEYS.contains(&k.as_str())) {
        let Value::Object(block) = block else {
            return Err(invalid(name, vec!["task block must be an object".into()]));
        };
        let mut merged = defaults.clone();
        merged.extend(block.clone());
        tasks.push(task_from_map(name, &merged, base_dir)?);
    }
    Ok(ConfigFile { path: PathBuf::new(), tasks, thresholds, llm })
}

const KNOWN_FIELDS: [&str; 25] = [
    "type",
    "run",
    "delta",
    "project_dir",
    "readme",
    "input_file",
    "dataset_name",
    "dataset_id_column",
    "dataset_columns",
    "result_columns",
    "instructions",
    "resources",
    "output_path",
    "chunk_size",
    "max_items",
    "execute",
    "analyze",
    "analysis_function",
    "verbose",
    "version_tag",
    "architecture_file",
    "gold_file",
    "duplicates_file",
    "prompt_version",
    "description",
];

/// Field reader that collects every problem instead of stopping at the first.
struct Fields<'a> {
    map: &'a Map<String, Value>,
    errors: Vec<String>,
}

impl Fields<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key)?.clone() {
            Value::String(s) => Some(s.trim().to_string()),
            other => {
                self.errors.push(format!("`{key}` must be a string, got {other}"));
                None
            }
        }
    }

    fn required_string(&mut self, key: &str) -> String {
        match self.string(key) {
            Some(s) if !s.is_empty() => s,
            Some(_) => {
                self.errors.push(format!("`{key}` must not be empty"));
                String::new()
            }
            None => {
                if self.get(key).is_none() {
                    self.errors.push(format!("`{key}` is required"));
                }
                String::new()
            }
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.get(key).cloned() {
            None => default,
            Some(Value::Bool(b)) => b,
            Some(other) => {
                self.errors.push(format!("`{key}` must be true or false, got {other}"));
                default
            }
        }
    }

    fn int(&mut self, key: &str, default: i64) -> i64 {
        match self.get(key).cloned() {
            None => default,
            Some(v) => v.as_i64().unwrap_or_else(|| {
                self.errors.push(format!("`{key}` must be an integer, got {v}"));
                default
            }),
        }
    }

    fn list(&mut self, key: &str) -> Vec<String> {
        match self.get(key).cloned() {
            None => Vec::new(),
            Some(Value::Array(items)) if items.iter().all(Value::is_string) => {
                items.iter().filter_map(Value::as_str).map(|s| s.trim().to_string()).collect()
            }
            Some(Value::String(s)) => vec![s.trim().to_string()],
            Some(other) => {
                self.errors.push(format!("`{key}` must be a list of strings, got {other}"));
                Vec::new()
            }
        }
    }
}

fn task_from_map(name: &str, map: &Map<String, Value>, base_dir: &Path) -> Result<TaskConfig, OrchestratorError> {
    let mut f = Fields { map, errors: Vec::new() };
    for key in map.keys().filter(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        f.errors.push(format!("unknown field `{key}`"));
    }

    let task_type = f.string("type").unwrap_or_else(|| TASK_TYPE.to_string());
    if task_type != TASK_TYPE {
        f.errors.push(format!("`type` must be {TASK_TYPE}, got `{task_type}`"));
    }
    let project_dir = base_dir.join(f.string("project_dir").unwrap_or_default());
    let at = |p: String| project_dir.join(p);

    let analysis_name = f.required_string("analysis_function");
    let analysis_function = if analysis_name.is_empty() {
        None
    } else {
        match analysis_name.parse::<AnalysisKind>() {
            Ok(k) => Some(k),
            Err(_) => {
                return Err(OrchestratorError::UnknownAnalysisFunction {
                    task: name.to_string(),
                    name: analysis_name,
                })
            }
        }
    };

    let input_file = at(f.required_string("input_file"));
    let output_path = at(f.required_string("output_path"));
    let chunk_size = f.int("chunk_size", 10);
    if chunk_size < 1 {
        f.errors.push(format!("`chunk_size` must be at least 1, got {chunk_size}"));
    }
    let max_items = f.int("max_items", -1);
    let prompt_version = match f.string("prompt_version") {
        None => PromptVersion::default(),
        Some(v) => v.parse().unwrap_or_else(|e: String| {
            f.errors.push(format!("`prompt_version`: {e}"));
            PromptVersion::default()
        }),
    };
    let version_tag = f.string("version_tag").filter(|t| !t.is_empty());
    if let Some(t) = &version_tag {
        if t.contains(['/', '\\']) {
            f.errors.push(format!("`version_tag` must not contain path separators, got `{t}`"));
        }
    }

    let cfg = TaskConfig {
        task_name: name.to_string(),
        task_type,
        run: f.bool("run", true),
        delta: f.bool("delta", true),
        readme: f.string("readme").map(&at),
        input_file,
        dataset_name: f.string("dataset_name").unwrap_or_else(|| name.to_string()),
        dataset_id_column: f.string("dataset_id_column").unwrap_or_else(|| "ReqID".to_string()),
        dataset_columns: f.list("dataset_columns"),
        result_columns: f.list("result_columns"),
        instructions: f.string("instructions").map(&at),
        resources: f.string("resources").map(&at),
        output_path,
        chunk_size,
        max_items,
        execute: f.bool("execute", true),
        analyze: f.bool("analyze", true),
        analysis_function: analysis_function.unwrap_or(AnalysisKind::ClassifyRequirements),
        verbose: f.bool("verbose", false),
        version_tag,
        architecture_file: f.string("architecture_file").map(&at),
        gold_file: f.string("gold_file").map(&at),
        duplicates_file: f.string("duplicates_file").map(&at),
        prompt_version,
        project_dir,
    };
    if let Err(e) = cfg.analysis_function.validate(&cfg) {
        f.errors.extend(e);
    }
    if f.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(invalid(name, f.errors))
    }
}
