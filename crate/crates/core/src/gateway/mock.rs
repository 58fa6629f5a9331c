use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Backend, Completion, GatewayError, LlmRequestParams};

/// Lowercase hex SHA-256 of the rendered prompt.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    keywords: Vec<String>,
    file: String,
}

/// Replays canned replies from a fixture directory.
///
/// Lookup order: `<dir>/<sha256 of prompt>.json`, then the first line of
/// `<dir>/rules.tsv` whose keywords all occur in the prompt
/// (case-insensitive). A rule line is tab-separated: one or more keywords,
/// then the reply file name. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone)]
pub struct MockBackend {
    dir: PathBuf,
    rules: Vec<Rule>,
}

impl MockBackend {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(GatewayError::Fixture(format!("{} is not a directory", dir.display())));
        }
        let rules_path = dir.join("rules.tsv");
        let rules = if rules_path.exists() {
            let text = fs::read_to_string(&rules_path)
                .map_err(|e| GatewayError::Fixture(format!("{}: {e}", rules_path.display())))?;
            parse_rules(&text)?
        } else {
            Vec::new()
        };
        Ok(Self { dir, rules })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Fixture file that would answer `prompt`, if any.
    pub fn resolve(&self, prompt: &str) -> Option<PathBuf> {
        let by_hash = self.dir.join(format!("{}.json", prompt_hash(prompt)));
        if by_hash.is_file() {
            return Some(by_hash);
        }
        let haystack = prompt.to_lowercase();
        self.rules
            .iter()
            .find(|r| r.keywords.iter().all(|k| haystack.contains(k.as_str())))
            .map(|r| self.dir.join(&r.file))
    }
}

fn parse_rules(text: &str) -> Result<Vec<Rule>, GatewayError> {
    let mut rules = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).filter(|c| !c.is_empty()).collect();
        let Some((file, keywords)) = cols.split_last().filter(|(_, k)| !k.is_empty()) else {
            return Err(GatewayError::Fixture(format!("rules.tsv line {}: need keyword(s) and a file", n + 1)));
        };
        rules.push(Rule { keywords: keywords.iter().map(|k| k.to_lowercase()).collect(), file: file.to_string() });
    }
    Ok(rules)
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &str, _params: &LlmRequestParams) -> Result<Completion, GatewayError> {
        let path = self.resolve(prompt).ok_or_else(|| GatewayError::NotFixtured { hash: prompt_hash(prompt) })?;
        let text = fs::read_to_string(&path).map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(Completion::text(text))
    }

    fn name(&self) -> &str {
        "mock"
    }
}
