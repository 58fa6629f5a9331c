//! Duplicate and contradiction detection over requirement pairs.
//!
//! Requirements are clustered by function ([`cluster_by_function`]); each
//! cluster is sent with a duplicate prompt ([`detect_duplicates`]), then
//! duplicates are consolidated and the survivors are sent with a
//! contradiction prompt ([`detect_contradictions`]). [`score`] compares
//! findings with known pairs.

mod detect;
mod prompts;
mod score;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;

pub use detect::{
    cluster_by_function, consolidate, detect_contradictions, detect_duplicates, pair_record_schema, plan_contradictions,
    plan_duplicates, validate_exclusive, Clusters, Consolidated, PairAnalysis, PairCall, PairPlan, QuarantinedPair,
};
pub use prompts::{build_pair_prompt, PairTask, PromptVersion};
pub use score::{score, score_with_threshold, PairScore, DEFAULT_THRESHOLD};

#[derive(Debug, Error)]
pub enum PairwiseError {
    #[error("pair ({a}, {b}) is reported both as {first} and as {second}")]
    ConflictingKinds { a: String, b: String, first: PairKind, second: PairKind },
    #[error("gold pair set is empty")]
    EmptyGold,
    #[error("gold pairs: {0}")]
    Gold(String),
    #[error("cluster {cluster}: {source}")]
    Gateway { cluster: String, source: GatewayError },
    #[error("cluster {cluster}: unparseable reply: {source}")]
    Parse { cluster: String, source: GatewayError },
    #[error("{replies} replies for {calls} calls")]
    ReplyCount { replies: usize, calls: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairKind {
    Duplicate,
    Complementary,
    Refinement,
    Contradiction,
}

impl PairKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Duplicate => "Duplicate",
            PairKind::Complementary => "Complementary",
            PairKind::Refinement => "Refinement",
            PairKind::Contradiction => "Contradiction",
        }
    }

    /// Kinds a duplicate prompt may produce.
    pub fn is_duplicate_family(self) -> bool {
        self != PairKind::Contradiction
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let k = s.trim().to_ascii_lowercase();
        match k.trim_end_matches('s') {
            "duplicate" | "duplicated" => Ok(PairKind::Duplicate),
            "complementary" | "complement" => Ok(PairKind::Complementary),
            "refinement" => Ok(PairKind::Refinement),
            "contradiction" | "contradicting" | "contradictory" | "conflict" | "conflicting" => {
                Ok(PairKind::Contradiction)
            }
            _ => Err(format!("unknown relation `{s}`")),
        }
    }
}

/// `(a, b)` ordered so that `a < b`; `None` for a self-pair.
pub fn canonical_pair(x: &str, y: &str) -> Option<(String, String)> {
    match x.cmp(y) {
        std::cmp::Ordering::Less => Some((x.to_string(), y.to_string())),
        std::cmp::Ordering::Greater => Some((y.to_string(), x.to_string())),
        std::cmp::Ordering::Equal => None,
    }
}

/// A judged relation between two requirements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFinding {
    pub kind: PairKind,
    /// Always less than `req_b`.
    pub req_a: String,
    pub req_b: String,
    pub function_a: String,
    pub function_b: String,
    pub rationale: String,
    /// Cluster alias whose call produced the finding.
    pub source_chunk: String,
    pub notes: Vec<String>,
}

impl PairFinding {
    pub fn pair(&self) -> (String, String) {
        (self.req_a.clone(), self.req_b.clone())
    }
}

/// Known pairs of one kind, used to score findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPairs {
    pub kind: PairKind,
    pub pairs: BTreeSet<(String, String)>,
}

impl GoldPairs {
    pub fn new<I, A, B>(kind: PairKind, pairs: I) -> Result<Self, PairwiseError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            let (a, b) = (a.as_ref().trim(), b.as_ref().trim());
            let pair = canonical_pair(a, b).ok_or_else(|| PairwiseError::Gold(format!("self-pair ({a}, {a})")))?;
            set.insert(pair);
        }
        Ok(Self { kind, pairs: set })
    }

    /// Reads a two-column CSV of requirement ids with a header row.
    pub fn load_csv(path: impl AsRef<Path>, kind: PairKind) -> Result<Self, PairwiseError> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| PairwiseError::Gold(format!("{}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| PairwiseError::Gold(format!("{}: {e}", path.display())))?;
            if rec.len() < 2 {
                return Err(PairwiseError::Gold(format!("{}: row with fewer than 2 columns", path.display())));
            }
            pairs.push((rec[0].to_string(), rec[1].to_string()));
        }
        Self::new(kind, pairs)
    }

    /// Fails if any pair names an id outside `known`.
    pub fn check_ids<'a>(&self, known: impl IntoIterator<Item = &'a str>) -> Result<(), PairwiseError> {
        let known: BTreeSet<&str> = known.into_iter().collect();
        let unknown: Vec<&str> = self
            .pairs
            .iter()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .filter(|id| !known.contains(id))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(PairwiseError::Gold(format!("unknown requirement ids {unknown:?}")))
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_ordering() {
        assert_eq!(canonical_pair("b", "a"), Some(("a".into(), "b".into())));
        assert_eq!(canonical_pair("a", "a"), None);
    }

    #[test]
    fn gold_dedupes_mirrored_pairs() {
        let g = GoldPairs::new(PairKind::Duplicate, [("2", "1"), ("1", "2"), ("3", "4")]).unwrap();
        assert_eq!(g.len(), 2);
        assert!(GoldPairs::new(PairKind::Duplicate, [("1", "1")]).is_err());
        assert!(g.check_ids(["1", "2", "3"]).is_err());
        assert!(g.check_ids(["1", "2", "3", "4"]).is_ok());
    }

    #[test]
    fn relation_names() {
        assert_eq!("Duplicates".parse(), Ok(PairKind::Duplicate));
        assert_eq!("contradicting".parse(), Ok(PairKind::Contradiction));
        assert_eq!("Refinement".parse(), Ok(PairKind::Refinement));
        assert!("similar".parse::<PairKind>().is_err());
    }
}
