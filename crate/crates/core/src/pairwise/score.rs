use serde::{Deserialize, Serialize};

use super::{GoldPairs, PairFinding, PairKind, PairwiseError};

pub const DEFAULT_THRESHOLD: f64 = 80.0;

/// Detection rate of one finding kind against known pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub kind: PairKind,
    pub detected_true: usize,
    pub gold_total: usize,
    pub false_positive: usize,
    /// `100 * detected_true / gold_total`, unrounded.
    pub rate: f64,
    pub threshold: f64,
    /// `rate > threshold`.
    pub passed: bool,
}

pub fn score(findings: &[PairFinding], gold: &GoldPairs) -> Result<PairScore, PairwiseError> {
    score_with_threshold(findings, gold, DEFAULT_THRESHOLD)
}

/// Only findings of the gold set's kind count; each pair counts once.
pub fn score_with_threshold(
    findings: &[PairFinding],
    gold: &GoldPairs,
    threshold: f64,
) -> Result<PairScore, PairwiseError> {
    if gold.is_empty() {
        return Err(PairwiseError::EmptyGold);
    }
    let found: std::collections::BTreeSet<(String, String)> =
        findings.iter().filter(|f| f.kind == gold.kind).map(PairFinding::pair).collect();
    let detected_true = found.iter().filter(|p| gold.pairs.contains(*p)).count();
    let false_positive = found.len() - detected_true;
    let rate = 100.0 * detected_true as f64 / gold.len() as f64;
    Ok(PairScore {
        kind: gold.kind,
        detected_true,
        gold_total: gold.len(),
        false_positive,
        rate,
        threshold,
        passed: rate > threshold,
    })
}
