use serde::{Deserialize, Serialize};

use crate::classify::ClassifiedRequirement;
use crate::gateway::{PromptEnvelope, PromptRow};

const V1: &str = include_str!("../../assets/duplicates_v1.txt");
const V2: &str = include_str!("../../assets/duplicates_v2.txt");
const V3: &str = include_str!("../../assets/duplicates_v3.txt");
const CONTRADICTIONS: &str = include_str!("../../assets/contradictions.txt");
const OUTPUT: &str = include_str!("../../assets/pair_output.txt");

/// Duplicate prompt revision.
///
/// * `V1`: bare request.
/// * `V2`: similar requirements of different functions are not duplicates.
/// * `V3`: such pairs are complementary, and pairs with an `_OF_` member
///   may be refinements; the `_OF_` cluster is sent along with every
///   function cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptVersion {
    V1,
    V2,
    #[default]
    V3,
}

impl std::str::FromStr for PromptVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V1" | "1" => Ok(Self::V1),
            "V2" | "2" => Ok(Self::V2),
            "V3" | "3" => Ok(Self::V3),
            other => Err(format!("unknown prompt version `{other}` (V1, V2 or V3)")),
        }
    }
}

/// What a pairwise prompt asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairTask {
    Duplicates(PromptVersion),
    Contradictions,
}

impl PairTask {
    fn rules(self) -> &'static str {
        match self {
            PairTask::Duplicates(PromptVersion::V1) => V1,
            PairTask::Duplicates(PromptVersion::V2) => V2,
            PairTask::Duplicates(PromptVersion::V3) => V3,
            PairTask::Contradictions => CONTRADICTIONS,
        }
    }

    fn relations(self) -> &'static str {
        match self {
            PairTask::Duplicates(PromptVersion::V3) => "Duplicate | Complementary | Refinement",
            PairTask::Duplicates(_) => "Duplicate",
            PairTask::Contradictions => "Contradiction",
        }
    }
}

/// Prompt for one cluster. Rows show the rewritten statement and the function alias.
pub fn build_pair_prompt(task: PairTask, cluster: &str, members: &[&ClassifiedRequirement]) -> PromptEnvelope {
    let instructions = format!("{}\n{}", task.rules().trim_end(), OUTPUT.replace("{relations}", task.relations()));
    let rows = members
        .iter()
        .map(|r| PromptRow::labeled(&r.req_id, [("Function", r.function.as_str()), ("Requirement", r.best_text())]))
        .collect();
    PromptEnvelope::new(instructions).dataset(format!("{cluster} Requirements"), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::requirements::Requirement;

    #[test]
    fn versions_are_cumulative_refinements() {
        assert!(V2.starts_with(V1.trim_end()));
        assert!(V3.starts_with(V1.trim_end()));
        assert!(V2.contains("it is not considered duplicate"));
        assert!(V3.contains("it means that they are complementary"));
        assert!(V3.contains("\"_OF_\""));
    }

    #[test]
    fn prompt_contains_rules_rows_and_schema() {
        let mut r = crate::classify::ClassifiedRequirement::unreturned(&Requirement::new("7", "raw"));
        r.function = "NAV".into();
        r.system_requirement = "The drone shall hover.".into();
        let p = build_pair_prompt(PairTask::Duplicates(PromptVersion::V2), "NAV", &[&r]).render();
        assert!(p.starts_with("For all the requirements in the list, mark the duplicate requirements."));
        assert!(p.contains("ReqID 7: Function: NAV\n    Requirement: The drone shall hover.\n"));
        assert!(p.contains("<NAV Requirements>"));
        assert!(p.contains("\"Relation\": \"Duplicate\""));
        let c = build_pair_prompt(PairTask::Contradictions, "NAV", &[&r]).render();
        assert!(c.contains("mark the contradicting requirements"));
    }
}
