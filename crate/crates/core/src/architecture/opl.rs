//! OPL sentence parser.
//!
//! The accepted grammar is the controlled-language subset used by OPCloud
//! exports: thing declarations, state enumerations, and the structural,
//! procedural and unfolding sentences listed in [`Pattern`]. Lines may carry
//! list numbering and `**bold**` markers; both are removed before matching.
//! Names may carry a model alias in braces, e.g. `Navigating {NAV}`.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use super::{
    Affiliation, ArchitectureError, ArchitectureGraph, Essence, OplRelation, OplThing, RelationKind, SourceFormat,
    ThingKind,
};
use crate::WithWarnings;

static NUMBERING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:\d+[.)]|[-*])\s+").unwrap());
static DECLARATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?P<subj>.+?) is an? (?:(?P<ess>informatical|physical)(?: and | ))?(?:(?P<aff>systemic|environmental) )?(?P<kind>object|process)$",
    )
    .unwrap()
});
static SUBJECT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<name>.+?)\s*(?:\{(?P<alias>[^}]*)\})?(?:\s+of\s+(?P<qual>.+))?$").unwrap()
});
static STATES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<subj>.+?) can be (?P<states>.+)$").unwrap());
static STATE_CHANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<src>.+?) changes (?P<obj>.+?) from (?P<from>.+?) to (?P<to>.+)$").unwrap()
});
static UNFOLDS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<src>.+?) from \S+ (?P<how>specialization|part|feature|instantiation)-unfolds in \S+ into (?P<list>.+)$")
        .unwrap()
});
static ZOOMS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<src>.+?) from \S+ zooms in \S+ into (?P<list>.+)$").unwrap());
static INSTANCES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<list>.+?) (?:is an instance|are instances) of (?P<cls>.+)$").unwrap()
});
static SPECIALIZES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<list>.+?) (?:is an?|are) (?P<gen>.+)$").unwrap());
static ELIDED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:,\s*|\s+)(?:and\s+|as well as\s+)?(?:one|two|three|four|five|\d+) more (?:operations?|attributes?|parts?|features?)")
        .unwrap()
});
static LIST_SEPARATOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r",\s*as well as\s+|,\s*and\s+|,\s*|\s+as well as\s+|\s+and\s+").unwrap());

/// Binary relation keywords: `<source> <keyword> <list>`.
const BINARY: &[(&str, RelationKind)] = &[
    (" exhibits ", RelationKind::Exhibition),
    (" consists of ", RelationKind::Aggregation),
    (" requires ", RelationKind::Requires),
    (" yields ", RelationKind::Yields),
    (" handles ", RelationKind::Handles),
];

#[derive(Debug, Clone)]
struct Sentence {
    line: usize,
    text: String,
}

impl Sentence {
    fn context(&self) -> String {
        format!("line {}: {}", self.line, self.text)
    }
}

#[derive(Debug)]
enum Pattern {
    Declaration { subject: String, kind: ThingKind, essence: Essence, affiliation: Affiliation },
    States { subject: String, states: Vec<String> },
    /// `sources` is a single name except for list-subject forms.
    Relation { kind: RelationKind, sources: String, targets: String, reversed: bool },
    StateChange { process: String, object: String, from: String, to: String },
}

/// Parses OPL text into a linked [`ArchitectureGraph`].
///
/// Sentences that match no known pattern are reported as warnings.
pub fn parse_opl(text: &str) -> Result<WithWarnings<ArchitectureGraph>, ArchitectureError> {
    let mut warnings = Vec::new();
    let mut patterns = Vec::new();

    for sentence in sentences(text) {
        match classify(&sentence.text) {
            Some(p) => patterns.push((sentence, p)),
            None => warnings.push(format!("unrecognized sentence ({})", sentence.context())),
        }
    }

    // Declarations first so that relations may reference things declared later.
    let mut things: Vec<OplThing> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (sentence, pattern) in &patterns {
        if let Pattern::Declaration { subject, kind, essence, affiliation } = pattern {
            let (name, alias, qualifier) = split_subject(subject);
            match index.get(&name) {
                Some(&i) => {
                    let existing = &mut things[i];
                    if existing.kind != *kind {
                        return Err(ArchitectureError::ConflictingDeclaration(name));
                    }
                    if existing.essence != *essence || existing.affiliation != *affiliation {
                        warnings.push(format!(
                            "`{name}` redeclared with different essence/affiliation; keeping the first ({})",
                            sentence.context()
                        ));
                    }
                    if existing.alias.is_none() {
                        existing.alias = alias;
                    }
                    if existing.qualifier.is_none() {
                        existing.qualifier = qualifier;
                    }
                }
                None => {
                    index.insert(name.clone(), things.len());
                    things.push(OplThing {
                        name,
                        kind: *kind,
                        essence: *essence,
                        affiliation: *affiliation,
                        qualifier,
                        alias,
                        states: Vec::new(),
                    });
                }
            }
        }
    }
    if things.is_empty() {
        return Err(ArchitectureError::EmptyModel);
    }

    let resolver = Resolver { names: things.iter().map(|t| t.name.clone()).collect() };
    let mut relations = Vec::new();
    for (sentence, pattern) in &patterns {
        match pattern {
            Pattern::Declaration { .. } => {}
            Pattern::States { subject, states } => {
                let name = resolver.one(subject, sentence)?;
                let thing = &mut things[index[&name]];
                for s in states {
                    if !thing.states.contains(s) {
                        thing.states.push(s.clone());
                    }
                }
            }
            Pattern::Relation { kind, sources, targets, reversed } => {
                let targets = strip_elided(targets, sentence, &mut warnings);
                let sources = resolver.list(sources, sentence)?;
                let targets = resolver.list(&targets, sentence)?;
                if *reversed {
                    // `A and B are C`: C is the general/class, A and B the refinements.
                    for general in targets {
                        relations.push(OplRelation::new(*kind, general, sources.clone()));
                    }
                } else {
                    for source in sources {
                        relations.push(OplRelation::new(*kind, source, targets.clone()));
                    }
                }
            }
            Pattern::StateChange { process, object, from, to } => {
                let process = resolver.one(process, sentence)?;
                let object = resolver.one(object, sentence)?;
                let declared = &things[index[&object]].states;
                for state in [from, to] {
                    if !declared.is_empty() && !declared.contains(state) {
                        warnings.push(format!("`{object}` has no declared state `{state}` ({})", sentence.context()));
                    }
                }
                let mut rel = OplRelation::new(RelationKind::StateChange, process, vec![object]);
                rel.state_from = Some(from.clone());
                rel.state_to = Some(to.clone());
                relations.push(rel);
            }
        }
    }

    let graph = ArchitectureGraph::new(things, relations, SourceFormat::Opl)?;
    Ok(WithWarnings::new(graph, warnings))
}

fn sentences(text: &str) -> Vec<Sentence> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let stripped = NUMBERING.replace(raw, "");
            let mut s = stripped.replace("**", "");
            s = s.split_whitespace().collect::<Vec<_>>().join(" ");
            let s = s.trim_end_matches('.').trim().to_string();
            (!s.is_empty()).then_some(Sentence { line: i + 1, text: s })
        })
        .collect()
}

fn classify(s: &str) -> Option<Pattern> {
    if let Some(c) = DECLARATION.captures(s) {
        let essence = match c.name("ess").map(|m| m.as_str()) {
            Some("physical") => Essence::Physical,
            _ => Essence::Informatical,
        };
        let affiliation = match c.name("aff").map(|m| m.as_str()) {
            Some("environmental") => Affiliation::Environmental,
            _ => Affiliation::Systemic,
        };
        let kind = if &c["kind"] == "process" { ThingKind::Process } else { ThingKind::Object };
        return Some(Pattern::Declaration { subject: c["subj"].to_string(), kind, essence, affiliation });
    }
    if let Some(c) = STATES.captures(s) {
        let states = LIST_SEPARATOR
            .split(&c["states"].replace(" or ", ", "))
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        return Some(Pattern::States { subject: c["subj"].to_string(), states });
    }
    if let Some(c) = STATE_CHANGE.captures(s) {
        return Some(Pattern::StateChange {
            process: c["src"].to_string(),
            object: c["obj"].to_string(),
            from: c["from"].trim().to_string(),
            to: c["to"].trim().to_string(),
        });
    }
    if let Some(c) = UNFOLDS.captures(s) {
        let kind = match &c["how"] {
            "specialization" => RelationKind::Specialization,
            "feature" => RelationKind::Exhibition,
            "instantiation" => RelationKind::Instantiation,
            _ => RelationKind::Aggregation,
        };
        return Some(Pattern::Relation {
            kind,
            sources: c["src"].to_string(),
            targets: c["list"].to_string(),
            reversed: false,
        });
    }
    if let Some(c) = ZOOMS.captures(s) {
        return Some(Pattern::Relation {
            kind: RelationKind::Aggregation,
            sources: c["src"].to_string(),
            targets: c["list"].to_string(),
            reversed: false,
        });
    }
    for (keyword, kind) in BINARY {
        if let Some(pos) = s.find(keyword) {
            return Some(Pattern::Relation {
                kind: *kind,
                sources: s[..pos].to_string(),
                targets: s[pos + keyword.len()..].to_string(),
                reversed: false,
            });
        }
    }
    if let Some(c) = INSTANCES.captures(s) {
        return Some(Pattern::Relation {
            kind: RelationKind::Instantiation,
            sources: c["list"].to_string(),
            targets: c["cls"].to_string(),
            reversed: true,
        });
    }
    if let Some(c) = SPECIALIZES.captures(s) {
        return Some(Pattern::Relation {
            kind: RelationKind::Specialization,
            sources: c["list"].to_string(),
            targets: c["gen"].to_string(),
            reversed: true,
        });
    }
    None
}

/// Splits `Name {ALIAS} of Owner` into its parts.
fn split_subject(subject: &str) -> (String, Option<String>, Option<String>) {
    match SUBJECT.captures(subject.trim()) {
        Some(c) => (
            c["name"].trim().to_string(),
            c.name("alias").map(|m| m.as_str().trim().to_string()).filter(|a| !a.is_empty()),
            c.name("qual").map(|m| m.as_str().trim().to_string()),
        ),
        None => (subject.trim().to_string(), None, None),
    }
}

fn strip_elided(list: &str, sentence: &Sentence, warnings: &mut Vec<String>) -> String {
    if ELIDED.is_match(list) {
        warnings.push(format!("elided features ignored ({})", sentence.context()));
        ELIDED.replace_all(list, "").trim().to_string()
    } else {
        list.to_string()
    }
}

struct Resolver {
    names: HashSet<String>,
}

impl Resolver {
    /// Exact or singular match, no qualifier stripping.
    fn strict(&self, raw: &str) -> Option<String> {
        let raw = raw.trim();
        let (name, alias, qualifier) = split_subject(raw);
        let base = if alias.is_some() && qualifier.is_none() { name.as_str() } else { raw };
        if self.names.contains(base) {
            return Some(base.to_string());
        }
        if let Some(stem) = base.strip_suffix("ies") {
            let singular = format!("{stem}y");
            if self.names.contains(&singular) {
                return Some(singular);
            }
        }
        base.strip_suffix('s').filter(|s| self.names.contains(*s)).map(str::to_string)
    }

    /// Like [`Resolver::strict`], falling back to the name without its `of X` owner phrase.
    fn loose(&self, raw: &str) -> Option<String> {
        self.strict(raw).or_else(|| {
            let (name, _, qualifier) = split_subject(raw);
            qualifier.and(self.strict(&name))
        })
    }

    fn one(&self, raw: &str, sentence: &Sentence) -> Result<String, ArchitectureError> {
        self.loose(raw).ok_or_else(|| ArchitectureError::UnresolvedName {
            name: raw.trim().to_string(),
            context: sentence.context(),
        })
    }

    /// Resolves an enumeration such as `A, B and C`, preferring the longest
    /// run of pieces that names a declared thing (names may contain `and`).
    fn list(&self, raw: &str, sentence: &Sentence) -> Result<Vec<String>, ArchitectureError> {
        let raw = raw.trim();
        if let Some(name) = self.strict(raw) {
            return Ok(vec![name]);
        }
        let mut spans = Vec::new();
        let mut start = 0;
        for sep in LIST_SEPARATOR.find_iter(raw) {
            spans.push((start, sep.start()));
            start = sep.end();
        }
        spans.push((start, raw.len()));

        let mut out = Vec::new();
        let mut i = 0;
        while i < spans.len() {
            let longest = (i..spans.len())
                .rev()
                .find_map(|j| self.strict(&raw[spans[i].0..spans[j].1]).map(|name| (name, j)));
            let piece = &raw[spans[i].0..spans[i].1];
            match longest.or_else(|| self.loose(piece).map(|name| (name, i))) {
                Some((name, j)) => {
                    out.push(name);
                    i = j + 1;
                }
                None => {
                    return Err(ArchitectureError::UnresolvedName {
                        name: piece.trim().to_string(),
                        context: sentence.context(),
                    })
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declaration_with_owner_phrase() {
        let g = parse_opl("7. **Subsystem** of **System** is an informatical and systemic object.").unwrap();
        let t = &g.value.things()[0];
        assert_eq!(t.name, "Subsystem");
        assert_eq!(t.kind, ThingKind::Object);
        assert_eq!(t.essence, Essence::Informatical);
        assert_eq!(t.affiliation, Affiliation::Systemic);
        assert_eq!(t.qualifier.as_deref(), Some("System"));
    }

    #[test]
    fn empty_text_is_empty_model() {
        assert!(matches!(parse_opl(""), Err(ArchitectureError::EmptyModel)));
        assert!(matches!(parse_opl("\n  \n"), Err(ArchitectureError::EmptyModel)));
    }

    #[test]
    fn alias_in_braces() {
        let g = parse_opl("Navigating {NAV} of Navigation is a physical and systemic process.").unwrap();
        let t = &g.value.things()[0];
        assert_eq!(t.name, "Navigating");
        assert_eq!(t.alias.as_deref(), Some("NAV"));
        assert_eq!(t.essence, Essence::Physical);
        assert_eq!(t.kind, ThingKind::Process);
    }

    #[test]
    fn list_with_oxford_comma_and_as_well_as() {
        let text = "A is an informatical and systemic object.\n\
                    B is an informatical and systemic object.\n\
                    C is an informatical and systemic object.\n\
                    D is an informatical and systemic process.\n\
                    A exhibits B and C, as well as D.";
        let g = parse_opl(text).unwrap().value;
        let rel = &g.relations()[0];
        assert_eq!(rel.kind, RelationKind::Exhibition);
        assert_eq!(rel.targets, ["B", "C", "D"]);
    }

    #[test]
    fn names_containing_and_resolve_greedily() {
        let text = "M is a physical and systemic object.\n\
                    Pyrotechnic and Electrical Activation is a physical and systemic process.\n\
                    Ready and Safe Check is a physical and systemic process.\n\
                    M exhibits Pyrotechnic and Electrical Activation and Ready and Safe Check.";
        let g = parse_opl(text).unwrap().value;
        assert_eq!(g.relations()[0].targets, ["Pyrotechnic and Electrical Activation", "Ready and Safe Check"]);
    }

    #[test]
    fn plural_and_qualified_references() {
        let text = "Safety Requirement is an informatical and systemic object.\n\
                    Functional Safety Requirement is an informatical and systemic object.\n\
                    Probabilistic Safety Requirement is an informatical and systemic object.\n\
                    Functional Safety Requirement and Probabilistic Safety Requirement are Safety Requirements.";
        let g = parse_opl(text).unwrap().value;
        let rel = &g.relations()[0];
        assert_eq!(rel.kind, RelationKind::Specialization);
        assert_eq!(rel.source, "Safety Requirement");
        assert_eq!(rel.targets, ["Functional Safety Requirement", "Probabilistic Safety Requirement"]);
    }

    #[test]
    fn state_change_with_states() {
        let text = "S of X is an informatical and systemic object.\n\
                    X is an informatical and systemic object.\n\
                    S of X can be basic or enhanced.\n\
                    P is an informatical and systemic process.\n\
                    P changes S of X from basic to enhanced.";
        let g = parse_opl(text).unwrap();
        assert!(g.warnings.is_empty(), "{:?}", g.warnings);
        let g = g.value;
        assert_eq!(g.thing("S").unwrap().states, ["basic", "enhanced"]);
        let rel = &g.relations()[0];
        assert_eq!(rel.kind, RelationKind::StateChange);
        assert_eq!(rel.source, "P");
        assert_eq!(rel.targets, ["S"]);
        assert_eq!(rel.state_from.as_deref(), Some("basic"));
        assert_eq!(rel.state_to.as_deref(), Some("enhanced"));
    }

    #[test]
    fn unknown_state_is_warned() {
        let text = "S is an informatical and systemic object.\n\
                    S can be on or off.\n\
                    P is an informatical and systemic process.\n\
                    P changes S from on to broken.";
        let g = parse_opl(text).unwrap();
        assert_eq!(g.warnings.len(), 1);
        assert!(g.warnings[0].contains("broken"));
    }

    #[test]
    fn unrecognized_sentence_is_a_warning() {
        let text = "A is an informatical and systemic object.\nA flies over the rainbow.";
        let g = parse_opl(text).unwrap();
        assert_eq!(g.warnings.len(), 1);
        assert!(g.warnings[0].contains("line 2"));
    }

    #[test]
    fn unresolved_name_is_an_error() {
        let text = "A is an informatical and systemic object.\nA consists of Ghost.";
        match parse_opl(text) {
            Err(ArchitectureError::UnresolvedName { name, context }) => {
                assert_eq!(name, "Ghost");
                assert!(context.starts_with("line 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn elided_operations_are_dropped_with_warning() {
        let text = "A is an informatical and systemic object.\n\
                    B is an informatical and systemic object.\n\
                    A exhibits B and one more operation.";
        let g = parse_opl(text).unwrap();
        assert_eq!(g.value.relations()[0].targets, ["B"]);
        assert_eq!(g.warnings.len(), 1);
    }

    #[test]
    fn unfolding_sentences() {
        let text = "P is an informatical and systemic process.\n\
                    Q is an informatical and systemic process.\n\
                    R is an informatical and systemic process.\n\
                    P from SD part-unfolds in SD2 into Q and R.";
        let g = parse_opl(text).unwrap().value;
        assert_eq!(g.relations()[0].kind, RelationKind::Aggregation);
        assert_eq!(g.relations()[0].targets, ["Q", "R"]);
    }

    #[test]
    fn instances_point_from_class() {
        let text = "K is an informatical and systemic object.\n\
                    E is an informatical and systemic object.\n\
                    F is an informatical and systemic object.\n\
                    E and F are instances of K.";
        let g = parse_opl(text).unwrap().value;
        let rel = &g.relations()[0];
        assert_eq!(rel.kind, RelationKind::Instantiation);
        assert_eq!(rel.source, "K");
        assert_eq!(rel.targets, ["E", "F"]);
    }

    #[test]
    fn conflicting_kind_is_rejected() {
        let text = "A is an informatical and systemic object.\nA is an informatical and systemic process.";
        assert!(matches!(parse_opl(text), Err(ArchitectureError::ConflictingDeclaration(_))));
    }
}
