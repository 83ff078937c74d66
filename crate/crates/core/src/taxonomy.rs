//! Functional / non-functional classification with an NFR subcategory
//! taxonomy, via ordered keyword tables.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Kind, Requirement, RequirementSet};
use crate::exec::{self, Exec};
use crate::text;
use crate::ConfigError;

pub const RULES_RATER_ID: &str = crate::quality_rules::RULES_RATER_ID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NfrCategory {
    Reliability,
    Security,
    Performance,
    Usability,
    Maintainability,
    Portability,
    Compatibility,
    Other,
}

impl NfrCategory {
    pub const ALL: [NfrCategory; 8] = [
        NfrCategory::Reliability,
        NfrCategory::Security,
        NfrCategory::Performance,
        NfrCategory::Usability,
        NfrCategory::Maintainability,
        NfrCategory::Portability,
        NfrCategory::Compatibility,
        NfrCategory::Other,
    ];
}

impl fmt::Display for NfrCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for NfrCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NfrCategory::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown NFR subcategory {s:?}"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassError {
    #[error("a NonFunctional label requires a subcategory")]
    MissingSubcategory,
    #[error("a Functional label cannot carry a subcategory")]
    UnexpectedSubcategory,
}

/// A label with its subcategory; the subcategory is present iff the label
/// is NonFunctional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawClass", into = "RawClass")]
pub struct ReqClass {
    label: Kind,
    subcategory: Option<NfrCategory>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    label: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subcategory: Option<NfrCategory>,
}

impl TryFrom<RawClass> for ReqClass {
    type Error = ClassError;

    fn try_from(raw: RawClass) -> Result<Self, Self::Error> {
        ReqClass::new(raw.label, raw.subcategory)
    }
}

impl From<ReqClass> for RawClass {
    fn from(c: ReqClass) -> Self {
        RawClass { label: c.label, subcategory: c.subcategory }
    }
}

impl ReqClass {
    pub fn new(label: Kind, subcategory: Option<NfrCategory>) -> Result<Self, ClassError> {
        match (label, subcategory) {
            (Kind::NonFunctional, None) => Err(ClassError::MissingSubcategory),
            (Kind::Functional, Some(_)) => Err(ClassError::UnexpectedSubcategory),
            _ => Ok(Self { label, subcategory }),
        }
    }

    pub const fn functional() -> Self {
        Self { label: Kind::Functional, subcategory: None }
    }

    pub const fn non_functional(subcategory: NfrCategory) -> Self {
        Self { label: Kind::NonFunctional, subcategory: Some(subcategory) }
    }

    pub fn label(&self) -> Kind {
        self.label
    }

    pub fn subcategory(&self) -> Option<NfrCategory> {
        self.subcategory
    }
}

impl fmt::Display for ReqClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subcategory {
            Some(sub) => write!(f, "{}/{}", self.label, sub),
            None => write!(f, "{}", self.label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub requirement_id: String,
    pub rater_id: String,
    pub class: ReqClass,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordTable {
    pub subcategory: NfrCategory,
    pub keywords: Vec<String>,
}

/// Ordered keyword tables; earlier tables take priority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaxonomyConfig {
    pub tables: Vec<KeywordTable>,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        let table = |subcategory, words: &[&str]| KeywordTable {
            subcategory,
            keywords: words.iter().map(|w| w.to_string()).collect(),
        };
        Self {
            tables: vec![
                table(NfrCategory::Security, &[
                    "encrypt", "encrypted", "encryption", "authentication", "authenticate", "authenticated",
                    "authorization", "authorized", "unauthorized", "password", "passwords", "access control",
                    "audit trail", "confidential", "confidentiality", "tamper",
                ]),
                table(NfrCategory::Reliability, &[
                    "available", "availability", "mtbf", "failure", "failures", "uptime", "fault tolerant",
                    "fault tolerance", "recover", "recovery", "redundant", "redundancy", "data loss",
                ]),
                table(NfrCategory::Performance, &[
                    "latency", "within", "throughput", "response time", "per second", "concurrent",
                    "simultaneously", "battery life",
                ]),
                table(NfrCategory::Usability, &[
                    "usability", "usable", "learnability", "training", "user interface", "accessible",
                    "accessibility", "legible", "readable", "gloves",
                ]),
                table(NfrCategory::Maintainability, &[
                    "maintainability", "maintainable", "maintenance", "modular", "upgrade", "upgradable",
                    "firmware update", "diagnostics", "serviceable",
                ]),
                table(NfrCategory::Portability, &[
                    "portable", "portability", "install", "installation", "operating system", "platforms",
                    "browser", "browsers", "mobile devices",
                ]),
                table(NfrCategory::Compatibility, &[
                    "compatible", "compatibility", "interoperate", "interoperability", "interface with",
                    "integrate with", "hl7", "coexist",
                ]),
                table(NfrCategory::Other, &[
                    "comply", "compliance", "regulation", "regulations", "standard", "sterilization",
                    "autoclave", "temperature", "humidity", "weigh", "weight", "dimensions",
                ]),
            ],
        }
    }
}

impl TaxonomyConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let config: TaxonomyConfig = serde_json::from_str(&raw).map_err(|e| ConfigError::parse(path, e))?;
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = config.tables.iter().find(|t| !seen.insert(t.subcategory)) {
            return Err(ConfigError::Invalid(format!("subcategory {} listed twice", dup.subcategory)));
        }
        Ok(config)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &String> {
        self.tables.iter().flat_map(|t| &t.keywords)
    }
}

pub fn classify_rule_based(req: &Requirement, config: &TaxonomyConfig) -> ClassificationRecord {
    let tokens = text::tokenize(&req.text);
    let hit = config.tables.iter().find_map(|table| {
        let matched: Vec<String> = table
            .keywords
            .iter()
            .filter(|k| !text::find_entry(&tokens, &text::entry_tokens(k)).is_empty())
            .cloned()
            .collect();
        (!matched.is_empty()).then_some((table.subcategory, matched))
    });
    let (class, rationale) = match hit {
        Some((sub, matched)) => {
            let cited = matched.iter().map(|k| format!("\"{k}\"")).collect::<Vec<_>>().join(", ");
            (ReqClass::non_functional(sub), format!("matched {sub} keyword(s) {cited}"))
        }
        None => (ReqClass::functional(), "no NFR keyword matched; functional by default".to_string()),
    };
    ClassificationRecord {
        requirement_id: req.id.clone(),
        rater_id: RULES_RATER_ID.to_string(),
        class,
        rationale,
        confidence: None,
    }
}

pub fn classify_corpus(set: &RequirementSet, config: &TaxonomyConfig) -> Vec<ClassificationRecord> {
    classify_corpus_with(set, config, Exec::default())
}

pub fn classify_corpus_with(set: &RequirementSet, config: &TaxonomyConfig, exec: Exec) -> Vec<ClassificationRecord> {
    exec::map_ordered(exec, &set.requirements, |r| classify_rule_based(r, config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    pub n_scored: usize,
    pub n_correct: usize,
    /// Absent when nothing could be scored.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("classification refers to unknown requirement {0:?}")]
    UnknownRequirement(String),
}

/// Label accuracy of `records` against the corpus's author hints. Only
/// requirements that carry a hint are scored.
pub fn score_against_hints(records: &[ClassificationRecord], set: &RequirementSet) -> Result<LabelAccuracy, ScoreError> {
    let mut n_scored = 0;
    let mut n_correct = 0;
    for record in records {
        let req = set.get(&record.requirement_id).ok_or_else(|| ScoreError::UnknownRequirement(record.requirement_id.clone()))?;
        if let Some(hint) = req.kind_hint {
            n_scored += 1;
            n_correct += usize::from(hint == record.class.label());
        }
    }
    let accuracy = (n_scored > 0).then(|| n_correct as f64 / n_scored as f64);
    Ok(LabelAccuracy { n_scored, n_correct, accuracy })
}

/// One JSON object per line.
pub fn to_json_lines(records: &[ClassificationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_json_lines(records: &[ClassificationRecord], path: &Path) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(to_json_lines(records).as_bytes())?;
    file.sync_all()
}

pub fn read_json_lines(path: &Path) -> Result<Vec<ClassificationRecord>, ConfigError> {
    let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
    parse_json_lines(&raw).map_err(|e| ConfigError::parse(path, e))
}

pub fn parse_json_lines(raw: &str) -> Result<Vec<ClassificationRecord>, serde_json::Error> {
    raw.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Level;

    fn classify(text: &str) -> ClassificationRecord {
        classify_rule_based(&Requirement::new("SR-1", Level::System, text), &TaxonomyConfig::default())
    }

    #[test]
    fn keyword_examples() {
        let r = classify("The system shall encrypt all stored records.");
        assert_eq!(r.class, ReqClass::non_functional(NfrCategory::Security));
        assert!(r.rationale.contains("\"encrypt\""));

        let r = classify("The system shall send an alert when equipment leaves the room.");
        assert_eq!(r.class, ReqClass::functional());
        assert_eq!(r.rationale, "no NFR keyword matched; functional by default");

        let r = classify("The system shall be available 99.9% of the time.");
        assert_eq!(r.class, ReqClass::non_functional(NfrCategory::Reliability));
        assert!(r.rationale.contains("\"available\""));
        assert_eq!(r.rater_id, "rules-v1");
    }

    #[test]
    fn priority_order_decides() {
        // "password" (Security) outranks "within" (Performance)
        let r = classify("The system shall lock the password prompt within 30 seconds.");
        assert_eq!(r.class.subcategory(), Some(NfrCategory::Security));
    }

    #[test]
    fn class_invariant_enforced_on_deserialize() {
        assert!(serde_json::from_str::<ReqClass>(r#"{"label":"NonFunctional"}"#).is_err());
        assert!(serde_json::from_str::<ReqClass>(r#"{"label":"Functional","subcategory":"Security"}"#).is_err());
        let c: ReqClass = serde_json::from_str(r#"{"label":"NonFunctional","subcategory":"Usability"}"#).unwrap();
        assert_eq!(c.to_string(), "NonFunctional/Usability");
    }

    fn hinted(hints: &[Option<Kind>]) -> RequirementSet {
        RequirementSet::new(
            "h",
            hints
                .iter()
                .enumerate()
                .map(|(i, h)| Requirement { kind_hint: *h, ..Requirement::new(format!("R{i}"), Level::System, "x") })
                .collect(),
        )
    }

    fn rec(i: usize, class: ReqClass) -> ClassificationRecord {
        ClassificationRecord { requirement_id: format!("R{i}"), rater_id: "t".into(), class, rationale: "r".into(), confidence: None }
    }

    #[test]
    fn accuracy_three_of_four() {
        let f = Some(Kind::Functional);
        let nf = Some(Kind::NonFunctional);
        let set = hinted(&[f, f, nf, nf, None]);
        let perf = ReqClass::non_functional(NfrCategory::Performance);
        let records = vec![rec(0, ReqClass::functional()), rec(1, perf), rec(2, perf), rec(3, perf), rec(4, perf)];
        let acc = score_against_hints(&records, &set).unwrap();
        assert_eq!((acc.n_scored, acc.n_correct, acc.accuracy), (4, 3, Some(0.75)));
    }

    #[test]
    fn accuracy_edge_cases() {
        let set = hinted(&[None, None]);
        let acc = score_against_hints(&[rec(0, ReqClass::functional())], &set).unwrap();
        assert_eq!((acc.n_scored, acc.accuracy), (0, None));
        assert_eq!(score_against_hints(&[rec(9, ReqClass::functional())], &set), Err(ScoreError::UnknownRequirement("R9".into())));
        let set = hinted(&[Some(Kind::Functional)]);
        assert_eq!(score_against_hints(&[rec(0, ReqClass::functional())], &set).unwrap().accuracy, Some(1.0));
    }

    #[test]
    fn json_lines_round_trip() {
        let records = vec![rec(0, ReqClass::functional()), rec(1, ReqClass::non_functional(NfrCategory::Other))];
        let text = to_json_lines(&records);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_json_lines(&text).unwrap(), records);
    }
}
