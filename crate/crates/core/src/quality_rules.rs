//! Deterministic lexicon- and pattern-driven checks for the seven
//! "good requirement" criteria.
//!
//! Detection heuristics per criterion:
//!
//! | criterion   | rule id                               | trigger                                               | default severity |
//! |-------------|---------------------------------------|-------------------------------------------------------|------------------|
//! | Essential   | (corpus level) near-duplicate pairs   | token Jaccard ≥ threshold                             | n/a              |
//! | Independent | `independent.implementation-binding`  | implementation lexicon; connectives extend to clause  | Violation        |
//! | Unambiguous | `unambiguous.vague-term`              | vague lexicon                                         | Violation        |
//! | Complete    | `complete.tbd-marker`                 | TBD/TBR/TBC/TBS markers                               | Violation        |
//! |             | `complete.missing-modal`              | no shall/must/will/should                             | Violation        |
//! |             | `complete.missing-actor`              | nothing before the first modal                        | Violation        |
//! |             | `complete.dangling-pronoun`           | pronoun with no noun-phrase antecedent                | Warning          |
//! | Singular    | `singular.coordinated-modal`          | two modal clauses joined by and/or/but                | Violation        |
//! | Feasible    | `feasible.absolute-term`              | absolutes lexicon                                     | Warning          |
//! | Verifiable  | `verifiable.unmeasurable`             | unverifiable term and no measurable quantity          | Violation        |
//!
//! Essential cannot be judged from a single statement; its per-requirement
//! verdict is always `NotAssessable` and duplicates are reported on the
//! [`QualityReport`] instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Requirement, RequirementSet};
use crate::exec::{self, Exec};
use crate::text::{self, LexiconMatch, Span, Token};
use crate::ConfigError;

pub const RULES_RATER_ID: &str = "rules-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    Essential,
    Independent,
    Unambiguous,
    Complete,
    Singular,
    Feasible,
    Verifiable,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::Essential,
        Criterion::Independent,
        Criterion::Unambiguous,
        Criterion::Complete,
        Criterion::Singular,
        Criterion::Feasible,
        Criterion::Verifiable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Essential => "Essential",
            Criterion::Independent => "Independent",
            Criterion::Unambiguous => "Unambiguous",
            Criterion::Complete => "Complete",
            Criterion::Singular => "Singular",
            Criterion::Feasible => "Feasible",
            Criterion::Verifiable => "Verifiable",
        }
    }

    /// One-line definition used in prompts and annotation guidance.
    pub fn definition(self) -> &'static str {
        match self {
            Criterion::Essential => "The requirement must be necessary.",
            Criterion::Independent => "The requirement should express the need, not how to address it.",
            Criterion::Unambiguous => "The requirement should have only one interpretation.",
            Criterion::Complete => "The requirement must stand on its own.",
            Criterion::Singular => "The requirement should express a single, clear idea.",
            Criterion::Feasible => "The requirement must be implementable.",
            Criterion::Verifiable => "The requirement must be verifiable.",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown criterion {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Violation,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub requirement_id: String,
    pub criterion: Criterion,
    pub severity: Severity,
    pub rule_id: String,
    pub message: String,
    pub evidence: Vec<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotAssessable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    RulesOnly,
    LlmOnly,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearDuplicate {
    pub id_a: String,
    pub id_b: String,
    pub similarity: f64,
}

/// Quality analysis of a corpus by one analyzer. Maps are keyed in corpus
/// order so serialized reports are byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub rater_id: String,
    pub analyzer_provenance: Provenance,
    pub per_requirement: IndexMap<String, Vec<Finding>>,
    pub criterion_verdicts: IndexMap<String, IndexMap<Criterion, Verdict>>,
    #[serde(default)]
    pub near_duplicates: Vec<NearDuplicate>,
    /// Per-requirement notes, e.g. why an assessment could not be obtained.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub annotations: IndexMap<String, String>,
}

impl QualityReport {
    pub fn verdict(&self, requirement_id: &str, criterion: Criterion) -> Option<Verdict> {
        self.criterion_verdicts.get(requirement_id)?.get(&criterion).copied()
    }

    pub fn findings(&self, requirement_id: &str) -> &[Finding] {
        self.per_requirement.get(requirement_id).map_or(&[], Vec::as_slice)
    }

    pub fn violation_count(&self) -> usize {
        self.per_requirement.values().flatten().filter(|f| f.severity == Severity::Violation).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| ConfigError::parse(path, e))
    }
}

/// Verdicts implied by a finding list: Fail iff a Violation exists for the
/// criterion; Essential is never decidable per requirement.
pub fn verdicts_from_findings(findings: &[Finding]) -> IndexMap<Criterion, Verdict> {
    Criterion::ALL
        .into_iter()
        .map(|c| {
            let verdict = if c == Criterion::Essential {
                Verdict::NotAssessable
            } else if findings.iter().any(|f| f.criterion == c && f.severity == Severity::Violation) {
                Verdict::Fail
            } else {
                Verdict::Pass
            };
            (c, verdict)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lexicons {
    pub vague: Vec<String>,
    pub unverifiable: Vec<String>,
    pub implementation: Vec<String>,
    pub absolutes: Vec<String>,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for Lexicons {
    fn default() -> Self {
        Self {
            vague: owned(&[
                "appropriate", "as appropriate", "sufficient", "sufficiently", "adequate", "adequately",
                "user-friendly", "fast", "quickly", "easily", "easy", "robust", "flexible", "etc", "and/or",
                "as applicable", "if possible", "where possible", "as needed", "as required", "reasonable",
                "reasonably", "timely", "several", "various", "approximately", "significant", "minimal",
                "optimal", "seamless", "seamlessly", "state-of-the-art", "normally", "typically",
            ]),
            unverifiable: owned(&[
                "quickly", "fast", "user-friendly", "intuitive", "intuitively", "easy", "easily", "simple",
                "seamless", "seamlessly", "efficient", "efficiently", "robust", "flexible", "reliable",
                "state-of-the-art", "high quality", "modern", "attractive", "pleasant", "convenient",
                "responsive", "smooth", "smoothly", "as soon as possible", "best", "optimal", "maximize",
                "minimize", "comfortable",
            ]),
            implementation: owned(&[
                "using", "via", "by means of", "through the use of", "implemented in", "implemented with",
                "written in", "database", "relational database", "sql", "mysql", "postgresql", "oracle database",
                "algorithm", "linked list", "hash table", "xml", "json", "java", "python", "c++", "javascript",
                "microservice", "microservices", "rest api", "spreadsheet", "excel", "drop-down menu",
                "dropdown", "checkbox",
            ]),
            absolutes: owned(&[
                "never", "always", "100%", "all possible", "zero defects", "at all times", "under all conditions",
                "every possible", "unlimited", "instantly", "instantaneously", "without any delay", "impossible",
            ]),
        }
    }
}

impl Lexicons {
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.vague.iter().chain(&self.unverifiable).chain(&self.implementation).chain(&self.absolutes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub lexicons: Lexicons,
    pub near_duplicate_threshold: f64,
    pub severity_overrides: BTreeMap<String, Severity>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self { lexicons: Lexicons::default(), near_duplicate_threshold: 0.8, severity_overrides: BTreeMap::new() }
    }
}

impl RuleConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let config: RuleConfig = serde_json::from_str(&raw).map_err(|e| ConfigError::parse(path, e))?;
        if !(0.0..=1.0).contains(&config.near_duplicate_threshold) {
            return Err(ConfigError::Invalid(format!(
                "near_duplicate_threshold {} outside [0, 1]",
                config.near_duplicate_threshold
            )));
        }
        Ok(config)
    }

    fn severity(&self, rule_id: &str, default: Severity) -> Severity {
        self.severity_overrides.get(rule_id).copied().unwrap_or(default)
    }
}

pub mod rule_ids {
    pub const VAGUE_TERM: &str = "unambiguous.vague-term";
    pub const COORDINATED_MODAL: &str = "singular.coordinated-modal";
    pub const TBD_MARKER: &str = "complete.tbd-marker";
    pub const MISSING_MODAL: &str = "complete.missing-modal";
    pub const MISSING_ACTOR: &str = "complete.missing-actor";
    pub const DANGLING_PRONOUN: &str = "complete.dangling-pronoun";
    pub const UNMEASURABLE: &str = "verifiable.unmeasurable";
    pub const IMPLEMENTATION_BINDING: &str = "independent.implementation-binding";
    pub const ABSOLUTE_TERM: &str = "feasible.absolute-term";
}

/// Implementation entries that introduce a phrase; their evidence extends to
/// the end of the clause ("using a relational database").
const CONNECTIVES: &[&str] = &[
    "using", "via", "by means of", "through the use of", "implemented in", "implemented with", "written in",
];
const CLAUSE_BREAKS: &[char] = &[',', ';', ':', '.', '!', '?', '(', ')'];
const COORDINATORS: &[&str] = &["and", "or", "but"];
const TBD_MARKERS: &[&str] = &["tbd", "tbr", "tbc", "tbs", "to be determined", "to be defined", "to be confirmed"];
const OBJECT_PRONOUNS: &[&str] = &["it", "they", "them"];
const POSSESSIVE_PRONOUNS: &[&str] = &["its", "their"];
const DETERMINERS: &[&str] = &["a", "an", "the", "each", "every", "any", "this", "these", "those", "all", "some"];

/// Tokenized requirement shared by the individual checks.
struct Subject<'a> {
    req: &'a Requirement,
    tokens: Vec<Token>,
}

impl<'a> Subject<'a> {
    fn new(req: &'a Requirement) -> Self {
        Self { tokens: text::tokenize(&req.text), req }
    }

    fn finding(&self, config: &RuleConfig, criterion: Criterion, rule_id: &str, default: Severity, message: String, evidence: Vec<Span>) -> Finding {
        Finding {
            requirement_id: self.req.id.clone(),
            criterion,
            severity: config.severity(rule_id, default),
            rule_id: rule_id.to_string(),
            message,
            evidence,
        }
    }

    fn quote(&self, span: Span) -> &str {
        span.slice(&self.req.text)
    }

    fn modal_positions(&self) -> Vec<usize> {
        self.tokens.iter().enumerate().filter(|(_, t)| text::is_modal(t)).map(|(i, _)| i).collect()
    }

    /// Character offset where the clause containing `from` ends.
    fn clause_end(&self, from: usize) -> usize {
        let chars: Vec<char> = self.req.text.chars().collect();
        let mut end = from;
        for tok in self.tokens.iter().filter(|t| t.span.start >= from) {
            let gap: String = chars[end..tok.span.start].iter().collect();
            if end > from && (gap.contains(CLAUSE_BREAKS) || COORDINATORS.contains(&tok.norm.as_str())) {
                break;
            }
            end = tok.span.end;
        }
        end
    }
}

fn lexicon_findings(
    subject: &Subject,
    config: &RuleConfig,
    lexicon: &[String],
    criterion: Criterion,
    rule_id: &str,
    default: Severity,
    describe: impl Fn(&str) -> String,
) -> Vec<Finding> {
    text::scan_lexicon(&subject.tokens, lexicon)
        .into_iter()
        .map(|m| subject.finding(config, criterion, rule_id, default, describe(subject.quote(m.span)), vec![m.span]))
        .collect()
}

fn unambiguous(s: &Subject, config: &RuleConfig) -> Vec<Finding> {
    lexicon_findings(s, config, &config.lexicons.vague, Criterion::Unambiguous, rule_ids::VAGUE_TERM, Severity::Violation, |q| {
        format!("vague term \"{q}\" admits more than one interpretation")
    })
}

fn singular(s: &Subject, config: &RuleConfig) -> Vec<Finding> {
    let modals = s.modal_positions();
    let joined: Vec<bool> = modals
        .windows(2)
        .map(|w| s.tokens[w[0] + 1..w[1]].iter().any(|t| COORDINATORS.contains(&t.norm.as_str())))
        .collect();
    let mut spans = Vec::new();
    for (k, &is_joined) in joined.iter().enumerate() {
        if !is_joined {
            continue;
        }
        let start_tok = modals[k + 1];
        let end_tok = match (modals.get(k + 2), joined.get(k + 1)) {
            (Some(&next), Some(true)) => {
                let conj = (start_tok + 1..next)
                    .rev()
                    .find(|&i| COORDINATORS.contains(&s.tokens[i].norm.as_str()))
                    .expect("joined implies a coordinator");
                conj - 1
            }
            _ => s.tokens.len() - 1,
        };
        spans.push(Span::new(s.tokens[start_tok].span.start, s.tokens[end_tok].span.end));
    }
    if spans.is_empty() {
        return Vec::new();
    }
    let clauses = spans.len() + 1;
    let message = format!("{clauses} coordinated modal clauses state more than one requirement; split into separate statements");
    vec![s.finding(config, Criterion::Singular, rule_ids::COORDINATED_MODAL, Severity::Violation, message, spans)]
}

fn subject_range(s: &Subject, first_modal: usize) -> std::ops::Range<usize> {
    let start = (0..first_modal)
        .rev()
        .find(|&i| DETERMINERS.contains(&s.tokens[i].norm.as_str()))
        .unwrap_or(first_modal.saturating_sub(1));
    start..first_modal
}

fn complete(s: &Subject, config: &RuleConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let markers = owned(TBD_MARKERS);
    for m in text::scan_lexicon(&s.tokens, &markers) {
        let message = format!("placeholder \"{}\" leaves the requirement unfinished", s.quote(m.span));
        out.push(s.finding(config, Criterion::Complete, rule_ids::TBD_MARKER, Severity::Violation, message, vec![m.span]));
    }
    let modals = s.modal_positions();
    match modals.first() {
        None => {
            let has_actor = s.tokens.iter().filter(|t| t.is_word()).count() > 1;
            let message = if has_actor {
                "no modal verb (shall/must/will/should) states the obligation".to_string()
            } else {
                "no modal verb (shall/must/will/should) and no identifiable actor".to_string()
            };
            out.push(s.finding(config, Criterion::Complete, rule_ids::MISSING_MODAL, Severity::Violation, message, Vec::new()));
        }
        Some(&0) => {
            let message = "no actor precedes the modal verb; state who or what is obligated".to_string();
            out.push(s.finding(config, Criterion::Complete, rule_ids::MISSING_ACTOR, Severity::Violation, message, vec![s.tokens[0].span]));
        }
        Some(_) => {}
    }
    let subject = modals.first().map(|&m| subject_range(s, m));
    for (i, tok) in s.tokens.iter().enumerate() {
        let object = OBJECT_PRONOUNS.contains(&tok.norm.as_str());
        let possessive = POSSESSIVE_PRONOUNS.contains(&tok.norm.as_str());
        if !object && !possessive {
            continue;
        }
        // "IT" in capitals is the department, not a pronoun
        let written = s.quote(tok.span);
        if written.chars().count() > 1 && written.chars().all(char::is_uppercase) {
            continue;
        }
        // candidate antecedents: determiner-led noun phrases before the pronoun;
        // object pronouns may not refer back to the sentence subject
        let antecedent = (1..i).any(|j| {
            DETERMINERS.contains(&s.tokens[j - 1].norm.as_str())
                && s.tokens[j].is_word()
                && !DETERMINERS.contains(&s.tokens[j].norm.as_str())
                && !text::is_modal(&s.tokens[j])
                && (possessive || !subject.as_ref().is_some_and(|r| r.contains(&j)))
        });
        if !antecedent {
            let message = format!("pronoun \"{}\" has no antecedent within the requirement", s.quote(tok.span));
            out.push(s.finding(config, Criterion::Complete, rule_ids::DANGLING_PRONOUN, Severity::Warning, message, vec![tok.span]));
        }
    }
    out
}

fn verifiable(s: &Subject, config: &RuleConfig) -> Vec<Finding> {
    if text::extract_quantity(&s.req.text).is_some() {
        return Vec::new();
    }
    let hits: Vec<LexiconMatch> = text::scan_lexicon(&s.tokens, &config.lexicons.unverifiable);
    if hits.is_empty() {
        return Vec::new();
    }
    let terms = hits.iter().map(|m| format!("\"{}\"", s.quote(m.span))).collect::<Vec<_>>().join(", ");
    let message = format!("no measurable quantity and unverifiable wording ({terms}); no test can decide pass or fail");
    vec![s.finding(config, Criterion::Verifiable, rule_ids::UNMEASURABLE, Severity::Violation, message, hits.iter().map(|m| m.span).collect())]
}

fn independent(s: &Subject, config: &RuleConfig) -> Vec<Finding> {
    let connectives: BTreeSet<Vec<String>> = CONNECTIVES.iter().map(|c| text::entry_tokens(c)).collect();
    let mut spans: Vec<Span> = text::scan_lexicon(&s.tokens, &config.lexicons.implementation)
        .into_iter()
        .map(|m| {
            if connectives.contains(&text::entry_tokens(&m.entry)) {
                Span::new(m.span.start, s.clause_end(m.span.start))
            } else {
                m.span
            }
        })
        .collect();
    spans.sort();
    spans.dedup();
    let all = spans.clone();
    spans.retain(|sp| !all.iter().any(|o| o != sp && o.contains(sp)));
    spans
        .into_iter()
        .map(|sp| {
            let message = format!("\"{}\" prescribes a solution rather than the need", s.quote(sp));
            s.finding(config, Criterion::Independent, rule_ids::IMPLEMENTATION_BINDING, Severity::Violation, message, vec![sp])
        })
        .collect()
}

fn feasible(s: &Subject, config: &RuleConfig) -> Vec<Finding> {
    lexicon_findings(s, config, &config.lexicons.absolutes, Criterion::Feasible, rule_ids::ABSOLUTE_TERM, Severity::Warning, |q| {
        format!("absolute term \"{q}\" may be impossible to implement or demonstrate")
    })
}

fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        let key = |f: &Finding| (f.criterion, f.evidence.first().map_or(0, |s| s.start), f.rule_id.clone());
        key(a).cmp(&key(b)).then_with(|| a.message.cmp(&b.message))
    });
}

type Check = fn(&Subject, &RuleConfig) -> Vec<Finding>;

fn checker(criterion: Criterion) -> Option<Check> {
    match criterion {
        Criterion::Essential => None,
        Criterion::Independent => Some(independent),
        Criterion::Unambiguous => Some(unambiguous),
        Criterion::Complete => Some(complete),
        Criterion::Singular => Some(singular),
        Criterion::Feasible => Some(feasible),
        Criterion::Verifiable => Some(verifiable),
    }
}

/// Findings for one criterion.
pub fn check(criterion: Criterion, req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    let mut out = checker(criterion).map_or_else(Vec::new, |f| f(&Subject::new(req), config));
    sort_findings(&mut out);
    out
}

pub fn check_essential(_req: &Requirement, _config: &RuleConfig) -> Vec<Finding> {
    Vec::new()
}

pub fn check_independent(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    check(Criterion::Independent, req, config)
}

pub fn check_unambiguous(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    check(Criterion::Unambiguous, req, config)
}

pub fn check_complete(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    check(Criterion::Complete, req, config)
}

pub fn check_singular(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    check(Criterion::Singular, req, config)
}

pub fn check_feasible(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    check(Criterion::Feasible, req, config)
}

pub fn check_verifiable(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    check(Criterion::Verifiable, req, config)
}

/// All findings for one requirement, sorted by (criterion, first evidence
/// offset).
pub fn analyze_requirement(req: &Requirement, config: &RuleConfig) -> Vec<Finding> {
    let subject = Subject::new(req);
    let mut out: Vec<Finding> = Criterion::ALL
        .into_iter()
        .filter_map(checker)
        .flat_map(|f| f(&subject, config))
        .collect();
    sort_findings(&mut out);
    out
}

pub fn analyze_corpus(set: &RequirementSet, config: &RuleConfig) -> QualityReport {
    analyze_corpus_with(set, config, Exec::default())
}

pub fn analyze_corpus_with(set: &RequirementSet, config: &RuleConfig, exec: Exec) -> QualityReport {
    let findings = exec::map_ordered(exec, &set.requirements, |r| analyze_requirement(r, config));
    let mut per_requirement = IndexMap::with_capacity(set.len());
    let mut criterion_verdicts = IndexMap::with_capacity(set.len());
    for (req, found) in set.requirements.iter().zip(findings) {
        criterion_verdicts.insert(req.id.clone(), verdicts_from_findings(&found));
        per_requirement.insert(req.id.clone(), found);
    }
    QualityReport {
        rater_id: RULES_RATER_ID.to_string(),
        analyzer_provenance: Provenance::RulesOnly,
        per_requirement,
        criterion_verdicts,
        near_duplicates: find_near_duplicates_with(set, config.near_duplicate_threshold, exec),
        annotations: IndexMap::new(),
    }
}

/// Lowercased word set used for duplicate detection.
pub fn word_set(text: &str) -> BTreeSet<String> {
    text::tokenize(text).into_iter().filter(|t| t.norm != "%" && t.norm != "°").map(|t| t.norm).collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let shared = a.intersection(b).count();
    let union = a.len() + b.len() - shared;
    if union == 0 {
        return 1.0;
    }
    shared as f64 / union as f64
}

pub fn find_near_duplicates(set: &RequirementSet, threshold: f64) -> Vec<NearDuplicate> {
    find_near_duplicates_with(set, threshold, Exec::default())
}

/// Pairs with token-level Jaccard similarity ≥ `threshold`, each listed once
/// with `id_a < id_b`, sorted by `(id_a, id_b)`.
pub fn find_near_duplicates_with(set: &RequirementSet, threshold: f64, exec: Exec) -> Vec<NearDuplicate> {
    let sets: Vec<BTreeSet<String>> = exec::map_ordered(exec, &set.requirements, |r| word_set(&r.text));
    let reqs = &set.requirements;
    let mut pairs: Vec<NearDuplicate> = exec::map_range(exec, reqs.len(), |i| {
        ((i + 1)..reqs.len())
            .filter_map(|j| {
                let similarity = jaccard(&sets[i], &sets[j]);
                (similarity >= threshold).then(|| {
                    let (a, b) = if reqs[i].id <= reqs[j].id { (i, j) } else { (j, i) };
                    NearDuplicate { id_a: reqs[a].id.clone(), id_b: reqs[b].id.clone(), similarity }
                })
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    pairs.sort_by(|a, b| (&a.id_a, &a.id_b).cmp(&(&b.id_a, &b.id_b)));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Level;
    use regex::Regex;

    fn req(text: &str) -> Requirement {
        Requirement::new("SR-01", Level::System, text)
    }

    fn quotes(r: &Requirement, f: &Finding) -> Vec<String> {
        f.evidence.iter().map(|s| s.slice(&r.text).to_string()).collect()
    }

    #[test]
    fn clean_measurable_requirement_has_no_findings() {
        let config = RuleConfig::default();
        assert!(analyze_requirement(&req("The system shall respond within 2 seconds."), &config).is_empty());
    }

    #[test]
    fn vague_and_unverifiable_wording() {
        let config = RuleConfig::default();
        let r = req("The system shall respond quickly and be user-friendly.");
        // oracle: both words are members of the default vague lexicon
        assert!(config.lexicons.vague.iter().any(|w| w == "quickly"));
        assert!(config.lexicons.vague.iter().any(|w| w == "user-friendly"));
        let found = analyze_requirement(&r, &config);
        let unamb: Vec<_> = found.iter().filter(|f| f.criterion == Criterion::Unambiguous).collect();
        assert_eq!(unamb.len(), 2);
        assert!(unamb.iter().all(|f| f.severity == Severity::Violation));
        assert_eq!(quotes(&r, unamb[0]), ["quickly"]);
        assert_eq!(quotes(&r, unamb[1]), ["user-friendly"]);
        let verif: Vec<_> = found.iter().filter(|f| f.criterion == Criterion::Verifiable).collect();
        assert_eq!(verif.len(), 1);
        assert_eq!(verif[0].severity, Severity::Violation);
        assert_eq!(found.len(), 3);
    }

    #[test]
    fn one_word_requirement_is_incomplete() {
        let found = analyze_requirement(&req("Alert."), &RuleConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].criterion, found[0].severity), (Criterion::Complete, Severity::Violation));
        assert!(found[0].message.contains("no identifiable actor"));
    }

    #[test]
    fn singular_matches_regex_oracle() {
        let oracle = Regex::new(r"(?i)\bshall\b.*\band\b.*\bshall\b").unwrap();
        let config = RuleConfig::default();
        let r = req("The system shall track equipment and shall alert staff.");
        assert!(oracle.is_match(&r.text));
        let found = check_singular(&r, &config);
        assert_eq!(found.len(), 1);
        assert_eq!(quotes(&r, &found[0]), ["shall alert staff"]);

        let r = req("The device shall operate between -10°C and +50°C.");
        assert!(!oracle.is_match(&r.text));
        assert!(check_singular(&r, &config).is_empty());
    }

    #[test]
    fn three_coordinated_clauses() {
        let r = req("The reader shall scan tags, and shall log scans, and shall notify staff.");
        let found = check_singular(&r, &RuleConfig::default());
        assert_eq!(quotes(&r, &found[0]), ["shall log scans", "shall notify staff"]);
    }

    #[test]
    fn implementation_binding_phrase() {
        let r = req("The system shall store records using a relational database.");
        let found = check_independent(&r, &RuleConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, Severity::Violation);
        assert_eq!(quotes(&r, &found[0]), ["using a relational database"]);
    }

    #[test]
    fn dangling_pronoun_warning() {
        let config = RuleConfig::default();
        let r = req("The system shall forward it to the supervisor.");
        let found = check_complete(&r, &config);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, Severity::Warning);
        assert_eq!(quotes(&r, &found[0]), ["it"]);
        // antecedent present
        assert!(check_complete(&req("When a tag is removed, the system shall log it."), &config).is_empty());
        // possessive referring to the subject
        assert!(check_complete(&req("The reader shall report its battery level."), &config).is_empty());
        assert!(check_complete(&req("Hospital IT staff shall update the reader firmware."), &config).is_empty());
    }

    #[test]
    fn unverifiable_adjective() {
        let found = check_verifiable(&req("The UI shall be intuitive."), &RuleConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, Severity::Violation);
    }

    #[test]
    fn absolute_term_is_a_warning() {
        let r = req("The system shall never fail.");
        let found = check_feasible(&r, &RuleConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, Severity::Warning);
        assert_eq!(quotes(&r, &found[0]), ["never"]);
        assert!(check_feasible(&req("The system shall be available 99.9% of the time."), &RuleConfig::default()).is_empty());
        assert_eq!(check_feasible(&req("The tags shall be read with 100 % accuracy."), &RuleConfig::default()).len(), 1);
    }

    #[test]
    fn essential_is_not_assessable() {
        let r = req("The system shall track equipment.");
        assert!(check_essential(&r, &RuleConfig::default()).is_empty());
        let verdicts = verdicts_from_findings(&analyze_requirement(&r, &RuleConfig::default()));
        assert_eq!(verdicts[&Criterion::Essential], Verdict::NotAssessable);
        assert_eq!(verdicts.len(), 7);
    }

    #[test]
    fn tbd_and_missing_actor() {
        let config = RuleConfig::default();
        let found = check_complete(&req("The system shall log scans every TBD seconds."), &config);
        assert_eq!(found[0].rule_id, rule_ids::TBD_MARKER);
        let found = check_complete(&req("Shall alert the nurse."), &config);
        assert_eq!(found[0].rule_id, rule_ids::MISSING_ACTOR);
    }

    #[test]
    fn severity_override_changes_verdict() {
        let mut config = RuleConfig::default();
        config.severity_overrides.insert(rule_ids::VAGUE_TERM.into(), Severity::Info);
        let found = check_unambiguous(&req("The system shall use adequate storage."), &config);
        assert_eq!(found[0].severity, Severity::Info);
        assert_eq!(verdicts_from_findings(&found)[&Criterion::Unambiguous], Verdict::Pass);
    }

    #[test]
    fn jaccard_hand_count() {
        let a = word_set("The system shall alert staff.");
        let b = word_set("The device shall log events.");
        // {the, shall} over {the, system, shall, alert, staff, device, log, events}
        assert_eq!(a.intersection(&b).count(), 2);
        assert_eq!(a.union(&b).count(), 8);
        assert!((jaccard(&a, &b) - 0.25).abs() < 1e-12);
        let set = RequirementSet::new(
            "x",
            vec![
                Requirement::new("B", Level::System, "The system shall alert staff."),
                Requirement::new("A", Level::System, "The device shall log events."),
                Requirement::new("C", Level::System, "the system shall alert STAFF"),
            ],
        );
        let pairs = find_near_duplicates(&set, 0.8);
        assert_eq!(pairs, vec![NearDuplicate { id_a: "B".into(), id_b: "C".into(), similarity: 1.0 }]);
        assert!(find_near_duplicates(&set, 1.0).len() == 1);
    }

    #[test]
    fn rule_config_partial_file_uses_defaults() {
        let config: RuleConfig = serde_json::from_str(r#"{"lexicons":{"vague":["foo"]}}"#).unwrap();
        assert_eq!(config.lexicons.vague, ["foo"]);
        assert_eq!(config.lexicons.absolutes, Lexicons::default().absolutes);
        assert_eq!(config.near_duplicate_threshold, 0.8);
        assert!(serde_json::from_str::<RuleConfig>(r#"{"lexicon":{}}"#).is_err());
    }
}
