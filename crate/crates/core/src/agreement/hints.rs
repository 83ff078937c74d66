use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{Axis, DisagreementCase};
use crate::quality_rules::RuleConfig;
use crate::taxonomy::TaxonomyConfig;
use crate::text;

/// Minimum number of distinct requirements that must support a hint.
pub const DEFAULT_MIN_SUPPORT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HintKind {
    AddLexiconTerm,
    PromptClarification,
    TaxonomyKeyword,
}

/// A suggested refinement. Hints are advice for a human; nothing applies
/// them automatically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub kind: HintKind,
    /// The term to add, or the axis whose definition needs clarifying.
    pub payload: String,
    pub supporting_case_ids: Vec<String>,
}

// Function words and requirement boilerplate that never make useful hints.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "by", "for", "from", "with", "within",
    "as", "is", "are", "be", "been", "being", "was", "were", "it", "its", "this", "that", "these", "those",
    "which", "who", "whom", "when", "where", "while", "if", "then", "than", "not", "no", "all", "any", "each",
    "every", "per", "into", "onto", "upon", "after", "before", "during", "under", "over", "between", "so",
    "such", "can", "could", "may", "might", "able", "shall", "must", "will", "should", "would", "has", "have",
    "had", "do", "does", "system", "systems", "user", "users", "requirement", "requirements",
];

fn candidate_tokens(text: &str) -> BTreeSet<String> {
    text::tokenize(text)
        .into_iter()
        .filter(|t| t.is_word() && t.norm.len() >= 2 && !STOPWORDS.contains(&t.norm.as_str()))
        .map(|t| t.norm)
        .collect()
}

fn single_token_entries<'a>(entries: impl Iterator<Item = &'a String>) -> HashSet<String> {
    entries
        .filter_map(|e| match text::entry_tokens(e).as_slice() {
            [one] => Some(one.clone()),
            _ => None,
        })
        .collect()
}

/// token → (distinct requirement ids, case ids) over cases passing `keep`.
fn token_support<'a>(
    cases: &'a [DisagreementCase],
    keep: impl Fn(&DisagreementCase) -> bool,
) -> BTreeMap<String, (BTreeSet<&'a str>, Vec<&'a str>)> {
    let mut support: BTreeMap<String, (BTreeSet<&str>, Vec<&str>)> = BTreeMap::new();
    for case in cases.iter().filter(|c| keep(c)) {
        let Some(text) = case.requirement_text.as_deref() else { continue };
        for tok in candidate_tokens(text) {
            let entry = support.entry(tok).or_default();
            entry.0.insert(case.requirement_id.as_str());
            entry.1.push(case.case_id.as_str());
        }
    }
    support
}

/// Refinement suggestions mined from disagreement cases:
///
/// * `AddLexiconTerm` — a token shared by at least `min_support` distinct
///   disagreeing requirements that no rule lexicon contains;
/// * `TaxonomyKeyword` — the same over FnF disagreements, checked against
///   the taxonomy keyword tables;
/// * `PromptClarification` — an axis with at least `min_support` cases.
///
/// Output is sorted by (kind, payload).
pub fn refinement_hints(
    cases: &[DisagreementCase],
    rules: &RuleConfig,
    taxonomy: &TaxonomyConfig,
    min_support: usize,
) -> Vec<Hint> {
    let min_support = min_support.max(1);
    let mut hints = Vec::new();

    let lexicon = single_token_entries(rules.lexicons.all());
    for (token, (reqs, case_ids)) in token_support(cases, |_| true) {
        if reqs.len() >= min_support && !lexicon.contains(&token) {
            hints.push(Hint { kind: HintKind::AddLexiconTerm, payload: token, supporting_case_ids: case_ids.into_iter().map(String::from).collect() });
        }
    }

    let keywords = single_token_entries(taxonomy.keywords());
    for (token, (reqs, case_ids)) in token_support(cases, |c| c.axis == Axis::FnF) {
        if reqs.len() >= min_support && !keywords.contains(&token) {
            hints.push(Hint { kind: HintKind::TaxonomyKeyword, payload: token, supporting_case_ids: case_ids.into_iter().map(String::from).collect() });
        }
    }

    let mut per_axis: BTreeMap<Axis, Vec<&str>> = BTreeMap::new();
    for case in cases {
        per_axis.entry(case.axis).or_default().push(case.case_id.as_str());
    }
    for (axis, ids) in per_axis {
        if ids.len() >= min_support {
            hints.push(Hint { kind: HintKind::PromptClarification, payload: axis.to_string(), supporting_case_ids: ids.into_iter().map(String::from).collect() });
        }
    }

    hints.sort_by(|a, b| (a.kind, &a.payload).cmp(&(b.kind, &b.payload)));
    hints
}
