//! Inter-rater agreement between any raters (rule engine, LLMs, human
//! annotators): Cohen's and Fleiss' kappa, confusion matrices, per-criterion
//! agreement, and disagreement mining for refinement.
//!
//! Rating tables on disk may be incomplete; items lacking any rater's label
//! are excluded listwise before statistics are computed, and the exclusion
//! count is reported alongside.

mod disagreements;
mod hints;
mod stats;
mod table;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::quality_rules::{Criterion, QualityReport, Verdict};

pub use disagreements::{mine_disagreements, DisagreementCase};
pub use hints::{refinement_hints, Hint, HintKind, DEFAULT_MIN_SUPPORT};
pub use stats::{cohen_kappa, confusion_matrix, fleiss_kappa, AgreementStats, Band, ConfusionMatrix};
pub use table::{
    compare_tables, criterion_table, fnf_table, load_ratings, AgreementReport, RatingBundle, RatingRow, RatingTable,
    FNF_CATEGORIES, PASS_FAIL,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("wrong number of raters: expected {expected}, found {found}")]
    WrongRaterCount { expected: &'static str, found: usize },
    #[error("chance agreement is 1 (every rating falls in one category); kappa is undefined")]
    DegenerateMarginals,
    #[error("no items rated by every rater")]
    NoItems,
    #[error("category set is empty")]
    EmptyCategorySet,
    #[error("duplicate {what} {value:?}")]
    Duplicate { what: &'static str, value: String },
    #[error("label {label:?} given by {rater:?} for {item:?} is not in the category set")]
    UnknownLabel { item: String, rater: String, label: String },
    #[error("row {item:?} has {found} labels for {expected} raters")]
    RaggedRow { item: String, expected: usize, found: usize },
    #[error("label for {item:?} from undeclared rater {rater:?}")]
    UnknownRater { item: String, rater: String },
    #[error("tables disagree on the category set: {0:?} vs {1:?}")]
    CategoryMismatch(Vec<String>, Vec<String>),
    #[error("no {0} table in the input")]
    AxisNotFound(String),
    #[error("no items with Pass/Fail from both raters for {criterion} ({n_excluded} excluded)")]
    NoOverlap { criterion: Criterion, n_excluded: usize },
}

/// What a label is about: the functional/non-functional split or one
/// quality criterion. Axes order FnF first, then criteria canonically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    FnF,
    Criterion(Criterion),
}

impl Axis {
    pub const ALL: [Axis; 8] = [
        Axis::FnF,
        Axis::Criterion(Criterion::Essential),
        Axis::Criterion(Criterion::Independent),
        Axis::Criterion(Criterion::Unambiguous),
        Axis::Criterion(Criterion::Complete),
        Axis::Criterion(Criterion::Singular),
        Axis::Criterion(Criterion::Feasible),
        Axis::Criterion(Criterion::Verifiable),
    ];

    pub fn category_set(self) -> Vec<String> {
        let labels: &[&str] = match self {
            Axis::FnF => &FNF_CATEGORIES,
            Axis::Criterion(_) => &PASS_FAIL,
        };
        labels.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::FnF => f.write_str("FnF"),
            Axis::Criterion(c) => f.write_str(c.as_str()),
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("fnf") {
            return Ok(Axis::FnF);
        }
        s.parse::<Criterion>().map(Axis::Criterion).map_err(|_| format!("unknown axis {s:?}"))
    }
}

impl Serialize for Axis {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Axis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Complete design: every rater labeled every item with a label from
/// `category_set`. Cells are stored as category indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterMatrix {
    items: Vec<String>,
    raters: Vec<String>,
    category_set: Vec<String>,
    cells: Vec<Vec<usize>>,
}

fn no_duplicates(what: &'static str, values: &[String]) -> Result<(), AgreementError> {
    let mut seen = std::collections::HashSet::new();
    match values.iter().find(|v| !seen.insert(v.as_str())) {
        Some(dup) => Err(AgreementError::Duplicate { what, value: dup.clone() }),
        None => Ok(()),
    }
}

impl RaterMatrix {
    /// `labels[i][r]` is rater `r`'s label for item `i`.
    pub fn new(
        items: Vec<String>,
        raters: Vec<String>,
        category_set: Vec<String>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self, AgreementError> {
        if category_set.is_empty() {
            return Err(AgreementError::EmptyCategorySet);
        }
        no_duplicates("category", &category_set)?;
        no_duplicates("rater", &raters)?;
        no_duplicates("item", &items)?;
        let index: HashMap<&str, usize> = category_set.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut cells = Vec::with_capacity(items.len());
        for (item, row) in items.iter().zip(&labels) {
            if row.len() != raters.len() {
                return Err(AgreementError::RaggedRow { item: item.clone(), expected: raters.len(), found: row.len() });
            }
            let coded = row
                .iter()
                .zip(&raters)
                .map(|(label, rater)| {
                    index.get(label.as_str()).copied().ok_or_else(|| AgreementError::UnknownLabel {
                        item: item.clone(),
                        rater: rater.clone(),
                        label: label.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            cells.push(coded);
        }
        if labels.len() != items.len() {
            return Err(AgreementError::RaggedRow { item: "<matrix>".into(), expected: items.len(), found: labels.len() });
        }
        Ok(Self { items, raters, category_set, cells })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn category_set(&self) -> &[String] {
        &self.category_set
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Category indices per item, one per rater.
    pub fn rows(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn label(&self, item: usize, rater: usize) -> &str {
        &self.category_set[self.cells[item][rater]]
    }

    /// The same matrix restricted to two raters (by index).
    pub fn pair(&self, a: usize, b: usize) -> RaterMatrix {
        RaterMatrix {
            items: self.items.clone(),
            raters: vec![self.raters[a].clone(), self.raters[b].clone()],
            category_set: self.category_set.clone(),
            cells: self.cells.iter().map(|r| vec![r[a], r[b]]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAgreement {
    pub stats: AgreementStats,
    pub n_excluded: usize,
}

/// Cohen's kappa between an AI quality report and human Pass/Fail labels,
/// one computation per criterion. Items the AI marked NotAssessable, or that
/// either side did not label, are excluded and counted.
pub fn per_criterion_agreement(
    ai: &QualityReport,
    human: &HashMap<(String, Criterion), Verdict>,
) -> IndexMap<Criterion, Result<CriterionAgreement, AgreementError>> {
    let mut item_order: Vec<&String> = ai.criterion_verdicts.keys().collect();
    let mut extra: Vec<&String> = human.keys().map(|(id, _)| id).filter(|id| !ai.criterion_verdicts.contains_key(*id)).collect();
    extra.sort();
    extra.dedup();
    item_order.extend(extra);

    Criterion::ALL
        .into_iter()
        .map(|criterion| {
            let mut items = Vec::new();
            let mut labels = Vec::new();
            let mut n_excluded = 0;
            for id in &item_order {
                let h = human.get(&((*id).clone(), criterion)).copied();
                let a = ai.verdict(id, criterion);
                match (a, h) {
                    (None, None) => {}
                    (Some(a @ (Verdict::Pass | Verdict::Fail)), Some(h @ (Verdict::Pass | Verdict::Fail))) => {
                        items.push((*id).clone());
                        labels.push(vec![verdict_label(a).to_string(), verdict_label(h).to_string()]);
                    }
                    _ => n_excluded += 1,
                }
            }
            if items.is_empty() {
                return (criterion, Err(AgreementError::NoOverlap { criterion, n_excluded }));
            }
            let raters = vec![ai.rater_id.clone(), "human".to_string()];
            let result = RaterMatrix::new(items, raters, Axis::Criterion(criterion).category_set(), labels)
                .and_then(|m| cohen_kappa(&m))
                .map(|stats| CriterionAgreement { stats, n_excluded });
            (criterion, result)
        })
        .collect()
}

pub(crate) fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "Pass",
        Verdict::Fail => "Fail",
        Verdict::NotAssessable => "NotAssessable",
    }
}
