use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{AgreementError, Axis, RatingTable};
use crate::corpus::RequirementSet;

const EXCERPT_CHARS: usize = 240;

/// An item on which raters gave at least two distinct labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisagreementCase {
    /// `"{axis}:{requirement_id}"`, unique within one mining run.
    pub case_id: String,
    pub requirement_id: String,
    pub axis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requirement_text: Option<String>,
    pub labels_by_rater: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub rationale_excerpts: IndexMap<String, String>,
}

fn excerpt(text: &str) -> String {
    if text.chars().count() <= EXCERPT_CHARS {
        return text.to_string();
    }
    let mut s: String = text.chars().take(EXCERPT_CHARS).collect();
    s.push('…');
    s
}

/// Non-unanimous items across the given tables, one case per (axis, item),
/// sorted by `(axis, requirement_id)`. Tables sharing an axis are joined
/// first. Cells a rater left empty are ignored; an item needs labels from at
/// least two raters to count. Tables without an axis are treated as FnF.
pub fn mine_disagreements(tables: &[RatingTable], corpus: Option<&RequirementSet>) -> Result<Vec<DisagreementCase>, AgreementError> {
    let mut by_axis: BTreeMap<Axis, Vec<&RatingTable>> = BTreeMap::new();
    for t in tables {
        by_axis.entry(t.axis.unwrap_or(Axis::FnF)).or_default().push(t);
    }
    let mut cases = Vec::new();
    for (axis, group) in by_axis {
        let joined = RatingTable::join(&group)?;
        for row in &joined.rows {
            let labels: IndexMap<String, String> = joined
                .raters
                .iter()
                .filter_map(|r| row.labels.get(r).map(|l| (r.clone(), l.clone())))
                .collect();
            let mut distinct: Vec<&String> = labels.values().collect();
            distinct.sort();
            distinct.dedup();
            if labels.len() < 2 || distinct.len() < 2 {
                continue;
            }
            let rationale_excerpts = joined
                .raters
                .iter()
                .filter_map(|r| row.rationales.get(r).map(|t| (r.clone(), excerpt(t))))
                .collect();
            cases.push(DisagreementCase {
                case_id: format!("{axis}:{}", row.item),
                requirement_id: row.item.clone(),
                axis,
                requirement_text: corpus.and_then(|c| c.get(&row.item)).map(|r| r.text.clone()),
                labels_by_rater: labels,
                rationale_excerpts,
            });
        }
    }
    cases.sort_by(|a, b| (a.axis, &a.requirement_id).cmp(&(b.axis, &b.requirement_id)));
    Ok(cases)
}
