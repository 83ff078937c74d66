use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    cohen_kappa, confusion_matrix, fleiss_kappa, verdict_label, AgreementError, AgreementStats, Axis,
    ConfusionMatrix, RaterMatrix,
};
use crate::quality_rules::{Criterion, QualityReport, Severity, Verdict};
use crate::taxonomy::{parse_json_lines, ClassificationRecord};
use crate::ConfigError;

pub const FNF_CATEGORIES: [&str; 2] = ["Functional", "NonFunctional"];
pub const PASS_FAIL: [&str; 2] = ["Pass", "Fail"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRow {
    pub item: String,
    pub labels: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub rationales: IndexMap<String, String>,
}

/// On-disk rating table. Rows may be incomplete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    pub category_set: Vec<String>,
    pub raters: Vec<String>,
    pub rows: Vec<RatingRow>,
}

impl RatingTable {
    pub fn new(axis: Option<Axis>, category_set: Vec<String>, raters: Vec<String>) -> Self {
        Self { axis, category_set, raters, rows: Vec::new() }
    }

    /// Listwise exclusion: keeps items labeled by every rater and returns the
    /// ids of the dropped ones.
    pub fn complete(&self) -> Result<(RaterMatrix, Vec<String>), AgreementError> {
        let mut items = Vec::new();
        let mut labels = Vec::new();
        let mut excluded = Vec::new();
        for row in &self.rows {
            if let Some(rater) = row.labels.keys().find(|r| !self.raters.contains(r)) {
                return Err(AgreementError::UnknownRater { item: row.item.clone(), rater: rater.clone() });
            }
            let cells: Option<Vec<String>> = self.raters.iter().map(|r| row.labels.get(r).cloned()).collect();
            match cells {
                Some(cells) => {
                    items.push(row.item.clone());
                    labels.push(cells);
                }
                None => excluded.push(row.item.clone()),
            }
        }
        let matrix = RaterMatrix::new(items, self.raters.clone(), self.category_set.clone(), labels)?;
        Ok((matrix, excluded))
    }

    /// Outer join on item id. Raters must be distinct across tables and the
    /// category sets equal; item order follows first appearance.
    pub fn join(tables: &[&RatingTable]) -> Result<RatingTable, AgreementError> {
        let first = tables.first().ok_or(AgreementError::WrongRaterCount { expected: "at least 1 table", found: 0 })?;
        let mut out = RatingTable::new(first.axis, first.category_set.clone(), Vec::new());
        let mut index: IndexMap<String, usize> = IndexMap::new();
        for table in tables {
            let mut a = table.category_set.clone();
            let mut b = out.category_set.clone();
            a.sort();
            b.sort();
            if a != b {
                return Err(AgreementError::CategoryMismatch(out.category_set.clone(), table.category_set.clone()));
            }
            for rater in &table.raters {
                if out.raters.contains(rater) {
                    return Err(AgreementError::Duplicate { what: "rater", value: rater.clone() });
                }
                out.raters.push(rater.clone());
            }
            for row in &table.rows {
                let pos = *index.entry(row.item.clone()).or_insert_with(|| {
                    out.rows.push(RatingRow { item: row.item.clone(), labels: IndexMap::new(), rationales: IndexMap::new() });
                    out.rows.len() - 1
                });
                out.rows[pos].labels.extend(row.labels.clone());
                out.rows[pos].rationales.extend(row.rationales.clone());
            }
        }
        Ok(out)
    }

    pub fn rename_rater(&mut self, from: &str, to: &str) {
        for r in self.raters.iter_mut().filter(|r| *r == from) {
            *r = to.to_string();
        }
        for row in &mut self.rows {
            if let Some(l) = row.labels.shift_remove(from) {
                row.labels.insert(to.to_string(), l);
            }
            if let Some(t) = row.rationales.shift_remove(from) {
                row.rationales.insert(to.to_string(), t);
            }
        }
    }

    pub fn load(path: &Path) -> Result<RatingTable, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| ConfigError::parse(path, e))
    }
}

/// One or more rating tables, as written by session exports. A bare table
/// is accepted wherever a bundle is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BundleRepr")]
pub struct RatingBundle {
    pub tables: Vec<RatingTable>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BundleRepr {
    Many { tables: Vec<RatingTable> },
    One(RatingTable),
}

impl From<BundleRepr> for RatingBundle {
    fn from(r: BundleRepr) -> Self {
        match r {
            BundleRepr::Many { tables } => RatingBundle { tables },
            BundleRepr::One(t) => RatingBundle { tables: vec![t] },
        }
    }
}

impl RatingBundle {
    pub fn table(&self, axis: Axis) -> Option<&RatingTable> {
        self.tables.iter().find(|t| t.axis == Some(axis)).or_else(|| match self.tables.as_slice() {
            [only] if only.axis.is_none() => Some(only),
            _ => None,
        })
    }
}

/// Loads one axis worth of ratings from any artifact the tools write: a
/// rating table or session export, a quality report, a classification
/// JSON-lines file, or a rater output directory holding the latter two.
pub fn load_ratings(path: &Path, axis: Axis) -> Result<RatingTable, ConfigError> {
    if path.is_dir() {
        let file = match axis {
            Axis::FnF => "classifications.jsonl",
            Axis::Criterion(_) => "quality_report.json",
        };
        return load_ratings(&path.join(file), axis);
    }
    let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
    let missing = || ConfigError::parse(path, format!("no {axis} ratings in this file"));
    match serde_json::from_str::<serde_json::Value>(&raw) {
        Ok(value) if value.get("criterion_verdicts").is_some() => {
            let Axis::Criterion(c) = axis else { return Err(missing()) };
            let report: QualityReport = serde_json::from_value(value).map_err(|e| ConfigError::parse(path, e))?;
            Ok(criterion_table(&report, c))
        }
        Ok(value) if value.get("requirement_id").is_some() => fnf_records(path, &raw, axis),
        Ok(value) => {
            let bundle: RatingBundle = serde_json::from_value(value).map_err(|e| ConfigError::parse(path, e))?;
            bundle.table(axis).cloned().ok_or_else(missing)
        }
        Err(_) => fnf_records(path, &raw, axis),
    }
}

fn fnf_records(path: &Path, raw: &str, axis: Axis) -> Result<RatingTable, ConfigError> {
    if axis != Axis::FnF {
        return Err(ConfigError::parse(path, format!("classification records carry no {axis} ratings")));
    }
    let records = parse_json_lines(raw).map_err(|e| ConfigError::parse(path, e))?;
    Ok(fnf_table(&records))
}

/// FnF rating table from classification records; one rater column per
/// distinct `rater_id` in order of appearance.
pub fn fnf_table(records: &[ClassificationRecord]) -> RatingTable {
    let mut table = RatingTable::new(Some(Axis::FnF), Axis::FnF.category_set(), Vec::new());
    let mut index: IndexMap<String, usize> = IndexMap::new();
    for rec in records {
        if !table.raters.contains(&rec.rater_id) {
            table.raters.push(rec.rater_id.clone());
        }
        let pos = *index.entry(rec.requirement_id.clone()).or_insert_with(|| {
            table.rows.push(RatingRow { item: rec.requirement_id.clone(), labels: IndexMap::new(), rationales: IndexMap::new() });
            table.rows.len() - 1
        });
        let row = &mut table.rows[pos];
        row.labels.insert(rec.rater_id.clone(), rec.class.label().as_str().to_string());
        if !rec.rationale.is_empty() {
            row.rationales.insert(rec.rater_id.clone(), rec.rationale.clone());
        }
    }
    table
}

/// Pass/Fail table for one criterion from a quality report. NotAssessable
/// verdicts leave the cell empty.
pub fn criterion_table(report: &QualityReport, criterion: Criterion) -> RatingTable {
    let axis = Axis::Criterion(criterion);
    let rater = report.rater_id.clone();
    let mut table = RatingTable::new(Some(axis), axis.category_set(), vec![rater.clone()]);
    for (id, verdicts) in &report.criterion_verdicts {
        let mut row = RatingRow { item: id.clone(), labels: IndexMap::new(), rationales: IndexMap::new() };
        if let Some(v @ (Verdict::Pass | Verdict::Fail)) = verdicts.get(&criterion).copied() {
            row.labels.insert(rater.clone(), verdict_label(v).to_string());
        }
        let why: Vec<&str> = report
            .findings(id)
            .iter()
            .filter(|f| f.criterion == criterion && f.severity != Severity::Info)
            .map(|f| f.message.as_str())
            .collect();
        if !why.is_empty() {
            row.rationales.insert(rater.clone(), why.join("; "));
        } else if let Some(note) = report.annotations.get(id) {
            row.rationales.insert(rater.clone(), note.clone());
        }
        table.rows.push(row);
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseKappa {
    pub rater_a: String,
    pub rater_b: String,
    pub stats: Option<AgreementStats>,
}

/// Agreement summary for one axis. Written as JSON by `compare` and by the
/// session agreement endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub axis: Option<Axis>,
    pub raters: Vec<String>,
    pub category_set: Vec<String>,
    /// "cohen" for two raters, "fleiss" for more.
    pub method: String,
    pub n_items: usize,
    pub n_excluded: usize,
    pub excluded_items: Vec<String>,
    pub stats: Option<AgreementStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairwise: Vec<PairwiseKappa>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn compare_tables(table: &RatingTable) -> Result<AgreementReport, AgreementError> {
    let (matrix, excluded) = table.complete()?;
    let n_raters = matrix.raters().len();
    if n_raters < 2 {
        return Err(AgreementError::WrongRaterCount { expected: "at least 2", found: n_raters });
    }
    let mut notes = Vec::new();
    if !excluded.is_empty() {
        notes.push(format!(
            "{} of {} items excluded listwise (not labeled by every rater)",
            excluded.len(),
            excluded.len() + matrix.n_items()
        ));
    }
    let kappa = |r: Result<AgreementStats, AgreementError>, notes: &mut Vec<String>| match r {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let (method, stats, confusion, pairwise) = if n_raters == 2 {
        let stats = kappa(cohen_kappa(&matrix), &mut notes);
        ("cohen", stats, Some(confusion_matrix(&matrix)?), Vec::new())
    } else {
        let stats = kappa(fleiss_kappa(&matrix), &mut notes);
        let mut pairs = Vec::new();
        for a in 0..n_raters {
            for b in a + 1..n_raters {
                pairs.push(PairwiseKappa {
                    rater_a: matrix.raters()[a].clone(),
                    rater_b: matrix.raters()[b].clone(),
                    stats: cohen_kappa(&matrix.pair(a, b)).ok(),
                });
            }
        }
        ("fleiss", stats, None, pairs)
    };
    Ok(AgreementReport {
        axis: table.axis,
        raters: matrix.raters().to_vec(),
        category_set: matrix.category_set().to_vec(),
        method: method.to_string(),
        n_items: matrix.n_items(),
        n_excluded: excluded.len(),
        excluded_items: excluded,
        stats,
        confusion,
        pairwise,
        notes,
    })
}

impl AgreementReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Plain-text rendering for terminals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let axis = self.axis.map_or_else(|| "labels".to_string(), |a| a.to_string());
        let _ = writeln!(out, "Agreement on {axis}: {}", self.raters.join(" vs "));
        let _ = writeln!(out, "  items compared   {} (excluded {})", self.n_items, self.n_excluded);
        match &self.stats {
            Some(s) => {
                let name = if self.method == "cohen" { "Cohen's kappa" } else { "Fleiss' kappa" };
                let _ = writeln!(out, "  observed p_o     {:.6}", s.p_o);
                let _ = writeln!(out, "  chance p_e       {:.6}", s.p_e);
                let _ = writeln!(out, "  {name:<16} {:.6} ({})", s.kappa, s.interpretation_band.label());
            }
            None => {
                let _ = writeln!(out, "  kappa            undefined");
            }
        }
        if let Some(cm) = &self.confusion {
            let width = cm.categories.iter().map(String::len).max().unwrap_or(0).max(6);
            let _ = writeln!(out, "  confusion (rows {}, columns {}):", self.raters[0], self.raters[1]);
            let _ = write!(out, "    {:width$}", "");
            for c in &cm.categories {
                let _ = write!(out, " {c:>width$}");
            }
            out.push('\n');
            for (c, row) in cm.categories.iter().zip(&cm.counts) {
                let _ = write!(out, "    {c:width$}");
                for n in row {
                    let _ = write!(out, " {n:>width$}");
                }
                out.push('\n');
            }
        }
        for p in &self.pairwise {
            let k = p.stats.as_ref().map_or_else(|| "undefined".to_string(), |s| format!("{:.6}", s.kappa));
            let _ = writeln!(out, "  pairwise {} vs {}: {k}", p.rater_a, p.rater_b);
        }
        for note in &self.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        out
    }
}
