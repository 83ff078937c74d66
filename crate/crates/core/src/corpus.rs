//! Requirement data model and corpus ingestion/persistence (JSON and CSV).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Column contract for CSV corpora.
pub const CSV_HEADER: [&str; 6] = ["id", "level", "text", "kind_hint", "tags", "source"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Stakeholder,
    System,
}

/// Functional vs. non-functional label, as used for author hints and for
/// classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Functional,
    NonFunctional,
}

impl Kind {
    pub const ALL: [Kind; 2] = [Kind::Functional, Kind::NonFunctional];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Functional => "Functional",
            Kind::NonFunctional => "NonFunctional",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "functional" | "f" => Ok(Kind::Functional),
            "nonfunctional" | "nf" => Ok(Kind::NonFunctional),
            _ => Err(format!("unknown kind {s:?}")),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Stakeholder => "Stakeholder",
            Level::System => "System",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stakeholder" => Ok(Level::Stakeholder),
            "system" => Ok(Level::System),
            _ => Err(format!("unknown level {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub id: String,
    pub text: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind_hint: Option<Kind>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Requirement {
    pub fn new(id: impl Into<String>, level: Level, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into().trim().to_string(),
            level,
            kind_hint: None,
            tags: Vec::new(),
            source: None,
        }
    }

    pub fn with_hint(mut self, kind: Kind) -> Self {
        self.kind_hint = Some(kind);
        self
    }

    fn normalize(&mut self) {
        self.id = self.id.trim().to_string();
        self.text = self.text.trim().to_string();
        self.tags = self
            .tags
            .iter()
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        if self.source.as_deref().is_some_and(|s| s.trim().is_empty()) {
            self.source = None;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementSet {
    pub schema_version: u32,
    pub name: String,
    pub requirements: Vec<Requirement>,
}

impl RequirementSet {
    pub fn new(name: impl Into<String>, requirements: Vec<Requirement>) -> Self {
        Self { schema_version: SCHEMA_VERSION, name: name.into(), requirements }
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Requirement> {
        self.requirements.iter().find(|r| r.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Requirement> {
        self.requirements.iter()
    }

    pub fn count_level(&self, level: Level) -> usize {
        self.requirements.iter().filter(|r| r.level == level).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Auto,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "auto" => Ok(Format::Auto),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    /// `record` is 1-based; for CSV it counts data rows, for JSON it is the
    /// position in the `requirements` array when known.
    #[error("parse error at line {line}, record {record}: {message}")]
    Parse { line: usize, record: usize, message: String },
    #[error("duplicate requirement id {id:?} at records {positions:?}")]
    DuplicateId { id: String, positions: Vec<usize> },
    #[error("requirement {0:?} has empty text")]
    EmptyText(String),
    #[error("requirement at record {0} has an empty id")]
    EmptyId(usize),
    #[error("cannot infer corpus format from {0:?}")]
    UnknownFormat(String),
    #[error("tag {tag:?} of requirement {id:?} cannot be written to CSV")]
    UnrepresentableTag { id: String, tag: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A violated corpus invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue")]
pub enum CorpusIssue {
    EmptyId { position: usize },
    EmptyText { id: String, position: usize },
    DuplicateId { id: String, positions: Vec<usize> },
}

pub fn resolve_format(path: &Path, format: Format) -> Result<Format, CorpusError> {
    match format {
        Format::Auto => match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "json" => Ok(Format::Json),
            Some(ext) if ext == "csv" => Ok(Format::Csv),
            _ => Err(CorpusError::UnknownFormat(path.display().to_string())),
        },
        f => Ok(f),
    }
}

pub fn load_corpus(path: &Path, format: Format) -> Result<RequirementSet, CorpusError> {
    let format = resolve_format(path, format)?;
    let raw = fs::read_to_string(path)?;
    let set = match format {
        Format::Json => parse_json(&raw)?,
        Format::Csv => {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus").to_string();
            parse_csv(&raw, name)?
        }
        Format::Auto => unreachable!("resolved above"),
    };
    check_invariants(&set)?;
    Ok(set)
}

pub fn parse_json(raw: &str) -> Result<RequirementSet, CorpusError> {
    let mut set: RequirementSet = serde_json::from_str(raw).map_err(|e| CorpusError::Parse {
        line: e.line(),
        record: json_record_at(raw, e.line()),
        message: e.to_string(),
    })?;
    if set.schema_version != SCHEMA_VERSION {
        return Err(CorpusError::Parse {
            line: 1,
            record: 0,
            message: format!("unsupported schema_version {}", set.schema_version),
        });
    }
    set.requirements.iter_mut().for_each(Requirement::normalize);
    Ok(set)
}

// Best-effort record index for a JSON error line: counts `"id"` keys seen
// before the offending line.
fn json_record_at(raw: &str, line: usize) -> usize {
    raw.lines().take(line).filter(|l| l.contains("\"id\"")).count()
}

pub fn parse_csv(raw: &str, name: String) -> Result<RequirementSet, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(raw.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(e, 0))?.clone();
    if headers.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(CorpusError::Parse {
            line: 1,
            record: 0,
            message: format!("expected header {:?}, found {:?}", CSV_HEADER.join(","), headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut requirements = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let record = idx + 1;
        let row = row.map_err(|e| csv_error(e, record))?;
        let line = row.position().map_or(record + 1, |p| p.line() as usize);
        let bad = |message: String| CorpusError::Parse { line, record, message };
        let level = row[1].parse::<Level>().map_err(bad)?;
        let kind_hint = match row[3].trim() {
            "" => None,
            k => Some(k.parse::<Kind>().map_err(|m| CorpusError::Parse { line, record, message: m })?),
        };
        let tags = row[4].split(';').map(str::to_string).collect();
        let source = Some(row[5].to_string());
        let mut req = Requirement { id: row[0].to_string(), text: row[2].to_string(), level, kind_hint, tags, source };
        req.normalize();
        requirements.push(req);
    }
    Ok(RequirementSet::new(name, requirements))
}

fn csv_error(e: csv::Error, record: usize) -> CorpusError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    CorpusError::Parse { line, record, message: e.to_string() }
}

fn check_invariants(set: &RequirementSet) -> Result<(), CorpusError> {
    match validate_corpus(set).into_iter().next() {
        None => Ok(()),
        Some(CorpusIssue::EmptyId { position }) => Err(CorpusError::EmptyId(position)),
        Some(CorpusIssue::EmptyText { id, .. }) => Err(CorpusError::EmptyText(id)),
        Some(CorpusIssue::DuplicateId { id, positions }) => Err(CorpusError::DuplicateId { id, positions }),
    }
}

/// Every invariant violation in `set`, ordered by the position of the first
/// offending record. Positions are 1-based.
pub fn validate_corpus(set: &RequirementSet) -> Vec<CorpusIssue> {
    let mut issues: Vec<(usize, CorpusIssue)> = Vec::new();
    let mut seen: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (i, req) in set.requirements.iter().enumerate() {
        let position = i + 1;
        if req.id.trim().is_empty() {
            issues.push((position, CorpusIssue::EmptyId { position }));
            continue;
        }
        if req.text.trim().is_empty() {
            issues.push((position, CorpusIssue::EmptyText { id: req.id.clone(), position }));
        }
        let entry = seen.entry(req.id.as_str()).or_default();
        if entry.is_empty() {
            order.push(req.id.as_str());
        }
        entry.push(position);
    }
    for id in order {
        let positions = &seen[id];
        if positions.len() > 1 {
            issues.push((positions[1], CorpusIssue::DuplicateId { id: id.to_string(), positions: positions.clone() }));
        }
    }
    issues.sort_by_key(|(p, _)| *p);
    issues.into_iter().map(|(_, i)| i).collect()
}

pub fn save_corpus(set: &RequirementSet, path: &Path, format: Format) -> Result<(), CorpusError> {
    let body = match resolve_format(path, format)? {
        Format::Json => to_json(set),
        Format::Csv => to_csv(set)?,
        Format::Auto => unreachable!("resolved above"),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, body)?;
    Ok(())
}

pub fn to_json(set: &RequirementSet) -> String {
    let mut s = serde_json::to_string_pretty(set).expect("requirement sets always serialize");
    s.push('\n');
    s
}

pub fn to_csv(set: &RequirementSet) -> Result<String, CorpusError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    writer.write_record(CSV_HEADER).map_err(io::Error::from)?;
    for req in &set.requirements {
        if let Some(tag) = req.tags.iter().find(|t| t.contains(';') || t.trim() != t.as_str() || t.is_empty()) {
            return Err(CorpusError::UnrepresentableTag { id: req.id.clone(), tag: tag.clone() });
        }
        let level = req.level.to_string();
        let hint = req.kind_hint.map(|k| k.as_str()).unwrap_or("");
        let tags = req.tags.join(";");
        writer
            .write_record([req.id.as_str(), level.as_str(), req.text.as_str(), hint, tags.as_str(), req.source.as_deref().unwrap_or("")])
            .map_err(io::Error::from)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample() -> RequirementSet {
        RequirementSet::new(
            "demo",
            vec![
                Requirement::new("SR-01", Level::System, "The system shall respond within 2 seconds.").with_hint(Kind::NonFunctional),
                Requirement::new("SR-02", Level::System, "The system shall alert staff, \"now\",\nloudly."),
                Requirement { tags: vec!["alerts".into(), "rfid".into()], source: Some("SRS §3".into()), ..Requirement::new("STK-1", Level::Stakeholder, "Nurses need to find tools.") },
            ],
        )
    }

    #[test]
    fn json_two_requirements_order_preserved() {
        let raw = r#"{"schema_version":1,"name":"x","requirements":[
            {"id":"B","text":"The system shall log scans.","level":"System"},
            {"id":"A","text":"  Staff shall be alerted.  ","level":"Stakeholder"}]}"#;
        let set = parse_json(raw).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.requirements[0].id, "B");
        assert_eq!(set.requirements[1].text, "Staff shall be alerted.");
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let raw = r#"{"schema_version":1,"name":"x","requirements":[{"id":"A","txt":"t","level":"System"}]}"#;
        assert!(matches!(parse_json(raw), Err(CorpusError::Parse { .. })));
    }

    #[test]
    fn csv_duplicate_id_names_both_rows() {
        let mut raw = String::from("id,level,text,kind_hint,tags,source\n");
        for i in 1..=7 {
            let id = if i == 3 || i == 7 { "SR-01".to_string() } else { format!("SR-1{i}") };
            raw.push_str(&format!("{id},System,The system shall do thing {i}.,,,\n"));
        }
        let dir = tempdir().unwrap();
        let path = dir.path().join("dups.csv");
        fs::write(&path, raw).unwrap();
        match load_corpus(&path, Format::Auto) {
            Err(CorpusError::DuplicateId { id, positions }) => {
                assert_eq!(id, "SR-01");
                assert_eq!(positions, vec![3, 7]);
            }
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn csv_bad_level_reports_position() {
        let raw = "id,level,text,kind_hint,tags,source\nA,System,ok text,,,\nB,Planet,bad,,,\n";
        match parse_csv(raw, "x".into()) {
            Err(CorpusError::Parse { line, record, .. }) => assert_eq!((line, record), (3, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_text_is_rejected_at_load() {
        let raw = "id,level,text,kind_hint,tags,source\nA,System,   ,,,\n";
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, raw).unwrap();
        assert!(matches!(load_corpus(&path, Format::Csv), Err(CorpusError::EmptyText(id)) if id == "A"));
    }

    #[test]
    fn unknown_extension() {
        assert!(matches!(load_corpus(Path::new("x.yaml"), Format::Auto), Err(CorpusError::UnknownFormat(_))));
    }

    #[test]
    fn empty_set_has_envelope_and_header() {
        let set = RequirementSet::new("empty", vec![]);
        assert_eq!(to_csv(&set).unwrap(), "id,level,text,kind_hint,tags,source\r\n");
        let json: serde_json::Value = serde_json::from_str(&to_json(&set)).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["requirements"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn three_requirement_csv_round_trip() {
        let dir = tempdir().unwrap();
        let set = sample();
        let path = dir.path().join("demo.csv");
        save_corpus(&set, &path, Format::Csv).unwrap();
        assert_eq!(load_corpus(&path, Format::Auto).unwrap(), set);
        let path = dir.path().join("demo.json");
        save_corpus(&set, &path, Format::Json).unwrap();
        assert_eq!(load_corpus(&path, Format::Auto).unwrap(), set);
    }

    #[test]
    fn csv_quotes_commas_quotes_newlines() {
        let csv = to_csv(&sample()).unwrap();
        assert!(csv.contains("\"The system shall alert staff, \"\"now\"\",\nloudly.\""));
    }

    #[test]
    fn validate_reports_issues() {
        let mut set = sample();
        assert!(validate_corpus(&set).is_empty());
        set.requirements[1].text = "   ".into();
        set.requirements[2].id = "SR-01".into();
        let issues = validate_corpus(&set);
        assert_eq!(
            issues,
            vec![
                CorpusIssue::EmptyText { id: "SR-02".into(), position: 2 },
                CorpusIssue::DuplicateId { id: "SR-01".into(), positions: vec![1, 3] },
            ]
        );
    }
}
