//! Corpus-level runs over several raters with a bounded worker pool, a
//! shared request-rate limiter and an append-only journal for resumption.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::transport::{transport_for, ChatRequest, ChatTransport};
use super::{assess_with_llm, validate_profiles, LlmError, LlmProfile, LlmVerdictPayload, PromptConfig};
use crate::corpus::RequirementSet;
use crate::quality_rules::{Criterion, Finding, Provenance, QualityReport, Severity, Verdict};
use crate::taxonomy::{self, ClassificationRecord};

/// Rule id on findings derived from a model's Fail verdicts.
pub const LLM_RULE_ID: &str = "llm.judgment";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateBudget {
    /// Upper bound on requests in flight across all raters.
    pub max_concurrent: usize,
    /// Upper bound on requests issued per minute across all raters.
    pub requests_per_minute: Option<u32>,
}

impl Default for RateBudget {
    fn default() -> Self {
        Self { max_concurrent: 4, requests_per_minute: None }
    }
}

#[derive(Clone)]
pub struct Rater {
    pub profile: LlmProfile,
    pub transport: Arc<dyn ChatTransport>,
}

impl Rater {
    pub fn new(profile: LlmProfile, transport: Arc<dyn ChatTransport>) -> Self {
        Self { profile, transport }
    }

    pub fn from_profile(profile: LlmProfile) -> Result<Self, LlmError> {
        let transport = transport_for(&profile)?;
        Ok(Self { profile, transport })
    }
}

#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EnsembleOptions {
    pub journal: Option<PathBuf>,
    /// Keep completed entries of an existing journal instead of starting over.
    pub resume: bool,
    pub cancel: CancelToken,
    pub prompts: PromptConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    Transport,
    Auth,
    MalformedResponse,
    SchemaViolation,
    Config,
}

impl FailureKind {
    fn of(err: &LlmError) -> Self {
        match err {
            LlmError::Transport(_) => FailureKind::Transport,
            LlmError::Auth(_) => FailureKind::Auth,
            LlmError::MalformedResponse { .. } => FailureKind::MalformedResponse,
            LlmError::SchemaViolation { .. } => FailureKind::SchemaViolation,
            LlmError::Config(_) => FailureKind::Config,
        }
    }

    /// Whether the failure is the model's answer (journaled, not re-sent) as
    /// opposed to an environment problem worth retrying on resume.
    pub fn is_final(self) -> bool {
        matches!(self, FailureKind::MalformedResponse | FailureKind::SchemaViolation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JournalOutcome {
    Assessed { payload: LlmVerdictPayload },
    Failed {
        kind: FailureKind,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        raw: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub rater_id: String,
    pub requirement_id: String,
    pub outcome: JournalOutcome,
    pub retry_count: u32,
    pub started_at: DateTime<Utc>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub requirement_id: String,
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaterOutcome {
    pub rater_id: String,
    pub report: QualityReport,
    pub classifications: Vec<ClassificationRecord>,
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("{0}")]
    Config(String),
    #[error("journal {path}: {source}")]
    Journal { path: PathBuf, source: io::Error },
    #[error("run cancelled after {completed} of {total} assessments")]
    Cancelled { completed: usize, total: usize },
}

/// Journal entries in file order. A final line without a newline is a torn
/// write and is dropped; the returned length is the byte size of the intact
/// prefix.
pub fn read_journal(path: &Path) -> io::Result<(Vec<JournalRecord>, u64)> {
    let raw = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut intact = 0usize;
    for (n, chunk) in raw.split_inclusive('\n').enumerate() {
        if !chunk.ends_with('\n') {
            break;
        }
        if !chunk.trim().is_empty() {
            let record = serde_json::from_str(chunk).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}: line {}: {e}", path.display(), n + 1))
            })?;
            records.push(record);
        }
        intact += chunk.len();
    }
    Ok((records, intact as u64))
}

fn open_journal(path: &Path, resume: bool) -> io::Result<(File, Vec<JournalRecord>)> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    if resume && path.exists() {
        let (records, intact) = read_journal(path)?;
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(intact)?;
        drop(file);
        return Ok((OpenOptions::new().append(true).open(path)?, records));
    }
    Ok((File::create(path)?, Vec::new()))
}

struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(requests_per_minute: Option<u32>) -> Self {
        let interval = requests_per_minute.map(|rpm| Duration::from_secs_f64(60.0 / f64::from(rpm)));
        Self { interval, next: Mutex::new(None) }
    }

    /// Blocks until this caller's slot. Slots are spaced one interval apart.
    fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let slot = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

struct Gated<'a> {
    inner: &'a dyn ChatTransport,
    limiter: &'a RateLimiter,
}

impl ChatTransport for Gated<'_> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, LlmError> {
        self.limiter.acquire();
        self.inner.complete(request)
    }
}

fn run_one(rater: &Rater, limiter: &RateLimiter, req: &crate::corpus::Requirement, prompts: &PromptConfig) -> JournalRecord {
    let started_at = Utc::now();
    let clock = Instant::now();
    let gated = Gated { inner: rater.transport.as_ref(), limiter };
    let (outcome, retry_count) = match assess_with_llm(&gated, &rater.profile, req, prompts) {
        Ok(done) => (JournalOutcome::Assessed { payload: done.value }, done.retry_count),
        Err(err) => {
            let raw = match &err {
                LlmError::MalformedResponse { raw, .. } | LlmError::SchemaViolation { raw, .. } => Some(raw.clone()),
                _ => None,
            };
            let retries = if FailureKind::of(&err).is_final() { rater.profile.max_retries } else { 0 };
            (JournalOutcome::Failed { kind: FailureKind::of(&err), detail: err.to_string(), raw }, retries)
        }
    };
    JournalRecord {
        rater_id: rater.profile.rater_id.clone(),
        requirement_id: req.id.clone(),
        outcome,
        retry_count,
        started_at,
        elapsed_ms: clock.elapsed().as_millis() as u64,
    }
}

/// Assesses every requirement with every rater.
///
/// Each (rater, requirement) pair is sent at most once per journal: answers
/// and answer-level failures are appended as they arrive, and a resumed run
/// skips pairs already journaled. Transport and auth failures are reported
/// but not journaled, so a resumed run retries them. Failed pairs appear in
/// the result as NotAssessable with the error in the report's annotations.
pub fn assess_corpus_ensemble(
    raters: &[Rater],
    set: &RequirementSet,
    budget: &RateBudget,
    options: &EnsembleOptions,
) -> Result<IndexMap<String, RaterOutcome>, EnsembleError> {
    let profiles: Vec<LlmProfile> = raters.iter().map(|r| r.profile.clone()).collect();
    validate_profiles(&profiles).map_err(|e| EnsembleError::Config(e.to_string()))?;
    if budget.max_concurrent == 0 || budget.requests_per_minute == Some(0) {
        return Err(EnsembleError::Config("budget limits must be positive".into()));
    }

    let mut results: HashMap<(String, String), JournalRecord> = HashMap::new();
    let mut journal = None;
    if let Some(path) = &options.journal {
        let journal_err = |source| EnsembleError::Journal { path: path.clone(), source };
        let (file, previous) = open_journal(path, options.resume).map_err(journal_err)?;
        for record in previous {
            results.insert((record.rater_id.clone(), record.requirement_id.clone()), record);
        }
        journal = Some(file);
    }

    let jobs: Vec<(usize, usize)> = (0..set.len())
        .flat_map(|q| (0..raters.len()).map(move |r| (r, q)))
        .filter(|&(r, q)| !results.contains_key(&(raters[r].profile.rater_id.clone(), set.requirements[q].id.clone())))
        .collect();
    let total = raters.len() * set.len();

    let limiter = RateLimiter::new(budget.requests_per_minute);
    let next = AtomicUsize::new(0);
    let mut write_error = None;
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<JournalRecord>();
        for _ in 0..budget.max_concurrent.min(jobs.len()) {
            let tx = tx.clone();
            let (jobs, next, limiter) = (&jobs, &next, &limiter);
            scope.spawn(move || loop {
                if options.cancel.is_cancelled() {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(r, q)) = jobs.get(i) else { break };
                let record = run_one(&raters[r], limiter, &set.requirements[q], &options.prompts);
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single writer: every journal append happens on this thread
        for record in rx {
            let durable = match &record.outcome {
                JournalOutcome::Assessed { .. } => true,
                JournalOutcome::Failed { kind, .. } => kind.is_final(),
            };
            if let (true, Some(file), None) = (durable, journal.as_mut(), write_error.as_ref()) {
                let mut line = serde_json::to_string(&record).expect("journal records serialize");
                line.push('\n');
                if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                    write_error = Some(e);
                }
            }
            results.insert((record.rater_id.clone(), record.requirement_id.clone()), record);
        }
    });
    if let (Some(source), Some(path)) = (write_error, &options.journal) {
        return Err(EnsembleError::Journal { path: path.clone(), source });
    }
    let completed = raters
        .iter()
        .flat_map(|r| set.iter().map(move |q| (r.profile.rater_id.clone(), q.id.clone())))
        .filter(|k| results.contains_key(k))
        .count();
    if completed < total {
        return Err(EnsembleError::Cancelled { completed, total });
    }

    Ok(raters
        .iter()
        .map(|rater| {
            let id = &rater.profile.rater_id;
            let records = set.iter().map(|q| &results[&(id.clone(), q.id.clone())]);
            (id.clone(), collect_outcome(id, records))
        })
        .collect())
}

fn collect_outcome<'a>(rater_id: &str, records: impl Iterator<Item = &'a JournalRecord>) -> RaterOutcome {
    let mut report = QualityReport {
        rater_id: rater_id.to_string(),
        analyzer_provenance: Provenance::LlmOnly,
        per_requirement: IndexMap::new(),
        criterion_verdicts: IndexMap::new(),
        near_duplicates: Vec::new(),
        annotations: IndexMap::new(),
    };
    let mut classifications = Vec::new();
    let mut failures = Vec::new();
    for record in records {
        let id = record.requirement_id.clone();
        match &record.outcome {
            JournalOutcome::Assessed { payload } => {
                let findings = payload
                    .per_criterion
                    .iter()
                    .filter(|(_, j)| j.verdict == Verdict::Fail)
                    .map(|(c, j)| Finding {
                        requirement_id: id.clone(),
                        criterion: *c,
                        severity: Severity::Violation,
                        rule_id: LLM_RULE_ID.to_string(),
                        message: j.justification.clone(),
                        evidence: Vec::new(),
                    })
                    .collect();
                report.per_requirement.insert(id.clone(), findings);
                report.criterion_verdicts.insert(id.clone(), payload.per_criterion.iter().map(|(c, j)| (*c, j.verdict)).collect());
                if let Some(fnf) = &payload.fnf {
                    classifications.push(ClassificationRecord {
                        requirement_id: id,
                        rater_id: rater_id.to_string(),
                        class: fnf.class,
                        rationale: fnf.rationale.clone(),
                        confidence: None,
                    });
                }
            }
            JournalOutcome::Failed { kind, detail, .. } => {
                report.per_requirement.insert(id.clone(), Vec::new());
                report.criterion_verdicts.insert(id.clone(), Criterion::ALL.into_iter().map(|c| (c, Verdict::NotAssessable)).collect());
                report.annotations.insert(id.clone(), detail.clone());
                failures.push(ItemFailure { requirement_id: id, kind: *kind, detail: detail.clone() });
            }
        }
    }
    RaterOutcome { rater_id: rater_id.to_string(), report, classifications, failures }
}

/// Writes `<dir>/<rater_id>/quality_report.json` and
/// `<dir>/<rater_id>/classifications.jsonl` for each rater.
pub fn write_outputs(outcomes: &IndexMap<String, RaterOutcome>, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (rater_id, outcome) in outcomes {
        let sub = dir.join(rater_id);
        fs::create_dir_all(&sub)?;
        let report = sub.join("quality_report.json");
        fs::write(&report, outcome.report.to_json())?;
        let classes = sub.join("classifications.jsonl");
        taxonomy::write_json_lines(&outcome.classifications, &classes)?;
        written.extend([report, classes]);
    }
    Ok(written)
}
