use std::fs;
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use reqlens_core::corpus::{Level, Requirement, RequirementSet};
use reqlens_core::llm_bridge::{
    assess_corpus_ensemble, read_journal, write_outputs, CancelToken, EnsembleError, EnsembleOptions, FailureKind,
    JournalOutcome, LlmProfile, MockSpec, MockTransport, RateBudget, Rater,
};
use reqlens_core::{Criterion, Verdict};

fn corpus(n: usize) -> RequirementSet {
    let texts = [
        "The reader shall report each tag read within 2 seconds.",
        "The system shall encrypt all stored records.",
        "The console shall display the location of each tracked tray.",
        "The interface shall be intuitive.",
        "The system shall alert staff when a tray leaves the sterile area.",
    ];
    let reqs = (0..n).map(|i| Requirement::new(format!("SR-{:02}", i + 1), Level::System, texts[i % texts.len()])).collect();
    RequirementSet::new("fixture", reqs)
}

fn mock_rater(id: &str, spec: MockSpec) -> (Rater, Arc<MockTransport>) {
    let mock = Arc::new(MockTransport::new(spec.clone()));
    (Rater::new(LlmProfile::mock(id, spec), mock.clone()), mock)
}

fn journal_lines(path: &std::path::Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn one_mock_three_requirements() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let (rater, mock) = mock_rater("mock-a", MockSpec::default());
    let options = EnsembleOptions { journal: Some(journal.clone()), ..Default::default() };
    let out = assess_corpus_ensemble(&[rater], &corpus(3), &RateBudget::default(), &options).unwrap();
    assert_eq!(mock.call_count(), 3);
    assert_eq!(journal_lines(&journal), 3);
    let outcome = &out["mock-a"];
    assert_eq!(outcome.report.criterion_verdicts.len(), 3);
    assert!(outcome.report.criterion_verdicts.values().all(|v| v.len() == 7));
    assert_eq!(outcome.classifications.len(), 3);
    assert!(outcome.failures.is_empty());
}

#[test]
fn two_mocks_are_kept_separate() {
    let (a, _) = mock_rater("mock-a", MockSpec::default());
    let (b, _) = mock_rater("mock-b", MockSpec { flip_rate: 0.5, seed: 3, ..MockSpec::default() });
    let out = assess_corpus_ensemble(&[a, b], &corpus(5), &RateBudget::default(), &EnsembleOptions::default()).unwrap();
    assert_eq!(out.keys().collect::<Vec<_>>(), ["mock-a", "mock-b"]);
    assert_eq!(out["mock-b"].report.rater_id, "mock-b");
    assert_ne!(out["mock-a"].report.criterion_verdicts, out["mock-b"].report.criterion_verdicts);
}

#[test]
fn duplicate_rater_ids_rejected() {
    let (a, _) = mock_rater("same", MockSpec::default());
    let (b, _) = mock_rater("same", MockSpec::default());
    let err = assess_corpus_ensemble(&[a, b], &corpus(1), &RateBudget::default(), &EnsembleOptions::default()).unwrap_err();
    assert!(matches!(err, EnsembleError::Config(m) if m.contains("duplicate")));
}

fn run_to_dir(raters: &[Rater], set: &RequirementSet, options: &EnsembleOptions, out: &std::path::Path) -> Result<(), EnsembleError> {
    let outcomes = assess_corpus_ensemble(raters, set, &RateBudget { max_concurrent: 1, requests_per_minute: None }, options)?;
    write_outputs(&outcomes, out).unwrap();
    Ok(())
}

#[test]
fn interrupted_run_resumes_with_one_new_call() {
    let dir = tempfile::tempdir().unwrap();
    let set = corpus(3);
    let spec = MockSpec { flip_rate: 0.3, seed: 11, ..MockSpec::default() };

    // uninterrupted reference
    let (reference, _) = mock_rater("mock-a", spec.clone());
    let ref_opts = EnsembleOptions { journal: Some(dir.path().join("ref.jsonl")), ..Default::default() };
    run_to_dir(&[reference], &set, &ref_opts, &dir.path().join("ref")).unwrap();

    // cancel as soon as the second upstream call returns
    let cancel = CancelToken::default();
    let hook_cancel = cancel.clone();
    let mock = Arc::new(MockTransport::new(spec.clone()).with_hook(move |n| if n == 2 { hook_cancel.cancel() }));
    let rater = Rater::new(LlmProfile::mock("mock-a", spec.clone()), mock.clone());
    let journal = dir.path().join("run.jsonl");
    let opts = EnsembleOptions { journal: Some(journal.clone()), cancel, ..Default::default() };
    let err = run_to_dir(&[rater.clone()], &set, &opts, &dir.path().join("run")).unwrap_err();
    assert!(matches!(err, EnsembleError::Cancelled { completed: 2, total: 3 }));
    assert_eq!(journal_lines(&journal), 2);

    let resume = EnsembleOptions { journal: Some(journal.clone()), resume: true, ..Default::default() };
    run_to_dir(&[rater], &set, &resume, &dir.path().join("run")).unwrap();
    assert_eq!(mock.call_count(), 3, "exactly one new upstream call");
    assert_eq!(journal_lines(&journal), 3);

    for file in ["mock-a/quality_report.json", "mock-a/classifications.jsonl"] {
        assert_eq!(fs::read(dir.path().join("ref").join(file)).unwrap(), fs::read(dir.path().join("run").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn torn_last_line_is_dropped_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let set = corpus(3);
    let (rater, mock) = mock_rater("mock-a", MockSpec::default());
    let opts = EnsembleOptions { journal: Some(journal.clone()), ..Default::default() };
    assess_corpus_ensemble(&[rater.clone()], &set, &RateBudget::default(), &opts).unwrap();
    let full = fs::read_to_string(&journal).unwrap();
    let keep: String = full.lines().take(2).map(|l| format!("{l}\n")).collect();
    let third = full.lines().nth(2).unwrap();
    fs::write(&journal, format!("{keep}{}", &third[..third.len() / 2])).unwrap();
    assert_eq!(read_journal(&journal).unwrap().0.len(), 2);

    let resume = EnsembleOptions { journal: Some(journal.clone()), resume: true, ..Default::default() };
    assess_corpus_ensemble(&[rater], &set, &RateBudget::default(), &resume).unwrap();
    assert_eq!(mock.call_count(), 4);
    let (records, _) = read_journal(&journal).unwrap();
    let mut ids: Vec<&str> = records.iter().map(|r| r.requirement_id.as_str()).collect();
    ids.sort();
    assert_eq!(ids, ["SR-01", "SR-02", "SR-03"]);
}

#[test]
fn failures_become_not_assessable() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let script = IndexMap::from([
        ("SR-01".to_string(), vec!["@omit:Essential".to_string()]),
        ("SR-02".to_string(), vec!["@transport-error".to_string(), "@echo".to_string()]),
    ]);
    let (rater, mock) = mock_rater("mock-a", MockSpec { script, ..MockSpec::default() });
    let opts = EnsembleOptions { journal: Some(journal.clone()), ..Default::default() };
    let out = assess_corpus_ensemble(&[rater.clone()], &corpus(3), &RateBudget::default(), &opts).unwrap();
    let outcome = &out["mock-a"];
    let kinds: Vec<_> = outcome.failures.iter().map(|f| (f.requirement_id.as_str(), f.kind)).collect();
    assert_eq!(kinds, [("SR-01", FailureKind::SchemaViolation), ("SR-02", FailureKind::Transport)]);
    for id in ["SR-01", "SR-02"] {
        assert!(Criterion::ALL.iter().all(|c| outcome.report.verdict(id, *c) == Some(Verdict::NotAssessable)));
        assert!(outcome.report.annotations.contains_key(id));
    }
    // the transport failure is not journaled, so a resume retries only it
    let (records, _) = read_journal(&journal).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().any(|r| matches!(r.outcome, JournalOutcome::Failed { kind: FailureKind::SchemaViolation, .. })));
    let before = mock.call_count();
    let resume = EnsembleOptions { journal: Some(journal), resume: true, ..Default::default() };
    let out = assess_corpus_ensemble(&[rater], &corpus(3), &RateBudget::default(), &resume).unwrap();
    assert_eq!(mock.call_count(), before + 1);
    assert_eq!(out["mock-a"].failures.len(), 1);
}

#[test]
fn concurrency_bound_is_respected() {
    let spec = MockSpec { latency_ms: 15, ..MockSpec::default() };
    let mock = Arc::new(MockTransport::new(spec.clone()));
    let raters: Vec<Rater> = ["a", "b", "c"].iter().map(|id| Rater::new(LlmProfile::mock(*id, spec.clone()), mock.clone())).collect();
    let budget = RateBudget { max_concurrent: 2, requests_per_minute: None };
    assess_corpus_ensemble(&raters, &corpus(6), &budget, &EnsembleOptions::default()).unwrap();
    assert_eq!(mock.call_count(), 18);
    assert!(mock.max_in_flight() <= 2);
    assert_eq!(mock.max_in_flight(), 2);
}

#[test]
fn request_rate_is_respected() {
    let mock = Arc::new(MockTransport::new(MockSpec::default()));
    let raters: Vec<Rater> = ["a", "b"].iter().map(|id| Rater::new(LlmProfile::mock(*id, MockSpec::default()), mock.clone())).collect();
    // 1200 per minute: one request every 50 ms
    let budget = RateBudget { max_concurrent: 4, requests_per_minute: Some(1200) };
    let start = Instant::now();
    assess_corpus_ensemble(&raters, &corpus(4), &budget, &EnsembleOptions::default()).unwrap();
    let mut starts: Vec<Duration> = mock.call_log().iter().map(|c| c.started - start).collect();
    starts.sort();
    assert_eq!(starts.len(), 8);
    for (k, t) in starts.iter().enumerate() {
        assert!(*t + Duration::from_millis(1) >= Duration::from_millis(50) * k as u32, "call {k} at {t:?}");
    }
}
