//! Deterministic offline stand-in for a hosted model.
//!
//! By default the mock answers like the rule engine would (with Essential
//! judged Pass), optionally flipping a seeded fraction of verdicts so that
//! several mock raters disagree reproducibly. Per-requirement scripts
//! override that. A script entry is either literal answer text or one of:
//!
//! | directive          | answer                                            |
//! |--------------------|---------------------------------------------------|
//! | `@echo`            | the default answer                                |
//! | `@all-pass`        | every criterion Pass                              |
//! | `@omit:<Criterion>`| the default answer without that criterion         |
//! | `@empty-steps`     | a test draft with no steps                        |
//! | `@transport-error` | fails the call with a transport error             |
//! | `@auth-error`      | fails the call with an auth error                 |
//!
//! Successive calls for one requirement walk its script; the last entry
//! repeats.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::transport::{ChatRequest, ChatTransport};
use super::{LlmError, Task};
use crate::corpus::Requirement;
use crate::quality_rules::{self, Criterion, RuleConfig, Verdict};
use crate::taxonomy::{self, TaxonomyConfig};
use crate::text;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSpec {
    /// Fraction of verdicts (and FnF labels) flipped relative to the rules.
    #[serde(default)]
    pub flip_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Requirement id → answers for successive calls.
    #[serde(default)]
    pub script: IndexMap<String, Vec<String>>,
    /// Simulated response time.
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub requirement_id: String,
    pub task: Task,
    pub started: Instant,
    pub finished: Instant,
}

type Hook = Arc<dyn Fn(usize) + Send + Sync>;

pub struct MockTransport {
    spec: MockSpec,
    rules: RuleConfig,
    taxonomy: TaxonomyConfig,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    positions: Mutex<HashMap<String, usize>>,
    log: Mutex<Vec<CallRecord>>,
    on_call: Option<Hook>,
}

impl MockTransport {
    pub fn new(spec: MockSpec) -> Self {
        Self {
            spec,
            rules: RuleConfig::default(),
            taxonomy: TaxonomyConfig::default(),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            positions: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
            on_call: None,
        }
    }

    /// Runs `hook` with the 1-based call number after each answer is
    /// produced.
    pub fn with_hook(mut self, hook: impl Fn(usize) + Send + Sync + 'static) -> Self {
        self.on_call = Some(Arc::new(hook));
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap().clone()
    }

    fn next_entry(&self, id: &str) -> Option<String> {
        let script = self.spec.script.get(id).filter(|s| !s.is_empty())?;
        let mut positions = self.positions.lock().unwrap();
        let pos = positions.entry(id.to_string()).or_insert(0);
        let entry = script[(*pos).min(script.len() - 1)].clone();
        *pos += 1;
        Some(entry)
    }

    fn flipped(&self, req: &Requirement, what: &str) -> bool {
        if self.spec.flip_rate <= 0.0 {
            return false;
        }
        let digest = Sha256::digest(format!("{}|{}|{}", self.spec.seed, req.id, what).as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        (u64::from_be_bytes(bytes) as f64 / u64::MAX as f64) < self.spec.flip_rate
    }

    fn fnf_value(&self, req: &Requirement) -> Value {
        let record = taxonomy::classify_rule_based(req, &self.taxonomy);
        let class = record.class;
        if self.flipped(req, "FnF") {
            return match class.subcategory() {
                Some(_) => json!({"label": "Functional", "rationale": "mock: describes a capability"}),
                None => json!({"label": "NonFunctional", "subcategory": "Other", "rationale": "mock: describes a constraint"}),
            };
        }
        let mut v = json!({"label": class.label(), "rationale": format!("mock: {}", record.rationale)});
        if let Some(sub) = class.subcategory() {
            v["subcategory"] = json!(sub);
        }
        v
    }

    fn criteria_answer(&self, req: &Requirement, all_pass: bool, omit: Option<Criterion>) -> String {
        let findings = quality_rules::analyze_requirement(req, &self.rules);
        let verdicts = quality_rules::verdicts_from_findings(&findings);
        let mut per = Map::new();
        for c in Criterion::ALL {
            if Some(c) == omit {
                continue;
            }
            let mut pass = all_pass || verdicts[&c] != Verdict::Fail;
            if !all_pass && self.flipped(req, c.as_str()) {
                pass = !pass;
            }
            let justification = if pass {
                format!("mock: meets {c}")
            } else {
                let msgs: Vec<&str> = findings.iter().filter(|f| f.criterion == c).map(|f| f.message.as_str()).collect();
                if msgs.is_empty() { format!("mock: does not meet {c}") } else { format!("mock: {}", msgs.join("; ")) }
            };
            per.insert(c.to_string(), json!({"verdict": if pass { "Pass" } else { "Fail" }, "justification": justification}));
        }
        json!({"requirement_id": req.id, "per_criterion": per, "fnf": self.fnf_value(req)}).to_string()
    }

    fn fnf_answer(&self, req: &Requirement) -> String {
        let mut v = self.fnf_value(req);
        v["requirement_id"] = json!(req.id);
        v.to_string()
    }

    fn test_draft_answer(&self, req: &Requirement, empty_steps: bool) -> String {
        let pass_criteria = match text::extract_quantity(&req.text) {
            Some(q) => format!("observed value satisfies \"{}\"", q.text),
            None => "observed behaviour matches the requirement statement".to_string(),
        };
        let steps: Vec<String> = if empty_steps {
            Vec::new()
        } else {
            vec![
                "Set up the system in its nominal configuration.".into(),
                format!("Exercise the behaviour stated in {}.", req.id),
                "Record the observed result.".into(),
            ]
        };
        json!({
            "requirement_id": req.id,
            "objective": format!("Verify {}: {}", req.id, req.text),
            "preconditions": ["System installed and powered."],
            "steps": steps,
            "expected_result": req.text,
            "pass_criteria": pass_criteria,
        })
        .to_string()
    }

    fn default_answer(&self, task: Task, req: &Requirement) -> String {
        match task {
            Task::CriteriaAssessment => self.criteria_answer(req, false, None),
            Task::FnfClassification => self.fnf_answer(req),
            Task::TestDraft => self.test_draft_answer(req, false),
        }
    }

    fn answer(&self, task: Task, req: &Requirement) -> Result<String, LlmError> {
        let Some(entry) = self.next_entry(&req.id) else {
            return Ok(self.default_answer(task, req));
        };
        Ok(match entry.as_str() {
            "@echo" => self.default_answer(task, req),
            "@all-pass" if task == Task::CriteriaAssessment => self.criteria_answer(req, true, None),
            "@all-pass" => self.default_answer(task, req),
            "@empty-steps" => self.test_draft_answer(req, true),
            "@transport-error" => return Err(LlmError::Transport("mock: connection reset".into())),
            "@auth-error" => return Err(LlmError::Auth("mock: credentials rejected".into())),
            d if d.starts_with("@omit:") => {
                let criterion = d["@omit:".len()..].parse::<Criterion>().map_err(LlmError::Config)?;
                self.criteria_answer(req, false, Some(criterion))
            }
            _ => entry,
        })
    }
}

impl ChatTransport for MockTransport {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, LlmError> {
        let started = Instant::now();
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if self.spec.latency_ms > 0 {
            thread::sleep(Duration::from_millis(self.spec.latency_ms));
        }
        let result = self.answer(request.task, request.requirement);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        self.log.lock().unwrap().push(CallRecord {
            requirement_id: request.requirement.id.clone(),
            task: request.task,
            started,
            finished: Instant::now(),
        });
        if let Some(hook) = &self.on_call {
            hook(n);
        }
        result
    }
}
