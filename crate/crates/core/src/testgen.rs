//! Preliminary test specifications from analysed, classified requirements.
//!
//! Method selection (first matching row wins):
//!
//! | condition                                      | outcome       |
//! |------------------------------------------------|---------------|
//! | Verifiable verdict is Fail                     | Blocked       |
//! | a measurable quantity is present               | Test          |
//! | Functional                                     | Demonstration |
//! | NonFunctional / Reliability or Performance     | Analysis      |
//! | any other NonFunctional                        | Inspection    |

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Kind, Requirement, RequirementSet};
use crate::exec::{self, Exec};
use crate::llm_bridge::{self, ChatTransport, LlmError, LlmProfile, PromptConfig, Rejection, Task};
use crate::quality_rules::{Criterion, Finding, QualityReport, Verdict};
use crate::taxonomy::{ClassificationRecord, NfrCategory};
use crate::text::{self, Quantity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerificationMethod {
    Test,
    Demonstration,
    Analysis,
    Inspection,
}

impl fmt::Display for VerificationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MethodDecision {
    Method(VerificationMethod),
    /// The requirement's Verifiable findings.
    Blocked(Vec<Finding>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecProvenance {
    Template,
    LlmDraft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    pub spec_id: String,
    pub requirement_id: String,
    pub method: VerificationMethod,
    pub objective: String,
    pub preconditions: Vec<String>,
    pub steps: Vec<String>,
    pub expected_result: String,
    pub pass_criteria: String,
    pub provenance: SpecProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedRecord {
    pub requirement_id: String,
    pub reason: String,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TestgenError {
    #[error("requirement {0} is missing from the quality report")]
    MissingAnalysis(String),
    #[error("requirement {0} has no classification record")]
    MissingClassification(String),
    #[error("LLM drafting requested without a profile")]
    NoProfile,
}

/// Picks the verification method, or Blocked when the report judges the
/// requirement unverifiable.
pub fn assign_method(req: &Requirement, report: &QualityReport, class: &ClassificationRecord) -> Result<MethodDecision, TestgenError> {
    let verdict = report.verdict(&req.id, Criterion::Verifiable).ok_or_else(|| TestgenError::MissingAnalysis(req.id.clone()))?;
    if verdict == Verdict::Fail {
        let findings = report.findings(&req.id).iter().filter(|f| f.criterion == Criterion::Verifiable).cloned().collect();
        return Ok(MethodDecision::Blocked(findings));
    }
    if text::extract_quantity(&req.text).is_some() {
        return Ok(MethodDecision::Method(VerificationMethod::Test));
    }
    let method = match (class.class.label(), class.class.subcategory()) {
        (Kind::Functional, _) => VerificationMethod::Demonstration,
        (Kind::NonFunctional, Some(NfrCategory::Reliability | NfrCategory::Performance)) => VerificationMethod::Analysis,
        (Kind::NonFunctional, _) => VerificationMethod::Inspection,
    };
    Ok(MethodDecision::Method(method))
}

/// Rough clause split of a requirement sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub subject: String,
    pub modal: String,
    pub behaviour: String,
    pub condition: Option<String>,
}

const CONDITION_WORDS: &str = "when|whenever|if|upon|once|after|while";

fn leading_condition() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"(?is)^(?:{CONDITION_WORDS})\s+([^,]+),\s*(.*)$")).unwrap())
}

fn trailing_condition() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"(?is)^(.*?)\s*,?\s+(?:{CONDITION_WORDS})\s+(.+)$")).unwrap())
}

fn modal_word() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(shall|must|will|should)\b").unwrap())
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn upper_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn parse_statement(text: &str) -> Statement {
    let body = text.trim().trim_end_matches(['.', ';', '!']).trim();
    let (mut condition, rest) = match leading_condition().captures(body) {
        Some(c) => (Some(c[1].trim().to_string()), c[2].to_string()),
        None => (None, body.to_string()),
    };
    let (subject, modal, mut behaviour) = match modal_word().find(&rest) {
        Some(m) => (rest[..m.start()].trim().to_string(), m.as_str().to_lowercase(), rest[m.end()..].trim().to_string()),
        None => (String::new(), "shall".to_string(), rest.trim().to_string()),
    };
    if condition.is_none() {
        if let Some(c) = trailing_condition().captures(&behaviour) {
            if !c[1].trim().is_empty() {
                condition = Some(c[2].trim().to_string());
                behaviour = c[1].trim().trim_end_matches(',').to_string();
            }
        }
    }
    let subject = if subject.is_empty() { "the system".to_string() } else { lower_first(&subject) };
    Statement { subject, modal, behaviour, condition }
}

fn pass_threshold(q: &Quantity) -> String {
    let symbol = q.comparator.map_or("=", |c| c.symbol());
    format!("measured value {symbol} {}", q.text)
}

/// Deterministic per-method template. Whenever the requirement carries a
/// measurable quantity, its text appears verbatim in `pass_criteria`.
pub fn generate_spec_template(req: &Requirement, method: VerificationMethod, _class: &ClassificationRecord) -> TestSpec {
    let st = parse_statement(&req.text);
    let quantity = text::extract_quantity(&req.text);
    let subject = &st.subject;
    let behaviour = &st.behaviour;
    let when = st.condition.as_deref().map(|c| format!(" when {c}")).unwrap_or_default();
    let nominal = format!("{} is installed and in its nominal operating configuration.", upper_first(subject));

    let (preconditions, steps, expected, pass) = match method {
        VerificationMethod::Test => {
            let mut steps = vec![format!("Place {subject} in its nominal operating configuration.")];
            if let Some(c) = &st.condition {
                steps.push(format!("Establish the stated condition: {c}."));
            }
            steps.push(format!("Exercise the behaviour under test: {behaviour}."));
            steps.push("Measure and record the value the requirement constrains.".into());
            steps.push("Repeat the measurement for at least three trials.".into());
            let pass = match &quantity {
                Some(q) => pass_threshold(q),
                None => format!("{} {behaviour} in every trial", upper_first(subject)),
            };
            (
                vec![nominal, "Measurement instruments are calibrated.".to_string()],
                steps,
                format!("{} {} {behaviour}{when}.", upper_first(subject), st.modal),
                pass,
            )
        }
        VerificationMethod::Demonstration => {
            let trigger = match &st.condition {
                Some(c) => format!("Trigger the stated condition: {c}."),
                None => "Initiate the operation under test.".to_string(),
            };
            (
                vec![nominal],
                vec![
                    format!("Place {subject} in its nominal operating configuration."),
                    trigger,
                    format!("Observe whether the stated behaviour occurs: {behaviour}."),
                    "Record the observed behaviour.".into(),
                ],
                format!("{} {} {behaviour}{when}.", upper_first(subject), st.modal),
                format!("{} is observed to {behaviour}{when}", upper_first(subject)),
            )
        }
        VerificationMethod::Analysis => (
            vec!["Design data, models and any available field data are collected.".to_string()],
            vec![
                format!("Identify the design elements of {subject} that determine: {behaviour}."),
                format!("Analyse whether {subject} will {behaviour}{when} under the stated operating conditions."),
                "Document the assumptions, method and result of the analysis.".into(),
            ],
            format!("The analysis concludes that {subject} will {behaviour}{when}."),
            format!("Analysis shows that {subject} will {behaviour}{when}"),
        ),
        VerificationMethod::Inspection => (
            vec!["Design documentation and the as-built configuration are available.".to_string()],
            vec![
                format!("Obtain the design documentation and configuration of {subject}."),
                format!("Inspect them for evidence that {subject} will {behaviour}{when}."),
                "Record the inspected items and the findings.".into(),
            ],
            format!("Inspection finds that {subject} will {behaviour}{when}."),
            format!("Inspection confirms that {subject} will {behaviour}{when}"),
        ),
    };
    let pass_criteria = match (&quantity, method) {
        (Some(q), m) if m != VerificationMethod::Test => format!("{pass} (threshold: {})", q.text),
        _ => pass,
    };
    TestSpec {
        spec_id: format!("TS-{}", req.id),
        requirement_id: req.id.clone(),
        method,
        objective: format!("Verify by {} that {subject} {} {behaviour}{when}.", method.to_string().to_lowercase(), st.modal),
        preconditions,
        steps,
        expected_result: expected,
        pass_criteria,
        provenance: SpecProvenance::Template,
    }
}

/// Asks a model for a draft. The draft must have steps and, when the
/// requirement has a measurable quantity, quote it in the pass criteria.
/// Any failure falls back to the template; the error is returned alongside.
pub fn generate_spec_llm(
    transport: &dyn ChatTransport,
    profile: &LlmProfile,
    req: &Requirement,
    method: VerificationMethod,
    class: &ClassificationRecord,
) -> (TestSpec, Option<LlmError>) {
    let mut bundle = llm_bridge::build_prompt(Task::TestDraft, req, &PromptConfig::default());
    let _ = write!(bundle.user_text, "Verification method: {method}\nClassification: {}\n", class.class);
    let quantity = text::extract_quantity(&req.text);
    let parse = |raw: &str| {
        let draft = llm_bridge::parse_test_draft(raw, &req.id)?;
        if let Some(q) = &quantity {
            if !draft.pass_criteria.contains(&q.text) {
                return Err(Rejection::Schema(format!("pass_criteria must quote the threshold \"{}\"", q.text)));
            }
        }
        Ok(draft)
    };
    match llm_bridge::complete(transport, profile, &bundle, req, parse) {
        Ok(done) => {
            let d = done.value;
            let spec = TestSpec {
                spec_id: format!("TS-{}", req.id),
                requirement_id: req.id.clone(),
                method,
                objective: d.objective,
                preconditions: d.preconditions,
                steps: d.steps,
                expected_result: d.expected_result,
                pass_criteria: d.pass_criteria,
                provenance: SpecProvenance::LlmDraft,
            };
            (spec, None)
        }
        Err(e) => (generate_spec_template(req, method, class), Some(e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuiteMode {
    TemplateOnly,
    LlmWithFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestSuite {
    pub specs: Vec<TestSpec>,
    pub blocked: Vec<BlockedRecord>,
    /// Drafting failures that fell back to the template.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

enum Planned<'a> {
    Spec(&'a Requirement, VerificationMethod, &'a ClassificationRecord),
    Blocked(BlockedRecord),
}

fn blocked_reason(findings: &[Finding]) -> String {
    let msgs: Vec<&str> = findings.iter().map(|f| f.message.as_str()).collect();
    format!("not verifiable: {}", msgs.join("; "))
}

pub fn generate_suite(
    set: &RequirementSet,
    report: &QualityReport,
    classes: &[ClassificationRecord],
    mode: SuiteMode,
    llm: Option<(&dyn ChatTransport, &LlmProfile)>,
) -> Result<TestSuite, TestgenError> {
    generate_suite_with(set, report, classes, mode, llm, Exec::default())
}

/// One spec or one Blocked record per requirement, in corpus order.
pub fn generate_suite_with(
    set: &RequirementSet,
    report: &QualityReport,
    classes: &[ClassificationRecord],
    mode: SuiteMode,
    llm: Option<(&dyn ChatTransport, &LlmProfile)>,
    exec: Exec,
) -> Result<TestSuite, TestgenError> {
    if mode == SuiteMode::LlmWithFallback && llm.is_none() {
        return Err(TestgenError::NoProfile);
    }
    let mut by_id: HashMap<&str, &ClassificationRecord> = HashMap::new();
    for c in classes {
        by_id.entry(c.requirement_id.as_str()).or_insert(c);
    }
    let mut plan = Vec::with_capacity(set.len());
    for req in set.iter() {
        let class = *by_id.get(req.id.as_str()).ok_or_else(|| TestgenError::MissingClassification(req.id.clone()))?;
        plan.push(match assign_method(req, report, class)? {
            MethodDecision::Method(m) => Planned::Spec(req, m, class),
            MethodDecision::Blocked(findings) => {
                Planned::Blocked(BlockedRecord { requirement_id: req.id.clone(), reason: blocked_reason(&findings), findings })
            }
        });
    }

    let mut suite = TestSuite::default();
    match (mode, llm) {
        (SuiteMode::LlmWithFallback, Some((transport, profile))) => {
            for item in plan {
                match item {
                    Planned::Spec(req, m, class) => {
                        let (spec, err) = generate_spec_llm(transport, profile, req, m, class);
                        if let Some(e) = err {
                            suite.notes.push(format!("{}: template used after drafting failed: {e}", req.id));
                        }
                        suite.specs.push(spec);
                    }
                    Planned::Blocked(b) => suite.blocked.push(b),
                }
            }
        }
        _ => {
            let specs = exec::map_ordered(exec, &plan, |item| match item {
                Planned::Spec(req, m, class) => Some(generate_spec_template(req, *m, class)),
                Planned::Blocked(_) => None,
            });
            for (item, spec) in plan.into_iter().zip(specs) {
                match (item, spec) {
                    (_, Some(spec)) => suite.specs.push(spec),
                    (Planned::Blocked(b), None) => suite.blocked.push(b),
                    (Planned::Spec(..), None) => unreachable!("template generation is total"),
                }
            }
        }
    }
    Ok(suite)
}

impl TestSuite {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suites serialize");
        s.push('\n');
        s
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for spec in &self.specs {
            let _ = writeln!(out, "{}  [{}]  {}", spec.spec_id, spec.method, spec.requirement_id);
            let _ = writeln!(out, "  Objective: {}", spec.objective);
            if !spec.preconditions.is_empty() {
                out.push_str("  Preconditions:\n");
                for p in &spec.preconditions {
                    let _ = writeln!(out, "    - {p}");
                }
            }
            out.push_str("  Steps:\n");
            for (i, step) in spec.steps.iter().enumerate() {
                let _ = writeln!(out, "    {}. {step}", i + 1);
            }
            let _ = writeln!(out, "  Expected result: {}", spec.expected_result);
            let _ = writeln!(out, "  Pass criteria: {}", spec.pass_criteria);
            out.push('\n');
        }
        let _ = writeln!(out, "Blocked ({})", self.blocked.len());
        for b in &self.blocked {
            let _ = writeln!(out, "  {}: {}", b.requirement_id, b.reason);
        }
        out
    }
}
