//! Parsing and validation of model answers.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::Kind;
use crate::quality_rules::{Criterion, Verdict};
use crate::taxonomy::{NfrCategory, ReqClass};

/// Why an answer was rejected. Both kinds trigger a repair request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    /// No JSON object could be read from the answer.
    Malformed(String),
    /// A JSON object was read but does not satisfy the schema.
    Schema(String),
}

impl Rejection {
    pub fn detail(&self) -> &str {
        match self {
            Rejection::Malformed(d) | Rejection::Schema(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionJudgment {
    pub verdict: Verdict,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnfJudgment {
    pub class: ReqClass,
    pub rationale: String,
}

/// A validated criteria assessment: all seven criteria, Pass or Fail each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmVerdictPayload {
    pub requirement_id: String,
    pub per_criterion: IndexMap<Criterion, CriterionJudgment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fnf: Option<FnfJudgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDraft {
    pub objective: String,
    pub preconditions: Vec<String>,
    pub steps: Vec<String>,
    pub expected_result: String,
    pub pass_criteria: String,
}

/// The JSON object in a model answer. Accepts a bare object, a fenced code
/// block, or an object embedded in surrounding prose.
pub fn extract_object(raw: &str) -> Result<Map<String, Value>, Rejection> {
    let trimmed = raw.trim();
    let candidate = match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(start), Some(end)) if start < end => &trimmed[start..=end],
        _ => return Err(Rejection::Malformed("no JSON object found".into())),
    };
    match serde_json::from_str::<Value>(candidate) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Rejection::Malformed("answer is not a JSON object".into())),
        Err(e) => Err(Rejection::Malformed(format!("invalid JSON: {e}"))),
    }
}

fn schema(msg: impl Into<String>) -> Rejection {
    Rejection::Schema(msg.into())
}

fn string_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, Rejection> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(schema(format!("field {key:?} must be a string"))),
        None => Err(schema(format!("missing field {key:?}"))),
    }
}

fn check_id(obj: &Map<String, Value>, expected: &str) -> Result<(), Rejection> {
    let id = string_field(obj, "requirement_id")?;
    if id.trim() != expected {
        return Err(schema(format!("requirement_id {id:?} does not match {expected:?}")));
    }
    Ok(())
}

fn parse_class(obj: &Map<String, Value>) -> Result<ReqClass, Rejection> {
    let label: Kind = string_field(obj, "label")?.parse().map_err(schema)?;
    let subcategory = match obj.get("subcategory") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<NfrCategory>().map_err(schema)?),
        Some(_) => return Err(schema("field \"subcategory\" must be a string")),
    };
    ReqClass::new(label, subcategory).map_err(|e| schema(e.to_string()))
}

fn parse_fnf_object(obj: &Map<String, Value>) -> Result<FnfJudgment, Rejection> {
    let class = parse_class(obj)?;
    let rationale = match obj.get("rationale") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.trim().to_string(),
        Some(_) => return Err(schema("field \"rationale\" must be a string")),
    };
    Ok(FnfJudgment { class, rationale })
}

/// Validates a `criteria.v1` answer for requirement `expected_id`.
pub fn parse_criteria(raw: &str, expected_id: &str) -> Result<LlmVerdictPayload, Rejection> {
    let obj = extract_object(raw)?;
    check_id(&obj, expected_id)?;
    let Some(Value::Object(per)) = obj.get("per_criterion") else {
        return Err(schema("missing object \"per_criterion\""));
    };
    let mut found: IndexMap<Criterion, CriterionJudgment> = IndexMap::new();
    for (key, value) in per {
        let criterion: Criterion = key.parse().map_err(schema)?;
        let Value::Object(entry) = value else {
            return Err(schema(format!("{criterion}: expected an object")));
        };
        let verdict = match string_field(entry, "verdict")?.trim() {
            v if v.eq_ignore_ascii_case("pass") => Verdict::Pass,
            v if v.eq_ignore_ascii_case("fail") => Verdict::Fail,
            other => return Err(schema(format!("{criterion}: verdict must be Pass or Fail, got {other:?}"))),
        };
        let justification = match entry.get("justification") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.trim().to_string(),
            Some(_) => return Err(schema(format!("{criterion}: justification must be a string"))),
        };
        if verdict == Verdict::Fail && justification.is_empty() {
            return Err(schema(format!("{criterion}: a Fail verdict needs a justification")));
        }
        if found.insert(criterion, CriterionJudgment { verdict, justification }).is_some() {
            return Err(schema(format!("{criterion} given twice")));
        }
    }
    let missing: Vec<&str> = Criterion::ALL.iter().filter(|c| !found.contains_key(*c)).map(|c| c.as_str()).collect();
    if !missing.is_empty() {
        return Err(schema(format!("missing criteria: {}", missing.join(", "))));
    }
    found.sort_keys();
    let fnf = match obj.get("fnf") {
        None | Some(Value::Null) => None,
        Some(Value::Object(f)) => Some(parse_fnf_object(f)?),
        Some(_) => return Err(schema("field \"fnf\" must be an object")),
    };
    Ok(LlmVerdictPayload { requirement_id: expected_id.to_string(), per_criterion: found, fnf })
}

/// Validates an `fnf.v1` answer.
pub fn parse_fnf(raw: &str, expected_id: &str) -> Result<FnfJudgment, Rejection> {
    let obj = extract_object(raw)?;
    check_id(&obj, expected_id)?;
    parse_fnf_object(&obj)
}

fn string_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>, Rejection> {
    let Some(Value::Array(items)) = obj.get(key) else {
        return Err(schema(format!("missing array {key:?}")));
    };
    items
        .iter()
        .map(|v| match v {
            Value::String(s) if !s.trim().is_empty() => Ok(s.trim().to_string()),
            _ => Err(schema(format!("{key:?} must contain non-empty strings"))),
        })
        .collect()
}

fn non_empty(obj: &Map<String, Value>, key: &str) -> Result<String, Rejection> {
    let s = string_field(obj, key)?.trim();
    if s.is_empty() {
        return Err(schema(format!("field {key:?} is empty")));
    }
    Ok(s.to_string())
}

/// Validates a `testdraft.v1` answer.
pub fn parse_test_draft(raw: &str, expected_id: &str) -> Result<TestDraft, Rejection> {
    let obj = extract_object(raw)?;
    check_id(&obj, expected_id)?;
    let steps = string_list(&obj, "steps")?;
    if steps.is_empty() {
        return Err(schema("\"steps\" is empty"));
    }
    Ok(TestDraft {
        objective: non_empty(&obj, "objective")?,
        preconditions: string_list(&obj, "preconditions")?,
        steps,
        expected_result: non_empty(&obj, "expected_result")?,
        pass_criteria: non_empty(&obj, "pass_criteria")?,
    })
}
