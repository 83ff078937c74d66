use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Requirement;
use crate::quality_rules::Criterion;
use crate::taxonomy::NfrCategory;
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    CriteriaAssessment,
    FnfClassification,
    TestDraft,
}

impl Task {
    pub fn schema_id(self) -> &'static str {
        match self {
            Task::CriteriaAssessment => CRITERIA_SCHEMA_ID,
            Task::FnfClassification => FNF_SCHEMA_ID,
            Task::TestDraft => TEST_DRAFT_SCHEMA_ID,
        }
    }
}

pub const CRITERIA_SCHEMA_ID: &str = "criteria.v1";
pub const FNF_SCHEMA_ID: &str = "fnf.v1";
pub const TEST_DRAFT_SCHEMA_ID: &str = "testdraft.v1";

const VERDICT_SCHEMA: &str = r#"{"type": "object", "required": ["verdict", "justification"], "properties": {"verdict": {"enum": ["Pass", "Fail"]}, "justification": {"type": "string"}}}"#;

const CRITERIA_SCHEMA: &str = r#"{
  "$id": "criteria.v1",
  "type": "object",
  "required": ["requirement_id", "per_criterion", "fnf"],
  "properties": {
    "requirement_id": {"type": "string"},
    "per_criterion": {
      "type": "object",
      "required": ["Essential", "Independent", "Unambiguous", "Complete", "Singular", "Feasible", "Verifiable"],
      "additionalProperties": VERDICT
    },
    "fnf": {
      "type": "object",
      "required": ["label", "rationale"],
      "properties": {
        "label": {"enum": ["Functional", "NonFunctional"]},
        "subcategory": {"enum": SUBCATEGORIES},
        "rationale": {"type": "string"}
      }
    }
  }
}"#;

const FNF_SCHEMA: &str = r#"{
  "$id": "fnf.v1",
  "type": "object",
  "required": ["requirement_id", "label", "rationale"],
  "properties": {
    "requirement_id": {"type": "string"},
    "label": {"enum": ["Functional", "NonFunctional"]},
    "subcategory": {"enum": SUBCATEGORIES},
    "rationale": {"type": "string"}
  }
}"#;

const TEST_DRAFT_SCHEMA: &str = r#"{
  "$id": "testdraft.v1",
  "type": "object",
  "required": ["requirement_id", "objective", "preconditions", "steps", "expected_result", "pass_criteria"],
  "properties": {
    "requirement_id": {"type": "string"},
    "objective": {"type": "string", "minLength": 1},
    "preconditions": {"type": "array", "items": {"type": "string"}},
    "steps": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1},
    "expected_result": {"type": "string", "minLength": 1},
    "pass_criteria": {"type": "string", "minLength": 1}
  }
}"#;

/// The JSON schema document for a response schema id, as quoted to models.
pub fn schema_text(schema_id: &str) -> Option<String> {
    let subcategories = format!(
        "[{}]",
        NfrCategory::ALL.iter().map(|c| format!("\"{c}\"")).collect::<Vec<_>>().join(", ")
    );
    let text = match schema_id {
        CRITERIA_SCHEMA_ID => CRITERIA_SCHEMA.replace("VERDICT", VERDICT_SCHEMA),
        FNF_SCHEMA_ID => FNF_SCHEMA.to_string(),
        TEST_DRAFT_SCHEMA_ID => TEST_DRAFT_SCHEMA.to_string(),
        _ => return None,
    };
    Some(text.replace("SUBCATEGORIES", &subcategories))
}

/// Criterion definitions embedded in assessment prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    pub criteria_definitions: IndexMap<Criterion, String>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self { criteria_definitions: Criterion::ALL.into_iter().map(|c| (c, c.definition().to_string())).collect() }
    }
}

impl PromptConfig {
    /// Loads definitions from JSON; all seven criteria must be defined.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let mut config: PromptConfig = serde_json::from_str(&raw).map_err(|e| ConfigError::parse(path, e))?;
        let missing: Vec<&str> = Criterion::ALL
            .iter()
            .filter(|c| config.criteria_definitions.get(*c).is_none_or(|d| d.trim().is_empty()))
            .map(|c| c.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Invalid(format!("missing criterion definitions: {}", missing.join(", "))));
        }
        config.criteria_definitions.sort_by(|a, _, b, _| a.cmp(b));
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task: Task,
    pub system_text: String,
    pub user_text: String,
    pub response_schema_id: String,
}

fn taxonomy_line() -> String {
    NfrCategory::ALL.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
}

fn answer_instruction(schema_id: &str) -> String {
    format!(
        "Answer with a single JSON object and nothing else. It must match schema {schema_id}:\n{}\n",
        schema_text(schema_id).expect("known schema")
    )
}

pub fn build_prompt(task: Task, req: &Requirement, config: &PromptConfig) -> PromptBundle {
    let mut system = String::new();
    match task {
        Task::CriteriaAssessment => {
            system.push_str(
                "You review system requirements against seven criteria of a good requirement.\n\
                 Judge the requirement on every criterion with Pass or Fail and give a one-sentence justification \
                 for each verdict; a Fail justification must name the defect.\n\nCriteria:\n",
            );
            for (criterion, definition) in &config.criteria_definitions {
                let _ = writeln!(system, "- {criterion}: {definition}");
            }
            let _ = write!(
                system,
                "\nAlso classify the requirement as Functional (a behaviour or capability) or NonFunctional \
                 (a quality attribute or constraint). A NonFunctional requirement takes exactly one subcategory \
                 from: {}.\n\n",
                taxonomy_line()
            );
        }
        Task::FnfClassification => {
            let _ = write!(
                system,
                "You classify system requirements as Functional (a behaviour or capability the system performs) \
                 or NonFunctional (a quality attribute or constraint).\nA NonFunctional requirement takes exactly \
                 one subcategory from: {}.\nGive a one-sentence rationale.\n\n",
                taxonomy_line()
            );
        }
        Task::TestDraft => {
            system.push_str(
                "You draft preliminary verification procedures for system requirements.\n\
                 Write concrete, ordered steps. When the requirement states a measurable threshold, the pass \
                 criteria must quote it exactly as written in the requirement.\n\n",
            );
        }
    }
    system.push_str(&answer_instruction(task.schema_id()));
    PromptBundle {
        task,
        system_text: system,
        user_text: format!("Requirement {}:\n{}\n", req.id, req.text),
        response_schema_id: task.schema_id().to_string(),
    }
}

/// Follow-up message sent after an unusable answer.
pub fn repair_message(bundle: &PromptBundle, problem: &str) -> String {
    format!(
        "Your previous answer could not be used: {problem}\nReply again with only a JSON object matching schema {}:\n{}\n",
        bundle.response_schema_id,
        schema_text(&bundle.response_schema_id).unwrap_or_default()
    )
}
