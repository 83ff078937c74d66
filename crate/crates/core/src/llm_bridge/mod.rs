//! Adapters that put one requirement at a time to a hosted model and turn
//! the structured answer into verdicts and classifications.

mod ensemble;
mod mock;
mod payload;
mod prompt;
mod transport;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Requirement;
use crate::ConfigError;

pub use ensemble::{
    assess_corpus_ensemble, read_journal, write_outputs, CancelToken, EnsembleError, EnsembleOptions, FailureKind,
    ItemFailure, JournalOutcome, JournalRecord, RateBudget, Rater, RaterOutcome, LLM_RULE_ID,
};
pub use mock::{CallRecord, MockSpec, MockTransport};
pub use payload::{
    extract_object, parse_criteria, parse_fnf, parse_test_draft, CriterionJudgment, FnfJudgment, LlmVerdictPayload,
    Rejection, TestDraft,
};
pub use prompt::{
    build_prompt, repair_message, schema_text, PromptBundle, PromptConfig, Task, CRITERIA_SCHEMA_ID, FNF_SCHEMA_ID,
    TEST_DRAFT_SCHEMA_ID,
};
pub use transport::{
    anthropic_answer, anthropic_body, openai_answer, openai_body, transport_for, ChatMessage, ChatRequest,
    ChatTransport, Role, ANTHROPIC_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointKind {
    OpenAiCompatibleChat,
    AnthropicCompatibleMessages,
    Mock,
}

fn default_max_output_tokens() -> u32 {
    1024
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmProfile {
    pub rater_id: String,
    pub endpoint_kind: EndpointKind,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Repair requests after an unusable answer.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env_var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockSpec>,
}

impl LlmProfile {
    pub fn mock(rater_id: impl Into<String>, spec: MockSpec) -> Self {
        Self {
            rater_id: rater_id.into(),
            endpoint_kind: EndpointKind::Mock,
            model_name: "mock".into(),
            base_url: String::new(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            api_key_env_var: None,
            mock: Some(spec),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let who = &self.rater_id;
        if !is_safe_rater_id(who) {
            return Err(ConfigError::Invalid(format!("rater_id {who:?} must be non-empty and use only [A-Za-z0-9._-]")));
        }
        if self.temperature != 0.0 {
            return Err(ConfigError::Invalid(format!("{who}: temperature must be 0 for evaluation runs")));
        }
        if self.endpoint_kind != EndpointKind::Mock {
            if self.base_url.trim().is_empty() || self.model_name.trim().is_empty() {
                return Err(ConfigError::Invalid(format!("{who}: remote profiles need base_url and model_name")));
            }
            if self.api_key_env_var.as_deref().is_none_or(|v| v.trim().is_empty()) {
                return Err(ConfigError::Invalid(format!("{who}: remote profiles need api_key_env_var")));
            }
        } else if self.mock.as_ref().is_some_and(|m| !(0.0..=1.0).contains(&m.flip_rate)) {
            return Err(ConfigError::Invalid(format!("{who}: mock flip_rate must lie in [0, 1]")));
        }
        Ok(())
    }
}

/// Rater ids name output directories, so they are restricted to a
/// path-safe alphabet.
pub fn is_safe_rater_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Reads a JSON list of profiles and checks each one plus rater_id
/// uniqueness.
pub fn load_profiles(path: &Path) -> Result<Vec<LlmProfile>, ConfigError> {
    let raw = fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
    let profiles: Vec<LlmProfile> = serde_json::from_str(&raw).map_err(|e| ConfigError::parse(path, e))?;
    validate_profiles(&profiles)?;
    Ok(profiles)
}

pub fn validate_profiles(profiles: &[LlmProfile]) -> Result<(), ConfigError> {
    if profiles.is_empty() {
        return Err(ConfigError::Invalid("no profiles given".into()));
    }
    let mut seen = HashSet::new();
    for p in profiles {
        p.validate()?;
        if !seen.insert(p.rater_id.as_str()) {
            return Err(ConfigError::Invalid(format!("duplicate rater_id {:?}", p.rater_id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication error: {0}")]
    Auth(String),
    #[error("malformed response: {detail}")]
    MalformedResponse { detail: String, raw: String },
    #[error("schema violation: {detail}")]
    SchemaViolation { detail: String, raw: String },
    #[error("configuration error: {0}")]
    Config(String),
}

/// A validated answer and the number of repair requests it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion<T> {
    pub value: T,
    pub retry_count: u32,
    pub raw: String,
}

/// Sends `bundle`, validating the answer with `parse`. An unusable answer is
/// followed by up to `max_retries` repair requests quoting the schema.
pub fn complete<T>(
    transport: &dyn ChatTransport,
    profile: &LlmProfile,
    bundle: &PromptBundle,
    req: &Requirement,
    parse: impl Fn(&str) -> Result<T, Rejection>,
) -> Result<Completion<T>, LlmError> {
    let mut messages = vec![ChatMessage::user(bundle.user_text.clone())];
    let mut retry_count = 0;
    loop {
        let request = ChatRequest { profile, task: bundle.task, requirement: req, system: &bundle.system_text, messages: &messages };
        let raw = transport.complete(&request)?;
        match parse(&raw) {
            Ok(value) => return Ok(Completion { value, retry_count, raw }),
            Err(rejection) if retry_count < profile.max_retries => {
                messages.push(ChatMessage::assistant(raw));
                messages.push(ChatMessage::user(repair_message(bundle, rejection.detail())));
                retry_count += 1;
            }
            Err(Rejection::Malformed(detail)) => return Err(LlmError::MalformedResponse { detail, raw }),
            Err(Rejection::Schema(detail)) => return Err(LlmError::SchemaViolation { detail, raw }),
        }
    }
}

/// Seven-criteria assessment (plus FnF label when the model gives one).
pub fn assess_with_llm(
    transport: &dyn ChatTransport,
    profile: &LlmProfile,
    req: &Requirement,
    prompts: &PromptConfig,
) -> Result<Completion<LlmVerdictPayload>, LlmError> {
    let bundle = build_prompt(Task::CriteriaAssessment, req, prompts);
    complete(transport, profile, &bundle, req, |raw| parse_criteria(raw, &req.id))
}

pub fn classify_with_llm(
    transport: &dyn ChatTransport,
    profile: &LlmProfile,
    req: &Requirement,
) -> Result<Completion<FnfJudgment>, LlmError> {
    let bundle = build_prompt(Task::FnfClassification, req, &PromptConfig::default());
    complete(transport, profile, &bundle, req, |raw| parse_fnf(raw, &req.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Level;
    use crate::quality_rules::{Criterion, Verdict};
    use indexmap::IndexMap;

    fn sr01() -> Requirement {
        Requirement::new("SR-01", Level::System, "The reader shall report each tag read within 2 seconds.")
    }

    fn scripted(entries: &[&str]) -> (LlmProfile, MockTransport) {
        let spec = MockSpec { script: IndexMap::from([("SR-01".to_string(), entries.iter().map(|s| s.to_string()).collect())]), ..MockSpec::default() };
        (LlmProfile::mock("mock-a", spec.clone()), MockTransport::new(spec))
    }

    #[test]
    fn canned_all_pass() {
        let (profile, mock) = scripted(&["@all-pass"]);
        let got = assess_with_llm(&mock, &profile, &sr01(), &PromptConfig::default()).unwrap();
        assert_eq!(got.retry_count, 0);
        assert!(got.value.per_criterion.values().all(|j| j.verdict == Verdict::Pass));
        assert_eq!(got.value.per_criterion.len(), 7);
    }

    #[test]
    fn invalid_json_once_then_valid() {
        let (profile, mock) = scripted(&["{not json", "@echo"]);
        let got = assess_with_llm(&mock, &profile, &sr01(), &PromptConfig::default()).unwrap();
        assert_eq!(got.retry_count, 1);
        assert_eq!(mock.call_count(), 2);
    }

    #[test]
    fn persistent_omission_is_schema_violation() {
        let (profile, mock) = scripted(&["@omit:Verifiable"]);
        let err = assess_with_llm(&mock, &profile, &sr01(), &PromptConfig::default()).unwrap_err();
        assert!(matches!(&err, LlmError::SchemaViolation { detail, .. } if detail == "missing criteria: Verifiable"));
        assert_eq!(mock.call_count() as u32, 1 + profile.max_retries);
    }

    #[test]
    fn persistent_garbage_is_malformed_with_raw_text() {
        let (mut profile, mock) = scripted(&["sorry, I cannot help"]);
        profile.max_retries = 0;
        let err = assess_with_llm(&mock, &profile, &sr01(), &PromptConfig::default()).unwrap_err();
        assert_eq!(err, LlmError::MalformedResponse { detail: "no JSON object found".into(), raw: "sorry, I cannot help".into() });
    }

    #[test]
    fn repair_message_quotes_schema() {
        struct Recorder(std::sync::Mutex<Vec<Vec<ChatMessage>>>);
        impl ChatTransport for Recorder {
            fn complete(&self, request: &ChatRequest<'_>) -> Result<String, LlmError> {
                self.0.lock().unwrap().push(request.messages.to_vec());
                Ok("nope".into())
            }
        }
        let rec = Recorder(Default::default());
        let profile = LlmProfile::mock("m", MockSpec::default());
        let _ = assess_with_llm(&rec, &profile, &sr01(), &PromptConfig::default());
        let calls = rec.0.into_inner().unwrap();
        assert_eq!(calls.len(), 2);
        let repair = &calls[1];
        assert_eq!(repair.len(), 3);
        assert_eq!(repair[1], ChatMessage::assistant("nope"));
        assert!(repair[2].content.contains("\"$id\": \"criteria.v1\""));
    }

    #[test]
    fn transport_errors_are_not_retried() {
        let (profile, mock) = scripted(&["@transport-error", "@echo"]);
        assert!(matches!(assess_with_llm(&mock, &profile, &sr01(), &PromptConfig::default()), Err(LlmError::Transport(_))));
        assert_eq!(mock.call_count(), 1);
    }

    #[test]
    fn default_mock_echoes_rules() {
        let (profile, mock) = scripted(&[]);
        let req = Requirement::new("SR-01", Level::System, "The interface shall be intuitive.");
        let got = assess_with_llm(&mock, &profile, &req, &PromptConfig::default()).unwrap().value;
        assert_eq!(got.per_criterion[&Criterion::Verifiable].verdict, Verdict::Fail);
        assert_eq!(got.per_criterion[&Criterion::Essential].verdict, Verdict::Pass);
        let secure = Requirement::new("SR-01", Level::System, "The reader shall encrypt all stored records.");
        let fnf = classify_with_llm(&mock, &profile, &secure).unwrap().value;
        assert_eq!(fnf.class.to_string(), "NonFunctional/Security");
    }

    #[test]
    fn flips_are_seeded() {
        let req = sr01();
        let run = |seed| {
            let spec = MockSpec { flip_rate: 0.5, seed, ..MockSpec::default() };
            let profile = LlmProfile::mock("m", spec.clone());
            assess_with_llm(&MockTransport::new(spec), &profile, &req, &PromptConfig::default()).unwrap().value
        };
        assert_eq!(run(7), run(7));
        assert!((0..20).any(|s| run(s) != run(7)));
    }

    #[test]
    fn profile_validation() {
        let mut p = LlmProfile::mock("a", MockSpec::default());
        p.validate().unwrap();
        p.temperature = 0.7;
        assert!(p.validate().is_err());
        let a = LlmProfile::mock("a", MockSpec::default());
        assert!(matches!(validate_profiles(&[a.clone(), a]), Err(ConfigError::Invalid(m)) if m.contains("duplicate")));
        let remote: LlmProfile = serde_json::from_str(
            r#"{"rater_id": "gpt", "endpoint_kind": "OpenAiCompatibleChat", "model_name": "m", "base_url": "http://x"}"#,
        )
        .unwrap();
        assert!(remote.validate().is_err());
        assert_eq!(remote.max_retries, 1);
    }

    #[test]
    fn missing_secret_is_auth_error() {
        let profile: LlmProfile = serde_json::from_str(
            r#"{"rater_id": "c", "endpoint_kind": "AnthropicCompatibleMessages", "model_name": "m",
                "base_url": "http://127.0.0.1:9", "api_key_env_var": "REQLENS_TEST_UNSET_KEY_VAR"}"#,
        )
        .unwrap();
        assert!(matches!(transport_for(&profile), Err(LlmError::Auth(m)) if m.contains("REQLENS_TEST_UNSET_KEY_VAR")));
    }
}
