//! Requirements-quality workbench core: corpus model, rule-based quality
//! checks, functional/non-functional classification, LLM adapters,
//! inter-rater agreement statistics and test-spec generation.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod agreement;
pub mod corpus;
pub mod exec;
pub mod llm_bridge;
pub mod quality_rules;
pub mod taxonomy;
pub mod testgen;
pub mod text;

pub use corpus::{Kind, Level, Requirement, RequirementSet};
pub use quality_rules::{Criterion, Finding, QualityReport, RuleConfig, Severity, Verdict};
pub use taxonomy::{ClassificationRecord, NfrCategory, ReqClass, TaxonomyConfig};

/// Failure to read or parse a configuration or intermediate artifact file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ConfigError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, err: impl std::fmt::Display) -> Self {
        ConfigError::Parse { path: path.to_path_buf(), message: err.to_string() }
    }
}
