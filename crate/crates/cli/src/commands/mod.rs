pub mod analyze;
pub mod assess;
pub mod compare;
pub mod gen_tests;
pub mod refine;
pub mod serve;

use std::path::Path;

use reqlens_core::corpus::{load_corpus, Format};
use reqlens_core::{RequirementSet, RuleConfig, TaxonomyConfig};

use crate::manifest::Run;
use crate::{input_err, CliError};

pub fn corpus(path: &Path, format: Format, run: &mut Run) -> Result<RequirementSet, CliError> {
    run.input(path);
    load_corpus(path, format).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn rules(path: Option<&Path>, run: &mut Run) -> Result<RuleConfig, CliError> {
    let config = match path {
        Some(p) => RuleConfig::load(p).map_err(input_err)?,
        None => RuleConfig::default(),
    };
    run.config("rules", path, &config);
    Ok(config)
}

pub fn taxonomy(path: Option<&Path>, run: &mut Run) -> Result<TaxonomyConfig, CliError> {
    let config = match path {
        Some(p) => TaxonomyConfig::load(p).map_err(input_err)?,
        None => TaxonomyConfig::default(),
    };
    run.config("taxonomy", path, &config);
    Ok(config)
}
