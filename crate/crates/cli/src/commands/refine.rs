use std::fs;
use std::path::PathBuf;

use clap::Args;
use reqlens_core::agreement::{refinement_hints, DisagreementCase, DEFAULT_MIN_SUPPORT};

use super::{rules, taxonomy};
use crate::manifest::Run;
use crate::{CliError, OutArg, EXIT_OK};

#[derive(Args)]
pub struct RefineArgs {
    /// disagreements.json as written by `compare --out`
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long)]
    pub rules_config: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy_config: Option<PathBuf>,
    /// Distinct requirements needed to support a hint
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    pub min_support: usize,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn refine(args: RefineArgs, run: &mut Run) -> Result<u8, CliError> {
    run.input(&args.cases);
    let raw = fs::read_to_string(&args.cases).map_err(|e| CliError::Input(format!("{}: {e}", args.cases.display())))?;
    let cases: Vec<DisagreementCase> =
        serde_json::from_str(&raw).map_err(|e| CliError::Input(format!("{}: {e}", args.cases.display())))?;
    let rules = rules(args.rules_config.as_deref(), run)?;
    let taxonomy = taxonomy(args.taxonomy_config.as_deref(), run)?;
    let hints = refinement_hints(&cases, &rules, &taxonomy, args.min_support);
    let mut json = serde_json::to_string_pretty(&hints).expect("hints serialize");
    json.push('\n');
    run.write("hints.json", &json)?;
    println!("{} disagreement case(s), {} hint(s)", cases.len(), hints.len());
    for h in &hints {
        println!("  {:<20} {:<20} support {}", format!("{:?}", h.kind), h.payload, h.supporting_case_ids.len());
    }
    Ok(EXIT_OK)
}
