use std::path::PathBuf;

use clap::Args;
use reqlens_core::corpus::Format;
use reqlens_core::llm_bridge::{
    assess_corpus_ensemble, load_profiles, write_outputs, EnsembleOptions, PromptConfig, RateBudget, Rater,
};

use super::corpus;
use crate::manifest::Run;
use crate::{input_err, CliError, OutArg, EXIT_OK, EXIT_PARTIAL};

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// JSON array of LLM profiles
    #[arg(long)]
    pub profiles: PathBuf,
    /// Criterion definitions used in prompts (JSON)
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Continue from an existing journal in --out
    #[arg(long)]
    pub resume: bool,
    #[arg(long, default_value_t = 4)]
    pub max_concurrent: usize,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn assess(args: AssessArgs, run: &mut Run) -> Result<u8, CliError> {
    let set = corpus(&args.input, args.format, run)?;
    run.input(&args.profiles);
    let profiles = load_profiles(&args.profiles).map_err(input_err)?;
    run.config("profiles", Some(&args.profiles), &profiles);
    let prompts = match &args.prompts {
        Some(p) => PromptConfig::load(p).map_err(input_err)?,
        None => PromptConfig::default(),
    };
    run.config("prompts", args.prompts.as_deref(), &prompts);
    let raters = profiles
        .into_iter()
        .map(|p| {
            let id = p.rater_id.clone();
            Rater::from_profile(p).map_err(|e| CliError::Input(format!("profile {id}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let out = run.out_dir()?.to_path_buf();
    let journal = out.join(JOURNAL_FILE);
    let options = EnsembleOptions { journal: Some(journal.clone()), resume: args.resume, prompts, ..EnsembleOptions::default() };
    let budget = RateBudget { max_concurrent: args.max_concurrent, requests_per_minute: args.requests_per_minute };
    let result = assess_corpus_ensemble(&raters, &set, &budget, &options);
    run.record_outputs([journal]);
    let outcomes = result.map_err(input_err)?;
    let written = write_outputs(&outcomes, &out).map_err(|e| CliError::Output(e.to_string()))?;
    run.record_outputs(written);

    let mut failed = 0;
    println!("Assessed {} requirements with {} rater(s)", set.len(), outcomes.len());
    for (rater, outcome) in &outcomes {
        println!("  {rater:<20} ok {:>4}  failed {:>4}", set.len() - outcome.failures.len(), outcome.failures.len());
        for f in &outcome.failures {
            eprintln!("  {rater} {}: {:?}: {}", f.requirement_id, f.kind, f.detail);
            run.notes.push(format!("{rater} {}: {:?}: {}", f.requirement_id, f.kind, f.detail));
        }
        failed += outcome.failures.len();
    }
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}
