use std::path::PathBuf;

use clap::{Args, ValueEnum};
use reqlens_core::corpus::Format;
use reqlens_core::llm_bridge::{load_profiles, transport_for};
use reqlens_core::taxonomy::read_json_lines;
use reqlens_core::testgen::{generate_suite, SuiteMode};
use reqlens_core::QualityReport;

use super::corpus;
use crate::manifest::Run;
use crate::{input_err, CliError, OutArg, EXIT_OK};

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Template,
    Llm,
}

#[derive(Args)]
pub struct GenTestsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// quality_report.json from `analyze` or `assess`
    #[arg(long)]
    pub analysis: PathBuf,
    /// classifications.jsonl from `analyze`, `classify` or `assess`
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long, value_enum, default_value = "template")]
    pub mode: Mode,
    /// Profiles for --mode llm
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Which profile drafts the specs (default: the first)
    #[arg(long)]
    pub rater: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn gen_tests(args: GenTestsArgs, run: &mut Run) -> Result<u8, CliError> {
    let set = corpus(&args.input, args.format, run)?;
    run.input(&args.analysis);
    run.input(&args.classes);
    let report = QualityReport::load(&args.analysis).map_err(input_err)?;
    let classes = read_json_lines(&args.classes).map_err(input_err)?;

    let suite = match args.mode {
        Mode::Template => generate_suite(&set, &report, &classes, SuiteMode::TemplateOnly, None),
        Mode::Llm => {
            let path = args.profiles.as_ref().ok_or_else(|| CliError::Input("--mode llm needs --profiles".into()))?;
            run.input(path);
            let profiles = load_profiles(path).map_err(input_err)?;
            let profile = match &args.rater {
                Some(id) => profiles.iter().find(|p| &p.rater_id == id).ok_or_else(|| CliError::Input(format!("no profile {id:?}")))?,
                None => &profiles[0],
            };
            run.config("profile", Some(path), profile);
            let transport = transport_for(profile).map_err(input_err)?;
            generate_suite(&set, &report, &classes, SuiteMode::LlmWithFallback, Some((transport.as_ref(), profile)))
        }
    }
    .map_err(input_err)?;

    run.write("test_suite.json", &suite.to_json())?;
    print!("{}", suite.render_text());
    Ok(EXIT_OK)
}
