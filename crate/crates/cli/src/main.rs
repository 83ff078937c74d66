//! `reqlens`: lint, classify, assess, compare, refine and generate tests for
//! a requirement corpus, or serve blind annotation sessions.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifest::Run;

#[derive(Parser)]
#[command(name = "reqlens", version, about = "Requirements quality workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lint against the seven quality criteria and classify F/NF with rules
    Analyze(commands::analyze::AnalyzeArgs),
    /// Functional / non-functional classification only
    Classify(commands::analyze::ClassifyArgs),
    /// Assess with one or more LLM profiles (journaled, resumable)
    Assess(commands::assess::AssessArgs),
    /// Agreement statistics between rater outputs
    Compare(commands::compare::CompareArgs),
    /// Generate preliminary test specifications
    GenTests(commands::gen_tests::GenTestsArgs),
    /// Suggest lexicon, keyword and prompt refinements from disagreements
    RefineHints(commands::refine::RefineArgs),
    /// Run the annotation service
    Serve(commands::serve::ServeArgs),
}

#[derive(Args, Clone)]
pub struct OutArg {
    /// Output directory; receives the artifacts and manifest.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs and configs.
    Input(String),
    /// Outputs could not be written.
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        2
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Output(m) => m,
        }
    }
}

pub fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

/// Exit status of a command that ran to completion.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATIONS: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, out) = match &cli.command {
        Command::Analyze(a) => ("analyze", Some(a.out.out.clone())),
        Command::Classify(a) => ("classify", Some(a.out.out.clone())),
        Command::Assess(a) => ("assess", Some(a.out.out.clone())),
        Command::Compare(a) => ("compare", a.out.clone()),
        Command::GenTests(a) => ("gen-tests", Some(a.out.out.clone())),
        Command::RefineHints(a) => ("refine-hints", Some(a.out.out.clone())),
        Command::Serve(_) => ("serve", None),
    };
    let mut run = Run::new(name, out.as_deref());
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze::analyze(a, &mut run),
        Command::Classify(a) => commands::analyze::classify(a, &mut run),
        Command::Assess(a) => commands::assess::assess(a, &mut run),
        Command::Compare(a) => commands::compare::compare(a, &mut run),
        Command::GenTests(a) => commands::gen_tests::gen_tests(a, &mut run),
        Command::RefineHints(a) => commands::refine::refine(a, &mut run),
        Command::Serve(a) => commands::serve::serve(a),
    };
    let code = match result {
        Ok(code) => {
            run.finish(code, None);
            code
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            let code = e.exit_code();
            run.finish(code, Some(e.message().to_string()));
            code
        }
    };
    log::logger().flush();
    ExitCode::from(code)
}
