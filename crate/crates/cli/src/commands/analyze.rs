use std::path::PathBuf;

use clap::Args;
use reqlens_core::corpus::Format;
use reqlens_core::quality_rules::analyze_corpus;
use reqlens_core::taxonomy::{classify_corpus, to_json_lines};
use reqlens_core::{ClassificationRecord, Criterion, Kind, QualityReport, Severity, Verdict};

use super::{corpus, rules, taxonomy};
use crate::manifest::Run;
use crate::{CliError, OutArg, EXIT_OK, EXIT_VIOLATIONS};

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Corpus file (JSON or CSV)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    /// Lexicon and threshold overrides (JSON)
    #[arg(long)]
    pub rules_config: Option<PathBuf>,
    /// Keyword tables for F/NF classification (JSON)
    #[arg(long)]
    pub taxonomy_config: Option<PathBuf>,
    /// Exit with status 1 when any Violation is found
    #[arg(long)]
    pub fail_on_violation: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    #[arg(long)]
    pub taxonomy_config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn analyze(args: AnalyzeArgs, run: &mut Run) -> Result<u8, CliError> {
    let set = corpus(&args.input, args.format, run)?;
    let rules = rules(args.rules_config.as_deref(), run)?;
    let taxonomy = taxonomy(args.taxonomy_config.as_deref(), run)?;
    let report = analyze_corpus(&set, &rules);
    let classes = classify_corpus(&set, &taxonomy);
    run.write("quality_report.json", &report.to_json())?;
    run.write("classifications.jsonl", &to_json_lines(&classes))?;
    print!("{}", render_analysis(&set.name, &report, &classes));
    if args.fail_on_violation && report.violation_count() > 0 {
        return Ok(EXIT_VIOLATIONS);
    }
    Ok(EXIT_OK)
}

pub fn classify(args: ClassifyArgs, run: &mut Run) -> Result<u8, CliError> {
    let set = corpus(&args.input, args.format, run)?;
    let taxonomy = taxonomy(args.taxonomy_config.as_deref(), run)?;
    let classes = classify_corpus(&set, &taxonomy);
    run.write("classifications.jsonl", &to_json_lines(&classes))?;
    print!("{}", render_classes(&classes));
    Ok(EXIT_OK)
}

fn render_analysis(name: &str, report: &QualityReport, classes: &[ClassificationRecord]) -> String {
    let mut out = format!("Corpus {name}: {} requirements\n\n", report.criterion_verdicts.len());
    out.push_str(&format!("  {:<12} {:>5} {:>5} {:>5}\n", "criterion", "pass", "fail", "n/a"));
    for c in Criterion::ALL {
        let count = |v: Verdict| report.criterion_verdicts.values().filter(|m| m.get(&c) == Some(&v)).count();
        out.push_str(&format!(
            "  {:<12} {:>5} {:>5} {:>5}\n",
            c.as_str(),
            count(Verdict::Pass),
            count(Verdict::Fail),
            count(Verdict::NotAssessable)
        ));
    }
    let warnings = report.per_requirement.values().flatten().filter(|f| f.severity == Severity::Warning).count();
    out.push_str(&format!("\n  violations {}  warnings {}  near-duplicate pairs {}\n", report.violation_count(), warnings, report.near_duplicates.len()));
    for (id, findings) in &report.per_requirement {
        for f in findings.iter().filter(|f| f.severity != Severity::Info) {
            out.push_str(&format!("  {id:<10} {:<12} {:<8} {}\n", f.criterion.as_str(), format!("{:?}", f.severity), f.message));
        }
    }
    out.push('\n');
    out.push_str(&render_classes(classes));
    out
}

fn render_classes(classes: &[ClassificationRecord]) -> String {
    let functional = classes.iter().filter(|c| c.class.label() == Kind::Functional).count();
    let mut out = format!("  functional {functional}  non-functional {}\n", classes.len() - functional);
    let mut subs: Vec<(String, usize)> = Vec::new();
    for c in classes {
        if let Some(sub) = c.class.subcategory() {
            match subs.iter_mut().find(|(s, _)| *s == sub.to_string()) {
                Some((_, n)) => *n += 1,
                None => subs.push((sub.to_string(), 1)),
            }
        }
    }
    for (sub, n) in subs {
        out.push_str(&format!("    {sub:<16} {n}\n"));
    }
    out
}
