use std::path::PathBuf;

use clap::Args;
use reqlens_core::agreement::{compare_tables, load_ratings, mine_disagreements, Axis, RatingTable};
use reqlens_core::corpus::Format;

use super::corpus;
use crate::manifest::Run;
use crate::{input_err, CliError, EXIT_INPUT, EXIT_OK};

#[derive(Args)]
pub struct CompareArgs {
    /// First rater: export, rating table, quality report, classifications or rater directory
    #[arg(long)]
    pub a: PathBuf,
    /// Second rater
    #[arg(long)]
    pub b: PathBuf,
    /// Further raters (Fleiss' kappa over all)
    #[arg(long = "rater")]
    pub more: Vec<PathBuf>,
    /// Axis to compare: FnF, a criterion name, or "all"; repeatable
    #[arg(long, default_value = "FnF")]
    pub axis: Vec<String>,
    /// Corpus, to attach requirement text to disagreement cases
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Writes agreement_<axis>.json, disagreements.json and manifest.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_axes(raw: &[String]) -> Result<Vec<Axis>, CliError> {
    let mut axes = Vec::new();
    for a in raw {
        if a.eq_ignore_ascii_case("all") {
            axes.extend(Axis::ALL);
        } else {
            axes.push(a.parse::<Axis>().map_err(CliError::Input)?);
        }
    }
    axes.sort();
    axes.dedup();
    Ok(axes)
}

/// The same rater in two inputs (e.g. a file compared with itself) gets a
/// positional suffix: `a`, `a#2`.
fn disambiguate(tables: &mut [RatingTable]) {
    let mut seen: Vec<String> = Vec::new();
    for (pos, table) in tables.iter_mut().enumerate() {
        for rater in table.raters.clone() {
            if seen.contains(&rater) {
                let renamed = format!("{rater}#{}", pos + 1);
                table.rename_rater(&rater, &renamed);
                seen.push(renamed);
            } else {
                seen.push(rater);
            }
        }
    }
}

pub fn compare(args: CompareArgs, run: &mut Run) -> Result<u8, CliError> {
    let axes = parse_axes(&args.axis)?;
    let sources: Vec<PathBuf> = [args.a, args.b].into_iter().chain(args.more).collect();
    for s in &sources {
        run.input(s);
    }
    let set = match &args.corpus {
        Some(p) => Some(corpus(p, Format::Auto, run)?),
        None => None,
    };

    let mut code = EXIT_OK;
    let mut joined_tables = Vec::new();
    let mut first = true;
    for axis in axes {
        let mut tables = sources
            .iter()
            .map(|s| load_ratings(s, axis).map_err(input_err))
            .collect::<Result<Vec<RatingTable>, _>>()?;
        disambiguate(&mut tables);
        let refs: Vec<&RatingTable> = tables.iter().collect();
        let joined = RatingTable::join(&refs).map_err(|e| CliError::Input(format!("{axis}: {e}")))?;
        match compare_tables(&joined) {
            Ok(report) => {
                if !first {
                    println!();
                }
                first = false;
                print!("{}", report.render_text());
                if args.out.is_some() {
                    run.write(&format!("agreement_{axis}.json"), &report.to_json())?;
                }
            }
            Err(e) => {
                eprintln!("{axis}: {e}");
                run.notes.push(format!("{axis}: {e}"));
                code = EXIT_INPUT;
            }
        }
        joined_tables.push(joined);
    }
    if args.out.is_some() {
        let cases = mine_disagreements(&joined_tables, set.as_ref()).map_err(input_err)?;
        let mut json = serde_json::to_string_pretty(&cases).expect("cases serialize");
        json.push('\n');
        run.write("disagreements.json", &json)?;
    }
    Ok(code)
}
