use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tanlars::data::{load_dataset, write_dataset};
use tanlars::export::path_export;
use tanlars::harness::{generate_trial, run_case, CaseConfig, CaseReport};
use tanlars::l1::{l1_glm_path, L1Options, LambdaGrid};
use tanlars::mle::{fit_mle, MleOptions};
use tanlars::selection::{active_set, Selector};
use tanlars::tangent::{tlars_from_mle, tlasso1_from_mle, tlasso2};
use tanlars::{CriterionKind, FamilyKind, GlmFamily, Method};

#[derive(Parser)]
#[command(
    name = "tanlars",
    version,
    about = "Tangent-space LARS/LASSO for generalized linear models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a solution path to a CSV dataset and optionally select one estimate.
    Fit(FitArgs),
    /// Run a Monte Carlo case and write the JSON report.
    Simulate(SimulateArgs),
    /// Print a saved report.
    Report(ReportArgs),
    /// Write one synthetic trial dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Response column name.
    #[arg(long)]
    response: String,
    #[arg(long, value_parser = parse_family)]
    family: FamilyKind,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, value_parser = parse_criterion)]
    criterion: Option<CriterionKind>,
    /// Write the path as CSV (with a .meta.json sidecar).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    /// Ridge used only if the MLE diverges.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value_t = 100)]
    nlambda: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda_ratio: f64,
    /// Fit an unpenalized intercept.
    #[arg(long)]
    intercept: bool,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// A1, A2, B1, B2, C1, C2 or custom (requires --config).
    #[arg(long)]
    case: String,
    /// JSON case configuration; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores). Does not affect the report.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, default_value = "A1")]
    case: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse().map_err(|e: tanlars::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: tanlars::Error| e.to_string())
}

fn parse_criterion(s: &str) -> Result<CriterionKind, String> {
    s.parse().map_err(|e: tanlars::Error| e.to_string())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(args) => fit(args),
        Command::Simulate(args) => simulate(args),
        Command::Report(args) => report(args),
        Command::Generate(args) => generate(args),
    }
}

fn fit(args: FitArgs) -> Result<()> {
    let family = GlmFamily::from(args.family);
    let (x, y) = load_dataset(&args.data, args.response.as_str(), family.domain())
        .with_context(|| format!("loading {}", args.data.display()))?;
    let mle_opts = MleOptions {
        max_iter: args.max_iter,
        grad_tol: args.grad_tol,
        ridge: args.ridge,
        intercept: args.intercept,
    };
    let names = x.labels();
    println!(
        "n = {}, d = {}, family = {}, method = {}",
        x.n(),
        x.d(),
        family,
        args.method
    );

    let estimates: Vec<Vec<f64>> = match args.method {
        Method::Tlars | Method::Tlasso1 => {
            let mle = fit_mle(&x, &y, family, &mle_opts)?;
            if mle.separation_flag {
                println!(
                    "warning: the MLE diverges; using the ridge-stabilized fit (ridge {})",
                    mle.ridge_used
                );
            }
            let path = if args.method == Method::Tlars {
                tlars_from_mle(&x, &mle)?
            } else {
                tlasso1_from_mle(&x, &mle)?
            };
            if let Some(out) = &args.out {
                path_export(
                    &path,
                    Some(args.method),
                    Some(args.family),
                    Some(&names),
                    out,
                )?;
            }
            path.estimates().map(<[f64]>::to_vec).collect()
        }
        Method::Tlasso2 => {
            let path = tlasso2(&x, &y, family)?;
            if let Some(out) = &args.out {
                path_export(
                    &path,
                    Some(args.method),
                    Some(args.family),
                    Some(&names),
                    out,
                )?;
            }
            path.estimates().map(<[f64]>::to_vec).collect()
        }
        Method::L1 => {
            let opts = L1Options {
                nlambda: args.nlambda,
                lambda_ratio: args.lambda_ratio,
                intercept: args.intercept,
                ..L1Options::default()
            };
            let grid = LambdaGrid::for_data(&x, &y, family, &opts)?;
            let path = l1_glm_path(&x, &y, family, &grid, &opts)?;
            let bad = path.not_converged();
            if !bad.is_empty() {
                println!("warning: {} grid points did not converge", bad.len());
            }
            if let Some(out) = &args.out {
                path_export(
                    &path,
                    Some(args.method),
                    Some(args.family),
                    Some(&names),
                    out,
                )?;
            }
            path.coefficients
        }
    };

    println!("path length {}", estimates.len());
    for (k, theta) in estimates.iter().enumerate() {
        let support: Vec<&str> = active_set(theta)
            .iter()
            .map(|&j| names[j].as_str())
            .collect();
        println!("  {k:>3}  [{}]", support.join(", "));
    }

    if let Some(criterion) = args.criterion {
        let mut selector = Selector::new(&x, &y, family, mle_opts);
        let sel = selector.select(estimates.as_slice(), criterion)?;
        for (k, msg) in &sel.skipped {
            println!("skipped candidate {k}: {msg}");
        }
        println!("{criterion} selects step {}", sel.chosen_index);
        let (slopes, _) = x.to_original_scale(&sel.theta_selected);
        println!("{:<16} {:>14} {:>14}", "column", "normalized", "original");
        for (j, name) in names.iter().enumerate() {
            println!(
                "{:<16} {:>14.6} {:>14.6}",
                name, sel.theta_selected[j], slopes[j]
            );
        }
        if let Some(refit) = &sel.theta_refit {
            println!("refit on support: {refit:?}");
        }
    }
    if let Some(out) = &args.out {
        println!("path written to {}", out.display());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<CaseConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None if args.case.eq_ignore_ascii_case("custom") => bail!("--case custom needs --config"),
        None => CaseConfig::preset(&args.case, 300, 0)?,
    };
    if let Some(m) = args.trials {
        config.m_trials = m;
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    let report = run_case(&config, args.workers)?;
    fs::write(&args.out, report.to_json()?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", report.to_table());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let report = CaseReport::from_json(&text)?;
    match args.format {
        Format::Table => print!("{}", report.to_table()),
        Format::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let config = CaseConfig::preset(&args.case, args.trial + 1, args.seed)?;
    let data = generate_trial(&config, args.trial)?;
    write_dataset(&args.out, &data.x, &data.y, "y")?;
    println!(
        "wrote {} rows, {} predictors to {}",
        data.x.n(),
        data.x.d(),
        args.out.display()
    );
    Ok(())
}
