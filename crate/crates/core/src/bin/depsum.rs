//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use depsum::harness::{self, ExperimentConfig, ModelSpec};
use depsum::measures::DEFAULT_TRUNCATION_EPS;
use depsum::{ApproximationFamily, Params, Result, Summary};

#[derive(Parser)]
#[command(
    name = "depsum",
    version,
    about = "Poisson-type approximations for sums of 1-dependent summands"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print an approximating measure as CSV (k,mass).
    Approximate {
        /// One of pi, pi2, g, tp, nb, bi.
        family: ApproximationFamily,
        #[arg(long)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma2: f64,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_EPS)]
        truncation_eps: f64,
    },
    /// Print the moment summary of a model as JSON.
    ///
    /// MODEL is `kind:key=value,...`, e.g. `two_runs:n=100,p=0.05`.
    Moments { model: ModelSpec },
    /// Evaluate every bound over the sweep described by a TOML config.
    Bounds {
        config: PathBuf,
        /// Also write per-(family, metric, C0) constant estimates as CSV.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Normalised Wasserstein distance of Poisson binomial laws from Poisson.
    SharpConstant {
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
    },
}

#[derive(Serialize)]
struct MassRow {
    k: i64,
    mass: f64,
}

#[derive(Serialize)]
struct ConstantRow {
    family: ApproximationFamily,
    metric: harness::Metric,
    c0: u32,
    constant: f64,
    rows_used: usize,
    argmax_n: usize,
    argmax_p: f64,
    argmax_lambda: f64,
}

fn open(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Approximate {
            family,
            lambda,
            gamma2,
            truncation_eps,
        } => {
            let params = Params::new(lambda, gamma2).with_truncation_eps(truncation_eps);
            let m = family.build(&params)?;
            let rows: Vec<_> = m.iter().map(|(k, mass)| MassRow { k, mass }).collect();
            harness::write_csv(&rows, io::stdout().lock())
        }
        Command::Moments { model } => {
            let summary = Summary::compute(&model.build()?);
            harness::write_json(&summary, io::stdout().lock())
        }
        Command::Bounds { config, constants } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = harness::evaluate_bounds(&cfg)?;
            harness::write_report(&report, cfg.format, open(cfg.output.as_ref())?)?;
            for s in &report.skipped {
                eprintln!(
                    "skipped {} at {} n={} p={}: {}",
                    s.family,
                    s.model.name(),
                    s.n,
                    s.p,
                    s.reason
                );
            }
            if let Some(path) = constants {
                let rows: Vec<_> = harness::estimate_constants(&report.rows)
                    .into_iter()
                    .map(|e| ConstantRow {
                        family: e.family,
                        metric: e.metric,
                        c0: e.c0,
                        constant: e.value,
                        rows_used: e.rows_used,
                        argmax_n: e.argmax.n,
                        argmax_p: e.argmax.p,
                        argmax_lambda: e.argmax.lambda,
                    })
                    .collect();
                harness::write_csv(&rows, BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
        Command::SharpConstant { p, n_list } => {
            let rows = harness::sharp_constant_experiment(&n_list, p)?;
            harness::write_csv(&rows, io::stdout().lock())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
