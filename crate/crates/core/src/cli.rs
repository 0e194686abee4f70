use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimators::{constrained_estimate, FixedPointConfig, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::harness::{run_experiment, write_report, ExperimentConfig, GroupFamily};
use crate::objectives::RhoObjective;
use crate::samples::{matrix_to_csv, SampleSet};
use crate::symmetry::SymmetryGroup;
use crate::verify::{run_suite, Suite};

#[derive(Parser, Debug)]
#[command(
    name = "symcov",
    version,
    about = "Group-symmetric robust scatter estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo comparison and write `<out>.records.csv` / `<out>.summary.csv`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate one scatter matrix from a sample CSV.
    Estimate {
        #[arg(long)]
        samples: PathBuf,
        /// circulant, persymmetric, proper-complex, proper-quaternion, none or file:PATH
        #[arg(long, default_value = "none")]
        group: String,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// MGGD shape parameter in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the numerical verification suites.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ObjectiveArg {
    Tyler,
    Mggd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SuiteArg {
    Geodesic,
    Group,
    Convexity,
    Generators,
    All,
}

fn load_group(spec: &str, dim: usize) -> Result<SymmetryGroup> {
    let group = match spec.strip_prefix("file:") {
        Some(path) => SymmetryGroup::load(path)?,
        None => GroupFamily::parse(spec)?.build(dim)?,
    };
    if group.dim() != dim {
        return Err(Error::dim(dim, group.dim()));
    }
    Ok(group)
}

fn estimate(
    samples: &PathBuf,
    group: &str,
    objective: ObjectiveArg,
    beta: f64,
    tol: f64,
    max_iter: usize,
    out: &PathBuf,
) -> Result<()> {
    let (samples, _) = SampleSet::read_csv(samples)?;
    let dim = samples.dim();
    let group = load_group(group, dim)?;
    let obj = match objective {
        ObjectiveArg::Tyler => RhoObjective::tyler(dim)?,
        ObjectiveArg::Mggd => RhoObjective::mggd(beta)?,
    };
    let cfg = FixedPointConfig::for_objective(&obj)
        .with_tol(tol)
        .with_max_iter(max_iter);
    let result = constrained_estimate(&samples, &group, &obj, &cfg)?;
    fs::write(out, matrix_to_csv(result.estimate.as_matrix())).map_err(|e| Error::io(out, e))?;
    println!(
        "iterations={} converged={} relative_change={:.3e}",
        result.iterations, result.converged, result.final_relative_change
    );
    Ok(())
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error [{}]: {e}", e.kind());
    1
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 failure, 2 usage error.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    match cli.command {
        Command::Simulate { config, out } => {
            let outcome = ExperimentConfig::from_file(&config)
                .and_then(|cfg| run_experiment(&cfg))
                .and_then(|report| {
                    write_report(&report, &out)?;
                    Ok(report)
                });
            match outcome {
                Ok(report) => {
                    println!(
                        "wrote {} records ({} failed cells) to {}.records.csv",
                        report.records.len(),
                        report.failures.len(),
                        out.display()
                    );
                    0
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Estimate {
            samples,
            group,
            objective,
            beta,
            tol,
            max_iter,
            out,
        } => match estimate(&samples, &group, objective, beta, tol, max_iter, &out) {
            Ok(()) => 0,
            Err(e) => report_error(&e),
        },
        Command::Verify { suite, seed } => {
            let suites: Vec<Suite> = match suite {
                SuiteArg::Geodesic => vec![Suite::Geodesic],
                SuiteArg::Group => vec![Suite::Group],
                SuiteArg::Convexity => vec![Suite::Convexity],
                SuiteArg::Generators => vec![Suite::Generators],
                SuiteArg::All => Suite::ALL.to_vec(),
            };
            let mut all_passed = true;
            for s in suites {
                match run_suite(s, seed) {
                    Ok(outcome) => {
                        println!("{outcome}");
                        all_passed &= outcome.passed;
                    }
                    Err(e) => {
                        report_error(&e);
                        all_passed = false;
                    }
                }
            }
            if all_passed {
                0
            } else {
                1
            }
        }
    }
}
