// Domain guards use negated comparisons (`!(v > 0.0)`) on purpose: they
// reject NaN, which the suggested `v <= 0.0` silently accepts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Batch driver for counting-process simulations and verification runs.
//!
//! Every run is fully determined by a JSON config plus the seed: result
//! files embed the effective config, and reruns with the same config and
//! seed produce byte-identical numeric payloads regardless of thread count.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, ResolvedExperiment};
use output::RunReport;

#[derive(Parser)]
#[command(
    name = "ergodic-counts",
    version,
    about = "Simulate quantum counting processes and verify their ergodic averages"
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for result files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads for trajectory ensembles (falls back to the
    /// ERGODIC_COUNTS_THREADS environment variable, then to all cores).
    #[arg(long)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample detection records and write them as CSV files.
    Simulate {
        /// How many records to emit (default: the config's n_traj).
        #[arg(long)]
        n_records: Option<usize>,
    },
    /// Run a named consistency check.
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
    /// Compare pathwise time averages against model-side expectations.
    Correlate {
        #[command(subcommand)]
        side: CorrelateKind,
    },
    /// Tabulate stationary non-exclusive densities g_n.
    Gn {
        /// Probe times, comma separated.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Coincidence box width for the box integral.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// The discrete-time suite: repeated Kraus measurement statistics.
    Kraus,
}

#[derive(Subcommand)]
enum VerifyCheck {
    /// Composition law of the operation-valued measure on event pairs.
    Markov,
    /// tr L(ρ) = 0 on random states, plus the splitting identity.
    Normalisation,
    /// First-click law against the no-click survival probability.
    WaitingTime,
    /// Exact subset/product counting identity on fuzzed records.
    SubsetSum,
    /// Empirical current moments against the integrability bound.
    MomentBound,
}

#[derive(Subcommand)]
enum CorrelateKind {
    /// Time-averaged current products vs ensemble expectations.
    Current {
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Coincidence counts vs box integrals of g_n.
    Coincidence {
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Current autocovariance table and its cosine-transform spectrum.
    Spectrum {
        #[arg(long)]
        tau: Option<f64>,
    },
}

fn run(cli: Cli) -> ergodic_counts::Result<RunReport> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let threads = cli.threads.or_else(|| {
        std::env::var("ERGODIC_COUNTS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| ergodic_counts::Error::Config(format!("thread pool: {e}")))?;
    }

    // Subcommand flag overrides land in the config before it is echoed.
    match &cli.command {
        Command::Correlate { side } => match side {
            CorrelateKind::Current { times, tau } => {
                if let Some(times) = times {
                    config.times = times.clone();
                }
                if let Some(tau) = tau {
                    config.tau = *tau;
                }
            }
            CorrelateKind::Coincidence { times, eps, tau } => {
                if let Some(times) = times {
                    config.times = times.clone();
                }
                if let Some(eps) = eps {
                    config.epsilon = *eps;
                }
                if let Some(tau) = tau {
                    config.tau = *tau;
                }
            }
            CorrelateKind::Spectrum { tau } => {
                if let Some(tau) = tau {
                    config.tau = *tau;
                }
            }
        },
        Command::Gn { times, eps } => {
            if let Some(times) = times {
                config.times = times.clone();
            }
            if let Some(eps) = eps {
                config.epsilon = *eps;
            }
        }
        _ => {}
    }
    // Flag overrides must obey the same rules as the config file.
    config.validate()?;

    let exp = ResolvedExperiment::new(config)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| {
        ergodic_counts::Error::Config(format!("cannot create {}: {e}", cli.out.display()))
    })?;

    let report = match &cli.command {
        Command::Simulate { n_records } => commands::simulate(&exp, &cli.out, *n_records)?,
        Command::Verify { check } => match check {
            VerifyCheck::Markov => commands::verify_markov(&exp)?,
            VerifyCheck::Normalisation => commands::verify_normalisation(&exp)?,
            VerifyCheck::WaitingTime => commands::verify_waiting_time(&exp)?,
            VerifyCheck::SubsetSum => commands::verify_subset_sum(&exp)?,
            VerifyCheck::MomentBound => commands::verify_moment_bound(&exp)?,
        },
        Command::Correlate { side } => match side {
            CorrelateKind::Current { .. } => commands::correlate_current(&exp)?,
            CorrelateKind::Coincidence { .. } => commands::correlate_coincidence(&exp)?,
            CorrelateKind::Spectrum { .. } => commands::correlate_spectrum(&exp, &cli.out)?,
        },
        Command::Gn { .. } => commands::tabulate_gn(&exp, &cli.out)?,
        Command::Kraus => commands::kraus_suite(&exp, &cli.out)?,
    };
    report.emit(&cli.out)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) if report.all_pass() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
