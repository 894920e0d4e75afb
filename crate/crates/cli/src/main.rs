//! `agecomp` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "agecomp", version, about = "Component models of demographic age schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Schedule CSV inputs shared by several subcommands.
#[derive(Args, Debug)]
pub struct ScheduleArgs {
    /// Schedule CSV files; with --concat-sexes, the female file then the male file.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Take the natural log of every rate on load.
    #[arg(long)]
    log: bool,

    /// Stack female rows over male rows, prefixing age groups with F_ and M_.
    #[arg(long)]
    concat_sexes: bool,
}

#[derive(Args, Debug)]
pub struct Rank {
    /// Number of components.
    #[arg(long, short = 'c')]
    components: Option<usize>,

    /// Keep every component (the numerical rank).
    #[arg(long, conflicts_with = "components")]
    full: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factor schedules into components and report singular values.
    Decompose {
        #[command(flatten)]
        input: ScheduleArgs,
        #[command(flatten)]
        rank: Rank,
        /// Also write the per-schedule weights as CSV.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Rebuild schedules from a basis and a weight table.
    Reconstruct {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        rank: Rank,
    },
    /// Replace schedules by their low-rank reconstruction.
    Smooth {
        #[command(flatten)]
        input: ScheduleArgs,
        #[arg(long, short = 'c', default_value_t = 2)]
        components: usize,
    },
    /// Least-squares weights of schedules on an existing basis.
    Fit {
        #[command(flatten)]
        input: ScheduleArgs,
        #[arg(long)]
        basis: PathBuf,
    },
    /// Regress each weight series on covariates.
    Regress {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        /// Comma-separated covariate names.
        #[arg(long, value_delimiter = ',', required = true)]
        predictors: Vec<String>,
        /// Use only the first N weight columns.
        #[arg(long, short = 'c')]
        components: Option<usize>,
        #[arg(long)]
        no_intercept: bool,
    },
    /// Predict whole schedules from covariates through fitted weight models.
    Predict {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
    },
    /// Gaussian-mixture clustering of weight rows with BIC selection.
    Cluster {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, short = 'c')]
        components: Option<usize>,
        /// Cluster counts, e.g. 1-6, 1..6 or 2,3,4.
        #[arg(long, default_value = "1-6")]
        k_range: String,
        /// Covariance families: all, or a comma list of spherical, diagonal, eev, full.
        #[arg(long, default_value = "all")]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Basis for writing one median schedule per cluster.
        #[arg(long, requires = "patterns")]
        basis: Option<PathBuf>,
        #[arg(long, requires = "basis")]
        patterns: Option<PathBuf>,
    },
    /// Absolute-error summary of predicted against observed schedules.
    Metrics {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        observed: PathBuf,
        /// Compare log rates (applied to both files).
        #[arg(long)]
        log: bool,
    },
    /// Rank-k approximation of a PPM image.
    Image {
        input: PathBuf,
        #[arg(long, short = 'k')]
        rank: usize,
        /// Write ASCII (P3) instead of binary (P6).
        #[arg(long)]
        ascii: bool,
    },
    /// Life tables from death rates on the natural scale.
    Lifetable {
        input: PathBuf,
        /// Print the full table for one schedule instead of the summary.
        #[arg(long)]
        column: Option<String>,
    },
    /// SVG plots: predicted against observed, or weight series.
    Plot {
        #[arg(long, requires = "predicted", conflicts_with = "weights")]
        observed: Option<PathBuf>,
        #[arg(long, requires = "observed")]
        predicted: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        log: bool,
        #[arg(long, default_value = "")]
        title: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command, cli.out.as_deref(), cli.format) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("agecomp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
