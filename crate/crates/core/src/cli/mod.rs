//! Command-line harness: configuration, stage orchestration and manifests.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{Context, FlowSource, OdeArgs, OdeCase};
pub use config::RunConfig;
pub use manifest::RunManifest;

use crate::error::Result;
use crate::model::NormFamily;

#[derive(Debug, Parser)]
#[command(name = "lrp", version, about = "Cut-off renormalization-group laboratory for critical long-range percolation")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `run.workers` (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CaseArg {
    Riccati,
    Hierarchy,
    Gyration,
    Displacement,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    ScaledSup,
    ScaledEuclidean,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample clusters (and boxes) over the radius grid.
    Sample,
    /// Flow observables over the radius grid.
    Flow {
        /// Analyse existing clusters.csv / boxes.csv instead of sampling.
        #[arg(long, conflicts_with = "synthetic")]
        from_samples: bool,
        /// Use the exact mean-field family with this amplitude A.
        #[arg(long, value_name = "A")]
        synthetic: Option<f64>,
    },
    /// Estimate the critical point from the flatness of β r^{-α} E|K|.
    Betac,
    /// Volume-tail and Laplace-side fits of the sampled clusters.
    Tail,
    /// Integrate one of the flow equations.
    Ode {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 4)]
        p_max: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Enumerate the degree-3 trees with n + 1 labelled leaves.
    Diagrams {
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
    /// Displacement moment coefficients of the limiting superprocess.
    Superproc {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_enum, default_value_t = NormArg::ScaledSup)]
        norm: NormArg,
        #[arg(long, default_value_t = 4)]
        p_max: usize,
    },
    /// Aggregate every stage output into report.csv.
    Report,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let ctx = Context::new(config, cli.out, cli.seed, cli.workers);
    match cli.command {
        Command::Sample => commands::cmd_sample(&ctx).map(drop),
        Command::Flow { from_samples, synthetic } => {
            let source = match (from_samples, synthetic) {
                (_, Some(a)) => FlowSource::Synthetic { a },
                (true, None) => FlowSource::FromSamples,
                (false, None) => FlowSource::Sample,
            };
            commands::cmd_flow(&ctx, source).map(drop)
        }
        Command::Betac => commands::cmd_betac(&ctx).map(drop),
        Command::Tail => commands::cmd_tail(&ctx).map(drop),
        Command::Ode { case, alpha, beta, a, p_max, d } => {
            let case = match case {
                CaseArg::Riccati => OdeCase::Riccati,
                CaseArg::Hierarchy => OdeCase::Hierarchy,
                CaseArg::Gyration => OdeCase::Gyration,
                CaseArg::Displacement => OdeCase::Displacement,
            };
            commands::cmd_ode(&ctx, case, OdeArgs { alpha, beta, a, p_max, d })
        }
        Command::Diagrams { n } => commands::cmd_diagrams(&ctx, n).map(drop),
        Command::Superproc { alpha, d, norm, p_max } => {
            let norm = match norm {
                NormArg::ScaledSup => NormFamily::ScaledSup,
                NormArg::ScaledEuclidean => NormFamily::ScaledEuclidean,
            };
            commands::cmd_superproc(&ctx, alpha, d, norm, p_max).map(drop)
        }
        Command::Report => commands::cmd_report(&ctx).map(drop),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
