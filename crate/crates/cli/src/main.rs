//! Command-line front end tying ingestion, solving, simulation and
//! reporting into reproducible runs.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use regime_design_core::Error;

/// Exit codes: 0 success, 2 infeasible, 3 precondition, 4 limit-hit, 1 other.
fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Infeasible { .. } => 2,
        Error::Precondition { .. } | Error::SizeGuard { .. } | Error::DegenerateTail { .. } => 3,
        Error::IterationLimit { .. } | Error::NodeLimit { .. } => 4,
        _ => 1,
    }
}

pub(crate) fn verbose() -> bool {
    std::env::var("REGIME_DESIGN_LOG").map_or(false, |v| !v.is_empty() && v != "0")
}

macro_rules! vlog {
    ($($arg:tt)*) => {
        if crate::verbose() {
            eprintln!($($arg)*);
        }
    };
}
pub(crate) use vlog;

#[derive(Parser)]
#[command(
    name = "regime-design",
    version,
    about = "Design of multi-regime parallel-queue service systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build instances and baseline estimates from an incident CSV.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance under a profile.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Profile name (shipped set or from --config).
        #[arg(long)]
        profile: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["benders", "compact", "poly", "enum"])]
        method: String,
        /// Relative optimality gap.
        #[arg(long, default_value_t = 1e-5)]
        gap: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Baseline estimate JSON; sets the CVaR threshold via psi scaling.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Explicit CVaR threshold override (minutes).
        #[arg(long)]
        gamma_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Construct the status-quo benchmark plan from baseline estimates.
    BaselinePlan {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        profile: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo validation of a plan against the analytic model.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Profile applied to thresholds/tolerances before simulating.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated grid of evaluation times in minutes.
        #[arg(long)]
        grid: Option<String>,
        /// Evenly spaced grid size when --grid is absent.
        #[arg(long, default_value_t = 50)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deviation report of an optimized plan against a baseline plan.
    Report {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        profile: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        baseline_plan: PathBuf,
        #[arg(long)]
        gamma_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every (borough, window, profile) target in the config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated methods to run per target.
        #[arg(long, default_value = "benders")]
        methods: String,
        #[arg(long, default_value_t = 1e-5)]
        gap: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker pool width.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { config, out } => commands::ingest::run(&config, &out),
        Command::Solve {
            instance,
            profile,
            config,
            method,
            gap,
            max_iter,
            seed,
            baseline,
            gamma_threshold,
            out,
        } => commands::solve::run(commands::solve::SolveArgs {
            instance,
            profile,
            config,
            method,
            gap,
            max_iter,
            seed,
            baseline,
            gamma_threshold,
            out,
        }),
        Command::BaselinePlan {
            instance,
            baseline,
            profile,
            config,
            out,
        } => commands::report::baseline_plan_cmd(&instance, &baseline, &profile, config.as_deref(), &out),
        Command::Simulate {
            instance,
            plan,
            profile,
            config,
            n_samples,
            seed,
            grid,
            grid_points,
            out,
        } => commands::simulate::run(commands::simulate::SimulateArgs {
            instance,
            plan,
            profile,
            config,
            n_samples,
            seed,
            grid,
            grid_points,
            out,
        }),
        Command::Report {
            instance,
            profile,
            config,
            plan,
            baseline_plan,
            gamma_threshold,
            out,
        } => commands::report::run(commands::report::ReportArgs {
            instance,
            profile,
            config,
            plan,
            baseline_plan,
            gamma_threshold,
            out,
        }),
        Command::Sweep {
            config,
            methods,
            gap,
            max_iter,
            seed,
            jobs,
            out,
        } => commands::sweep::run(commands::sweep::SweepArgs {
            config,
            methods,
            gap,
            max_iter,
            seed,
            jobs,
            out,
        }),
    };
    match result {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
