//! `simulate`: Monte Carlo validation of a plan, emitting the per-demand
//! CDF comparison and a summary.

use std::path::PathBuf;
use std::process::ExitCode;

use regime_design_core::ingest::apply_profile;
use regime_design_core::sim::{simulate, write_cdf_csv};
use regime_design_core::{Error, Result};

use crate::manifest::RunManifest;
use crate::vlog;

use super::{ensure_out_dir, find_profile, load_instance, load_plan};

pub struct SimulateArgs {
    pub instance: PathBuf,
    pub plan: PathBuf,
    pub profile: Option<String>,
    pub config: Option<PathBuf>,
    pub n_samples: usize,
    pub seed: u64,
    pub grid: Option<String>,
    pub grid_points: usize,
    pub out: PathBuf,
}

pub fn run(args: SimulateArgs) -> Result<ExitCode> {
    ensure_out_dir(&args.out)?;
    let unit_instance = load_instance(&args.instance)?;
    let instance = match &args.profile {
        Some(name) => {
            let profile = find_profile(name, args.config.as_deref())?;
            apply_profile(&unit_instance, &profile)?
        }
        None => unit_instance.clone(),
    };
    let plan = load_plan(&args.plan)?;

    let grid: Vec<f64> = match &args.grid {
        Some(text) => text
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| Error::Precondition {
                    message: format!("bad grid value '{s}'"),
                })
            })
            .collect::<Result<_>>()?,
        None => {
            if args.grid_points == 0 {
                return Err(Error::Precondition {
                    message: "grid_points must be positive".to_string(),
                });
            }
            let upper = instance
                .demands()
                .iter()
                .map(|d| d.threshold)
                .fold(1.0f64, f64::max)
                * 1.5;
            (1..=args.grid_points)
                .map(|i| upper * i as f64 / args.grid_points as f64)
                .collect()
        }
    };

    vlog!(
        "simulating {} draws per demand over {} grid points",
        args.n_samples,
        grid.len()
    );
    let result = simulate(&instance, &plan, args.n_samples, args.seed, &grid)?;

    let instance_json = unit_instance.to_json()?;
    let mut manifest = RunManifest::new("simulate")
        .with_instance(&instance_json)
        .with_param("n_samples", args.n_samples)
        .with_param("grid_points", grid.len());
    manifest.seed = Some(args.seed);

    let cdf_path = args.out.join("simulation.csv");
    let mut buf = Vec::new();
    write_cdf_csv(&instance, &result, &mut buf)?;
    std::fs::write(&cdf_path, buf)?;
    manifest.write_sidecar(&cdf_path)?;

    let summary_path = args.out.join("simulation_summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record(["demand_id", "empirical_mean", "sla_hit_rate", "max_cdf_deviation"])?;
    for (a, demand) in instance.demands().iter().enumerate() {
        w.write_record([
            demand.id.as_str(),
            &result.empirical_mean[a].to_string(),
            &result.sla_hit_rate[a].to_string(),
            &result.max_cdf_deviation[a].to_string(),
        ])?;
    }
    w.flush()?;
    manifest.write_sidecar(&summary_path)?;

    let worst = result
        .max_cdf_deviation
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    println!("max CDF deviation {worst:.5} over {} demands", instance.num_demands());
    Ok(ExitCode::SUCCESS)
}
