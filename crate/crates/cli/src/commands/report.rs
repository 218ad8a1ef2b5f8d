//! `report`: deviation of an optimized plan against a baseline plan on the
//! same instance, plus the paired per-demand expectations file for external
//! statistical analysis. `baseline-plan` materializes the status-quo
//! benchmark.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use regime_design_core::cone::GAMMA_INF;
use regime_design_core::eval::evaluate_plan;
use regime_design_core::ingest::{apply_profile, baseline_plan, params_for_profile};
use regime_design_core::{Error, Result};

use crate::manifest::RunManifest;

use super::{ensure_out_dir, find_profile, load_baseline, load_instance, load_plan};

pub struct ReportArgs {
    pub instance: PathBuf,
    pub profile: String,
    pub config: Option<PathBuf>,
    pub plan: PathBuf,
    pub baseline_plan: PathBuf,
    pub gamma_threshold: Option<f64>,
    pub out: PathBuf,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn change_pct(new: f64, base: f64) -> f64 {
    100.0 * (new - base) / base
}

pub fn run(args: ReportArgs) -> Result<ExitCode> {
    ensure_out_dir(&args.out)?;
    let unit_instance = load_instance(&args.instance)?;
    let profile = find_profile(&args.profile, args.config.as_deref())?;
    let instance = apply_profile(&unit_instance, &profile)?;
    let params = params_for_profile(&profile, args.gamma_threshold.unwrap_or(GAMMA_INF))?;
    params.validate_for(&instance)?;

    let optimal = load_plan(&args.plan)?;
    let baseline = load_plan(&args.baseline_plan)?;
    for (name, plan) in [("plan", &optimal), ("baseline-plan", &baseline)] {
        if plan.service_rates.len() != instance.num_regimes()
            || plan.protected.len() != instance.num_demands()
        {
            return Err(Error::Precondition {
                message: format!("{name} dimensions do not match the instance"),
            });
        }
    }

    let opt_report = evaluate_plan(&instance, &params, &optimal)?;
    let base_report = evaluate_plan(&instance, &params, &baseline)?;

    let rows = [
        (
            "mean_expected_response",
            mean(&base_report.per_demand_expectation),
            mean(&opt_report.per_demand_expectation),
        ),
        ("cvar", base_report.cvar, opt_report.cvar),
        (
            "mean_utilization",
            mean(&base_report.utilizations),
            mean(&opt_report.utilizations),
        ),
        (
            "capacity_cost",
            base_report.capacity_cost,
            opt_report.capacity_cost,
        ),
    ];

    let instance_json = unit_instance.to_json()?;
    let manifest = RunManifest::new("report")
        .with_instance(&instance_json)
        .with_param("profile", &profile.name);

    let deviation_path = args.out.join("deviation.csv");
    let mut w = csv::Writer::from_path(&deviation_path)?;
    w.write_record(["metric", "baseline", "optimal", "change_pct"])?;
    for (metric, base, opt) in rows {
        w.write_record([
            metric,
            &base.to_string(),
            &opt.to_string(),
            &change_pct(opt, base).to_string(),
        ])?;
    }
    w.flush()?;
    manifest.write_sidecar(&deviation_path)?;

    // paired per-demand expectations for external statistical tests
    let paired_path = args.out.join("paired.csv");
    let mut w = csv::Writer::from_path(&paired_path)?;
    w.write_record(["demand_id", "baseline_expected_response", "optimal_expected_response"])?;
    for (a, demand) in instance.demands().iter().enumerate() {
        w.write_record([
            demand.id.as_str(),
            &base_report.per_demand_expectation[a].to_string(),
            &opt_report.per_demand_expectation[a].to_string(),
        ])?;
    }
    w.flush()?;
    manifest.write_sidecar(&paired_path)?;

    println!(
        "cvar {:+.2}%  utilization {:+.2}%  cost {:+.2}%",
        change_pct(opt_report.cvar, base_report.cvar),
        change_pct(mean(&opt_report.utilizations), mean(&base_report.utilizations)),
        change_pct(opt_report.capacity_cost, base_report.capacity_cost),
    );
    Ok(ExitCode::SUCCESS)
}

pub fn baseline_plan_cmd(
    instance_path: &Path,
    baseline_path: &Path,
    profile_name: &str,
    config: Option<&Path>,
    out: &Path,
) -> Result<ExitCode> {
    ensure_out_dir(out)?;
    let unit_instance = load_instance(instance_path)?;
    let profile = find_profile(profile_name, config)?;
    let instance = apply_profile(&unit_instance, &profile)?;
    let estimate = load_baseline(baseline_path)?;
    let params = params_for_profile(&profile, GAMMA_INF)?;
    let plan = baseline_plan(&instance, &estimate, &params)?;

    let plan_path = out.join("baseline_plan.json");
    std::fs::write(&plan_path, plan.to_json()?)?;
    RunManifest::new("baseline-plan")
        .with_instance(&unit_instance.to_json()?)
        .with_param("profile", &profile.name)
        .write_sidecar(&plan_path)?;
    println!(
        "baseline plan: rates {:?}, protected {}/{}",
        plan.service_rates,
        plan.protected_count(),
        instance.num_demands()
    );
    Ok(ExitCode::SUCCESS)
}
