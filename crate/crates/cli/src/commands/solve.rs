//! `solve`: one instance, one profile, one method; emits the plan JSON, the
//! iteration log for the decomposition, and a manifest.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use regime_design_core::cone::GAMMA_INF;
use regime_design_core::ingest::{apply_profile, params_for_profile, resolve_gamma_threshold};
use regime_design_core::perf::expected_response;
use regime_design_core::solvers::{
    benders_solve, compact_solve_with, enumerate_solve, CompactOptions,
};
use regime_design_core::{poly, DesignParams, Error, Instance, Result, ServicePlan};

use crate::manifest::RunManifest;
use crate::vlog;

use super::{ensure_out_dir, find_profile, load_baseline, load_instance};

pub struct SolveArgs {
    pub instance: PathBuf,
    pub profile: String,
    pub config: Option<PathBuf>,
    pub method: String,
    pub gap: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub baseline: Option<PathBuf>,
    pub gamma_threshold: Option<f64>,
    pub out: PathBuf,
}

/// Resolves the CVaR threshold: explicit override, else psi-scaled baseline
/// CVaR, else effectively unbounded.
pub(crate) fn resolve_threshold(
    instance: &Instance,
    profile: &regime_design_core::ingest::Profile,
    baseline: Option<&PathBuf>,
    explicit: Option<f64>,
) -> Result<f64> {
    if let Some(g) = explicit {
        return Ok(g);
    }
    match baseline {
        Some(path) => {
            let estimate = load_baseline(path)?;
            let expectations: Vec<f64> = instance
                .demands()
                .iter()
                .map(|d| expected_response(d, instance.regimes(), &estimate.service_rate))
                .collect::<Result<_>>()?;
            resolve_gamma_threshold(&expectations, profile)
        }
        None => Ok(GAMMA_INF),
    }
}

pub(crate) enum MethodOutcome {
    Plan {
        plan: ServicePlan,
        converged: bool,
        iterations_csv: Option<String>,
    },
}

pub(crate) fn run_method(
    method: &str,
    instance: &Instance,
    params: &DesignParams,
    gap: f64,
    max_iter: usize,
) -> Result<MethodOutcome> {
    match method {
        "benders" => {
            let outcome = benders_solve(instance, params, gap, max_iter)?;
            let mut buf = Vec::new();
            outcome.state.write_csv(&mut buf)?;
            Ok(MethodOutcome::Plan {
                plan: outcome.plan,
                converged: outcome.converged,
                iterations_csv: Some(String::from_utf8(buf).expect("csv is utf-8")),
            })
        }
        "compact" => {
            let outcome = compact_solve_with(
                instance,
                params,
                &CompactOptions {
                    gap_tol: gap,
                    ..Default::default()
                },
            )?;
            Ok(MethodOutcome::Plan {
                plan: outcome.plan,
                converged: outcome.converged,
                iterations_csv: None,
            })
        }
        "poly" => {
            let plan = poly::solve_conflict_free_uniform(instance, params)?;
            Ok(MethodOutcome::Plan {
                plan,
                converged: true,
                iterations_csv: None,
            })
        }
        "enum" => {
            let plan = enumerate_solve(instance, params)?;
            Ok(MethodOutcome::Plan {
                plan,
                converged: true,
                iterations_csv: None,
            })
        }
        other => Err(Error::Precondition {
            message: format!("unknown method '{other}'"),
        }),
    }
}

pub fn run(args: SolveArgs) -> Result<ExitCode> {
    ensure_out_dir(&args.out)?;
    let unit_instance = load_instance(&args.instance)?;
    let profile = find_profile(&args.profile, args.config.as_deref())?;
    let instance = apply_profile(&unit_instance, &profile)?;
    let gamma = resolve_threshold(&instance, &profile, args.baseline.as_ref(), args.gamma_threshold)?;
    let params = params_for_profile(&profile, gamma)?;
    params.validate_for(&instance)?;

    vlog!(
        "solving {} (|A| = {}, |E| = {}) with {} under profile {} (Gamma = {gamma:.3})",
        args.instance.display(),
        instance.num_demands(),
        instance.conflict_edges().len(),
        args.method,
        profile.name
    );

    let started = Instant::now();
    let MethodOutcome::Plan {
        plan,
        converged,
        iterations_csv,
    } = run_method(&args.method, &instance, &params, args.gap, args.max_iter)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let instance_json = unit_instance.to_json()?;
    let manifest = RunManifest::new("solve")
        .with_instance(&instance_json)
        .with_param("profile", &profile.name)
        .with_param("method", &args.method)
        .with_param("gap", args.gap)
        .with_param("max_iter", args.max_iter)
        .with_param("gamma_threshold", gamma)
        .with_param("wall_ms", format!("{wall_ms:.3}"))
        .with_param("converged", converged);
    let mut manifest = manifest;
    manifest.method = Some(args.method.clone());
    manifest.seed = Some(args.seed);
    manifest.config_path = args.config.as_ref().map(|p| p.display().to_string());

    let plan_path = args.out.join("plan.json");
    std::fs::write(&plan_path, plan.to_json()?)?;
    manifest.write_sidecar(&plan_path)?;
    if let Some(csv_text) = iterations_csv {
        let log_path = args.out.join("iterations.csv");
        std::fs::write(&log_path, csv_text)?;
        manifest.write_sidecar(&log_path)?;
    }

    println!(
        "objective {:.6} protected {}/{} wall_ms {:.1}{}",
        plan.objective_value,
        plan.protected_count(),
        instance.num_demands(),
        wall_ms,
        if converged { "" } else { " (limit hit)" }
    );

    if converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(4))
    }
}
