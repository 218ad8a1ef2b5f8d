//! `sweep`: every (borough, window, profile) target from the config, solved
//! with each requested method in a bounded worker pool; per-run outputs plus
//! one aggregate CSV. Individual failures are recorded and the sweep
//! continues.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use regime_design_core::ingest::{
    apply_profile, build_instance, estimate_baseline_rates, params_for_profile, parse_incidents,
    reference_profile, resolve_gamma_threshold, BuildOptions, ConflictRule, IngestConfig,
};
use regime_design_core::perf::expected_response;
use regime_design_core::{Instance, Result};

use crate::manifest::RunManifest;
use crate::vlog;

use super::{ensure_out_dir, slug};

pub struct SweepArgs {
    pub config: PathBuf,
    pub methods: String,
    pub gap: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

struct Task {
    borough: String,
    window: String,
    profile: regime_design_core::ingest::Profile,
    method: String,
    instance: Arc<Instance>,
    gamma: f64,
}

#[derive(Debug, Clone)]
struct RunRow {
    borough: String,
    window: String,
    profile: String,
    method: String,
    status: String,
    objective: Option<f64>,
    protected: Option<usize>,
    num_demands: usize,
    wall_ms: f64,
}

pub fn run(args: SweepArgs) -> Result<ExitCode> {
    let config = IngestConfig::from_path(&args.config)?;
    ensure_out_dir(&args.out)?;
    let methods: Vec<String> = args
        .methods
        .split(',')
        .map(|m| m.trim().to_string())
        .filter(|m| !m.is_empty())
        .collect();

    let columns = config.columns();
    let parsed = parse_incidents(&config.input.csv, &columns)?;
    let options = BuildOptions {
        conflict_rule: ConflictRule {
            max_separation_minutes: config.run.conflict_minutes,
        },
        unit_costs: config.run.unit_costs.clone(),
        stability_margin: config.run.stability_margin,
        drop_unmapped_call_types: config.run.drop_unmapped_call_types,
    };
    let reference = reference_profile();
    let windows = config.effective_windows()?;
    let profiles = config.effective_profiles();

    // Build targets up front; target-level failures become aggregate rows.
    let mut tasks: VecDeque<Task> = VecDeque::new();
    let mut rows: Vec<RunRow> = Vec::new();
    for borough in &config.boroughs {
        for window in &windows {
            let built = match build_instance(
                &parsed.records,
                borough,
                window,
                &config.regimes,
                &reference,
                &options,
            ) {
                Ok(b) => b,
                Err(error) => {
                    for profile in &profiles {
                        for method in &methods {
                            rows.push(RunRow {
                                borough: borough.clone(),
                                window: window.name.clone(),
                                profile: profile.name.clone(),
                                method: method.clone(),
                                status: format!("build-failed: {error}"),
                                objective: None,
                                protected: None,
                                num_demands: 0,
                                wall_ms: 0.0,
                            });
                        }
                    }
                    continue;
                }
            };
            let estimate = estimate_baseline_rates(
                &parsed
                    .records
                    .iter()
                    .filter(|r| r.borough.eq_ignore_ascii_case(borough))
                    .cloned()
                    .collect::<Vec<_>>(),
                &config.regimes,
                window,
            )?;
            for profile in &profiles {
                let applied = match apply_profile(&built.instance, profile) {
                    Ok(i) => Arc::new(i),
                    Err(error) => {
                        for method in &methods {
                            rows.push(RunRow {
                                borough: borough.clone(),
                                window: window.name.clone(),
                                profile: profile.name.clone(),
                                method: method.clone(),
                                status: format!("profile-failed: {error}"),
                                objective: None,
                                protected: None,
                                num_demands: built.instance.num_demands(),
                                wall_ms: 0.0,
                            });
                        }
                        continue;
                    }
                };
                let expectations: Vec<f64> = applied
                    .demands()
                    .iter()
                    .map(|d| expected_response(d, applied.regimes(), &estimate.service_rate))
                    .collect::<Result<_>>()?;
                let gamma = resolve_gamma_threshold(&expectations, profile)?;
                for method in &methods {
                    tasks.push_back(Task {
                        borough: borough.clone(),
                        window: window.name.clone(),
                        profile: profile.clone(),
                        method: method.clone(),
                        instance: applied.clone(),
                        gamma,
                    });
                }
            }
        }
    }

    vlog!("sweep: {} runs over {} workers", tasks.len(), args.jobs.max(1));
    let queue = Arc::new(Mutex::new(tasks));
    let results: Arc<Mutex<Vec<RunRow>>> = Arc::new(Mutex::new(rows));
    let out_dir = Arc::new(args.out.clone());
    let gap = args.gap;
    let max_iter = args.max_iter;

    std::thread::scope(|scope| {
        for _ in 0..args.jobs.max(1) {
            let queue = queue.clone();
            let results = results.clone();
            let out_dir = out_dir.clone();
            scope.spawn(move || loop {
                let task = {
                    let mut q = queue.lock().expect("queue lock");
                    q.pop_front()
                };
                let Some(task) = task else { break };
                let row = run_task(&task, gap, max_iter, &out_dir);
                results.lock().expect("results lock").push(row);
            });
        }
    });

    let mut rows = Arc::try_unwrap(results)
        .expect("workers done")
        .into_inner()
        .expect("results lock");
    rows.sort_by(|a, b| {
        (&a.borough, &a.window, &a.profile, &a.method)
            .cmp(&(&b.borough, &b.window, &b.profile, &b.method))
    });

    let aggregate_path = args.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&aggregate_path)?;
    w.write_record([
        "borough",
        "window",
        "profile",
        "method",
        "status",
        "objective",
        "protected",
        "num_demands",
        "wall_ms",
    ])?;
    for row in &rows {
        w.write_record([
            row.borough.as_str(),
            row.window.as_str(),
            row.profile.as_str(),
            row.method.as_str(),
            row.status.as_str(),
            &row.objective.map_or(String::new(), |v| v.to_string()),
            &row.protected.map_or(String::new(), |v| v.to_string()),
            &row.num_demands.to_string(),
            &format!("{:.3}", row.wall_ms),
        ])?;
    }
    w.flush()?;
    let mut manifest = RunManifest::new("sweep")
        .with_param("methods", &args.methods)
        .with_param("gap", gap)
        .with_param("max_iter", max_iter)
        .with_param("jobs", args.jobs);
    manifest.seed = Some(args.seed);
    manifest.config_path = Some(args.config.display().to_string());
    manifest.write_sidecar(&aggregate_path)?;

    let failures = rows.iter().filter(|r| r.status != "ok").count();
    println!("sweep complete: {} runs, {} failures", rows.len(), failures);
    Ok(ExitCode::SUCCESS)
}

fn run_task(task: &Task, gap: f64, max_iter: usize, out_dir: &PathBuf) -> RunRow {
    let started = Instant::now();
    let outcome = params_for_profile(&task.profile, task.gamma)
        .and_then(|params| {
            params.validate_for(&task.instance)?;
            super::solve::run_method(&task.method, &task.instance, &params, gap, max_iter)
        });
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut row = RunRow {
        borough: task.borough.clone(),
        window: task.window.clone(),
        profile: task.profile.name.clone(),
        method: task.method.clone(),
        status: "ok".to_string(),
        objective: None,
        protected: None,
        num_demands: task.instance.num_demands(),
        wall_ms,
    };
    match outcome {
        Ok(super::solve::MethodOutcome::Plan {
            plan,
            converged,
            iterations_csv,
        }) => {
            row.objective = Some(plan.objective_value);
            row.protected = Some(plan.protected_count());
            if !converged {
                row.status = "limit-hit".to_string();
            }
            let run_dir = out_dir.join(format!(
                "runs/{}_{}_{}_{}",
                slug(&task.borough),
                slug(&task.window),
                slug(&task.profile.name),
                slug(&task.method)
            ));
            if std::fs::create_dir_all(&run_dir).is_ok() {
                let plan_path = run_dir.join("plan.json");
                if let Ok(text) = plan.to_json() {
                    let _ = std::fs::write(&plan_path, text);
                    let mut manifest = RunManifest::new("sweep-run")
                        .with_param("profile", &task.profile.name)
                        .with_param("gamma_threshold", task.gamma)
                        .with_param("wall_ms", format!("{wall_ms:.3}"));
                    manifest.method = Some(task.method.clone());
                    let _ = manifest.write_sidecar(&plan_path);
                }
                if let Some(text) = iterations_csv {
                    let _ = std::fs::write(run_dir.join("iterations.csv"), text);
                }
            }
        }
        Err(error) => {
            row.status = format!("failed: {error}");
        }
    }
    row
}
