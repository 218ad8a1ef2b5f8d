//! Benders decomposition: a mixed-integer linear master over the protection
//! vector alternating with the continuous exponential-cone subproblem, with
//! optimality cuts from subproblem duals and combinatorial feasibility cuts.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use crate::cone::{build_subproblem, solve_subproblem_with, SolveOptions, SubproblemStatus};
use crate::error::{Error, Result};
use crate::model::{DesignParams, Instance, ServicePlan};

use super::cuts::{feasibility_cut, optimality_cut, Cut};
use super::master::{master_solve, MasterOutcome};
use super::{plan_from_solution, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER};

#[derive(Debug, Clone)]
pub struct BendersOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
    pub solve: SolveOptions,
    /// Service-rate cap used only for the fallback theta floor when the
    /// all-zero subproblem cannot be solved.
    pub rate_cap: f64,
}

impl Default for BendersOptions {
    fn default() -> Self {
        BendersOptions {
            gap_tol: DEFAULT_GAP_TOL,
            max_iter: DEFAULT_MAX_ITER,
            solve: SolveOptions::default(),
            rate_cap: 1e6,
        }
    }
}

/// One master/subproblem round in the iteration log.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub cut_kind: String,
    pub subproblem_status: String,
    pub wall_ms: f64,
    pub sbar: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct BendersState {
    pub cuts: Vec<Cut>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub incumbent: Option<ServicePlan>,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
    pub hit_iteration_limit: bool,
}

impl BendersState {
    /// Iteration log as CSV: iter, LB, UB, gap, cut_kind, subproblem_status, wall_ms.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,lb,ub,gap,cut_kind,subproblem_status,wall_ms")?;
        for rec in &self.log {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.3}",
                rec.iter,
                rec.lower_bound,
                rec.upper_bound,
                rec.gap,
                rec.cut_kind,
                rec.subproblem_status,
                rec.wall_ms
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BendersOutcome {
    pub plan: ServicePlan,
    pub state: BendersState,
    pub converged: bool,
}

pub fn benders_solve(
    instance: &Instance,
    params: &DesignParams,
    gap_tol: f64,
    max_iter: usize,
) -> Result<BendersOutcome> {
    benders_solve_with(
        instance,
        params,
        &BendersOptions {
            gap_tol,
            max_iter,
            ..Default::default()
        },
    )
}

pub fn benders_solve_with(
    instance: &Instance,
    params: &DesignParams,
    options: &BendersOptions,
) -> Result<BendersOutcome> {
    if !(options.gap_tol > 0.0) {
        return Err(Error::domain("gap_tol", "must be > 0"));
    }
    params.validate_for(instance)?;
    let n = instance.num_demands();
    let started = Instant::now();

    let mut state = BendersState {
        upper_bound: f64::INFINITY,
        ..Default::default()
    };

    // theta floor from the all-zero subproblem; by monotonicity of the value
    // function its infeasibility certifies global infeasibility.
    let zero = vec![false; n];
    let zero_program = build_subproblem(instance, params, &zero)?;
    let zero_solution = solve_subproblem_with(&zero_program, &options.solve)?;
    let theta_lb = match &zero_solution.status {
        SubproblemStatus::Optimal => zero_solution.objective,
        SubproblemStatus::Infeasible(reason) => {
            return Err(Error::Infeasible {
                reason: format!(
                    "subproblem infeasible at the all-zero protection vector ({}); \
                     every protection vector is therefore infeasible",
                    reason.detail
                ),
            });
        }
        SubproblemStatus::NumericalFailure(_) => {
            // capped-rate fallback floor
            let eps = instance.stability_margin();
            let kappa = params.congestion_weight;
            let min_lambda = instance
                .arrival_rates()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let cost_floor: f64 = instance
                .regimes()
                .iter()
                .map(|r| r.unit_cost * (r.arrival_rate + eps))
                .sum();
            cost_floor
                - kappa * instance.num_regimes() as f64 * (options.rate_cap - min_lambda).ln()
        }
    };
    state.lower_bound = theta_lb;

    let mut proposed: HashSet<Vec<bool>> = HashSet::new();
    let mut cached_theta: std::collections::HashMap<Vec<bool>, f64> = Default::default();

    for iter in 1..=options.max_iter {
        let iter_started = Instant::now();
        let outcome = master_solve(instance, params, &state.cuts, theta_lb)?;
        let (sbar, theta_hat) = match outcome {
            MasterOutcome::Optimal { sbar, theta } => (sbar, theta),
            MasterOutcome::Infeasible => {
                return Err(Error::Infeasible {
                    reason: if state.cuts.is_empty() {
                        "no protection vector satisfies coverage and conflicts \
                         (independent set too small)"
                            .to_string()
                    } else {
                        "master infeasible after feasibility cuts".to_string()
                    },
                });
            }
        };
        state.lower_bound = state.lower_bound.max(theta_hat);
        state.iterations = iter;

        if proposed.contains(&sbar) {
            // A cut-off point can only reappear once the master bound has
            // caught up with its value; certify convergence from the cache.
            if let Some(&theta) = cached_theta.get(&sbar) {
                state.upper_bound = state.upper_bound.min(theta);
            }
            let gap = state.upper_bound - state.lower_bound;
            state.log.push(IterationRecord {
                iter,
                lower_bound: state.lower_bound,
                upper_bound: state.upper_bound,
                gap,
                cut_kind: "none".to_string(),
                subproblem_status: "cached".to_string(),
                wall_ms: iter_started.elapsed().as_secs_f64() * 1e3,
                sbar,
            });
            break;
        }

        let program = build_subproblem(instance, params, &sbar)?;
        let solution = solve_subproblem_with(&program, &options.solve)?;
        let (cut_kind, status_name) = match &solution.status {
            SubproblemStatus::Optimal => {
                let theta = solution.objective;
                cached_theta.insert(sbar.clone(), theta);
                if theta < state.upper_bound {
                    state.upper_bound = theta;
                    state.incumbent =
                        Some(plan_from_solution(&program, &solution, sbar.clone()));
                }
                let mut cut = optimality_cut(&sbar, &solution, instance)?;
                cut.source_iteration = iter;
                state.cuts.push(cut);
                ("optimality", "optimal".to_string())
            }
            SubproblemStatus::Infeasible(reason) => {
                let mut cut = feasibility_cut(&sbar);
                cut.source_iteration = iter;
                state.cuts.push(cut);
                ("feasibility", format!("infeasible({})", reason.family))
            }
            SubproblemStatus::NumericalFailure(message) => {
                return Err(Error::NumericalFailure {
                    message: format!("subproblem at iteration {iter}: {message}"),
                });
            }
        };
        proposed.insert(sbar.clone());

        let gap = state.upper_bound - state.lower_bound;
        state.log.push(IterationRecord {
            iter,
            lower_bound: state.lower_bound,
            upper_bound: state.upper_bound,
            gap,
            cut_kind: cut_kind.to_string(),
            subproblem_status: status_name,
            wall_ms: iter_started.elapsed().as_secs_f64() * 1e3,
            sbar,
        });

        if gap <= options.gap_tol * (1.0 + state.upper_bound.abs()) {
            let plan = state.incumbent.clone().expect("gap closed without incumbent");
            let _ = started;
            return Ok(BendersOutcome {
                plan,
                state,
                converged: true,
            });
        }
    }

    let converged = state.upper_bound - state.lower_bound
        <= options.gap_tol * (1.0 + state.upper_bound.abs());
    state.hit_iteration_limit = !converged;
    match state.incumbent.clone() {
        Some(plan) => Ok(BendersOutcome {
            plan,
            state,
            converged,
        }),
        None => Err(Error::IterationLimit {
            limit: options.max_iter,
        }),
    }
}
