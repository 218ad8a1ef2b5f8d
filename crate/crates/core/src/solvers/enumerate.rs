//! Exhaustive small-instance oracle: iterates the coverage- and
//! conflict-feasible protection vectors and solves the subproblem at each.
//!
//! Since the value function is componentwise nondecreasing and dropping a
//! protected demand never breaks coverage or conflicts, only minimal
//! coverage-feasible independent sets need to be visited: exactly the
//! ceil(beta |A|)-subsets in the cardinality case, inclusion-minimal sets
//! under weighted coverage.

use crate::cone::{build_subproblem, solve_subproblem_with, SolveOptions, SubproblemStatus};
use crate::error::{Error, Result};
use crate::model::{DesignParams, Instance, ServicePlan};

use super::plan_from_solution;

/// Upper bound on |A| for enumeration.
pub const ENUMERATION_GUARD: usize = 20;

pub fn enumerate_solve(instance: &Instance, params: &DesignParams) -> Result<ServicePlan> {
    enumerate_solve_with(instance, params, &SolveOptions::default())
}

pub fn enumerate_solve_with(
    instance: &Instance,
    params: &DesignParams,
    solve: &SolveOptions,
) -> Result<ServicePlan> {
    let n = instance.num_demands();
    if n > ENUMERATION_GUARD {
        return Err(Error::SizeGuard {
            size: n,
            max: ENUMERATION_GUARD,
        });
    }
    params.validate_for(instance)?;

    let mut adjacency = vec![0u32; n];
    for (i, j) in instance.conflict_index_pairs() {
        adjacency[i] |= 1 << j;
        adjacency[j] |= 1 << i;
    }
    let protectable: u32 = instance
        .demands()
        .iter()
        .enumerate()
        .filter(|(_, d)| d.protectable())
        .map(|(a, _)| 1u32 << a)
        .sum();

    let weights: Vec<f64> = instance.demands().iter().map(|d| d.weight).collect();
    let total_weight: f64 = weights.iter().sum();
    let coverage_ok = |mask: u32| -> bool {
        if params.weighted_coverage {
            let covered: f64 = (0..n).filter(|&a| mask & (1 << a) != 0).map(|a| weights[a]).sum();
            covered >= params.coverage * total_weight - 1e-9 * total_weight.max(1.0)
        } else {
            (mask.count_ones() as usize) >= params.coverage_count(n)
        }
    };
    let independent = |mask: u32| -> bool { (0..n).all(|a| mask & (1 << a) == 0 || mask & adjacency[a] == 0) };
    // minimal: removing any single member breaks coverage
    let minimal = |mask: u32| -> bool {
        (0..n).all(|a| mask & (1 << a) == 0 || !coverage_ok(mask & !(1 << a)))
    };

    let mut best: Option<(f64, Vec<bool>, ServicePlan)> = None;
    let mut any_candidate = false;
    for mask in 0u32..(1u32 << n) {
        if mask & !protectable != 0 || !coverage_ok(mask) || !independent(mask) || !minimal(mask) {
            continue;
        }
        any_candidate = true;
        let sbar: Vec<bool> = (0..n).map(|a| mask & (1 << a) != 0).collect();
        let program = build_subproblem(instance, params, &sbar)?;
        let solution = solve_subproblem_with(&program, solve)?;
        match &solution.status {
            SubproblemStatus::Optimal => {
                let theta = solution.objective;
                let replace = match &best {
                    None => true,
                    Some((obj, s, _)) => {
                        theta < obj - 1e-12 || ((theta - obj).abs() <= 1e-12 && sbar < *s)
                    }
                };
                if replace {
                    let plan = plan_from_solution(&program, &solution, sbar.clone());
                    best = Some((theta, sbar, plan));
                }
            }
            SubproblemStatus::Infeasible(_) => {}
            SubproblemStatus::NumericalFailure(message) => {
                return Err(Error::NumericalFailure {
                    message: format!("enumeration at {sbar:?}: {message}"),
                });
            }
        }
    }

    match best {
        Some((_, _, plan)) => Ok(plan),
        None => Err(Error::Infeasible {
            reason: if any_candidate {
                "every coverage- and conflict-feasible protection vector has an \
                 infeasible subproblem"
                    .to_string()
            } else {
                "no protection vector satisfies coverage and conflicts".to_string()
            },
        }),
    }
}
