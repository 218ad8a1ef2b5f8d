//! Plan evaluation and feasibility checking against the full constraint set:
//! stability, selective SLA, coverage (cardinality or weighted), conflicts
//! and the CVaR tail bound.

use crate::error::{Error, Result};
use crate::model::{
    ConstraintId, DesignParams, Instance, PerformanceReport, ServicePlan, Violation, FEAS_REL_TOL,
};
use crate::perf::cvar_of_values;

fn rel_violated(lhs: f64, rhs: f64, slack: f64) -> bool {
    slack < -FEAS_REL_TOL * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Computes every performance field of a plan and lists each failed
/// constraint with its identifier, both sides and signed slack (feasible
/// means slack >= 0).
pub fn evaluate_plan(
    instance: &Instance,
    params: &DesignParams,
    plan: &ServicePlan,
) -> Result<PerformanceReport> {
    let n = instance.num_demands();
    let r = instance.num_regimes();
    if plan.service_rates.len() != r {
        return Err(Error::DimensionMismatch {
            what: "service rates",
            expected: r,
            got: plan.service_rates.len(),
        });
    }
    if plan.protected.len() != n {
        return Err(Error::DimensionMismatch {
            what: "protection flags",
            expected: n,
            got: plan.protected.len(),
        });
    }

    let eps = instance.stability_margin();
    let mut violations = Vec::new();

    let mut utilizations = Vec::with_capacity(r);
    let mut all_stable = true;
    for (regime, &mu) in instance.regimes().iter().zip(&plan.service_rates) {
        let slack = mu - regime.arrival_rate;
        utilizations.push(if mu > 0.0 { regime.arrival_rate / mu } else { f64::INFINITY });
        if slack <= 0.0 {
            all_stable = false;
        }
        let margin = slack - eps;
        if rel_violated(slack, eps, margin) {
            violations.push(Violation {
                constraint: ConstraintId::Stability { regime: regime.index },
                left: slack,
                right: eps,
                slack: margin,
            });
        }
    }

    // Expectations and SLA probabilities. Unstable regimes contribute a
    // divergent sojourn: the expectation is infinite and the regime's mixture
    // mass never meets the threshold.
    let mut per_demand_expectation = Vec::with_capacity(n);
    let mut per_demand_sla_prob = Vec::with_capacity(n);
    for demand in instance.demands() {
        let mut mean_sojourn = 0.0f64;
        let mut lhs = 0.0f64;
        for (regime, &mu) in instance.regimes().iter().zip(&plan.service_rates) {
            let slack = mu - regime.arrival_rate;
            if slack > 0.0 {
                mean_sojourn += regime.mixture_weight / slack;
                lhs += regime.mixture_weight * (-slack * demand.slack()).exp();
            } else {
                mean_sojourn = f64::INFINITY;
                lhs += regime.mixture_weight;
            }
        }
        per_demand_expectation.push(demand.access_time + mean_sojourn);
        per_demand_sla_prob.push((1.0 - lhs).clamp(0.0, 1.0));

        let protected = plan.protected[instance.demand_index(&demand.id).expect("known id")];
        if protected {
            let alpha = demand.tolerance;
            let margin = alpha - lhs;
            if rel_violated(lhs, alpha, margin) {
                violations.push(Violation {
                    constraint: ConstraintId::Sla {
                        demand: demand.id.clone(),
                    },
                    left: lhs,
                    right: alpha,
                    slack: margin,
                });
            }
        }
    }

    // Coverage, cardinality or weighted.
    if params.weighted_coverage {
        let total: f64 = instance.demands().iter().map(|d| d.weight).sum();
        let covered: f64 = instance
            .demands()
            .iter()
            .enumerate()
            .filter(|(i, _)| plan.protected[*i])
            .map(|(_, d)| d.weight)
            .sum();
        let target = params.coverage * total;
        let margin = covered - target;
        if rel_violated(covered, target, margin) {
            violations.push(Violation {
                constraint: ConstraintId::Coverage,
                left: covered,
                right: target,
                slack: margin,
            });
        }
    } else {
        let covered = plan.protected_count() as f64;
        let target = params.coverage_count(n) as f64;
        if covered < target {
            violations.push(Violation {
                constraint: ConstraintId::Coverage,
                left: covered,
                right: target,
                slack: covered - target,
            });
        }
    }

    for (i, j) in instance.conflict_index_pairs() {
        if plan.protected[i] && plan.protected[j] {
            violations.push(Violation {
                constraint: ConstraintId::Conflict {
                    a: instance.demands()[i].id.clone(),
                    b: instance.demands()[j].id.clone(),
                },
                left: 2.0,
                right: 1.0,
                slack: -1.0,
            });
        }
    }

    let cvar = if all_stable {
        cvar_of_values(&per_demand_expectation, params.tail_fraction)?
    } else {
        f64::INFINITY
    };
    let gamma_bound = params.tail_threshold;
    let margin = gamma_bound - cvar;
    if rel_violated(cvar, gamma_bound, margin) {
        violations.push(Violation {
            constraint: ConstraintId::CVaR,
            left: cvar,
            right: gamma_bound,
            slack: margin,
        });
    }

    let kappa = params.congestion_weight;
    let capacity_cost: f64 = instance
        .regimes()
        .iter()
        .zip(&plan.service_rates)
        .map(|(regime, &mu)| regime.unit_cost * mu)
        .sum();
    let congestion_penalty: f64 = -kappa
        * instance
            .regimes()
            .iter()
            .zip(&plan.service_rates)
            .map(|(regime, &mu)| {
                let slack = mu - regime.arrival_rate;
                if slack > 0.0 {
                    slack.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum::<f64>();

    Ok(PerformanceReport {
        per_demand_expectation,
        per_demand_sla_prob,
        cvar,
        utilizations,
        capacity_cost,
        congestion_penalty,
        violations,
    })
}

/// True iff the plan satisfies every constraint family within the relative
/// tolerance; the violation list is empty exactly in that case.
pub fn check_feasibility(
    instance: &Instance,
    params: &DesignParams,
    plan: &ServicePlan,
) -> Result<(bool, Vec<Violation>)> {
    let report = evaluate_plan(instance, params, plan)?;
    Ok((report.violations.is_empty(), report.violations))
}
