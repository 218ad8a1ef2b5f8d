//! Polynomial-time exact procedure for the conflict-free uniform-confidence
//! case, plus the componentwise-dominance selection for heterogeneous
//! tolerances.
//!
//! With no conflicts and a common tolerance, the SLA left-hand side is
//! non-increasing in the slack, so protecting the largest-slack demands is
//! never more restrictive than any other selection of the same size; one
//! subproblem solve at that selection is exact.

use crate::cone::{build_subproblem, solve_subproblem_with, SolveOptions, SubproblemStatus};
use crate::error::{Error, Result};
use crate::model::{DesignParams, Instance, ServicePlan};

/// The sorted selection behind the procedure: a slack-ordered permutation
/// and the chosen prefix.
#[derive(Debug, Clone)]
pub struct SortedSelection {
    /// Demand indices in non-increasing slack order, ties by id ascending.
    pub permutation: Vec<usize>,
    /// Number of protected demands, ceil(beta |A|).
    pub count: usize,
    pub selected: Vec<String>,
}

/// Sorts demands by non-increasing slack (ties by id) and selects the top
/// ceil(beta |A|).
pub fn sorted_selection(instance: &Instance, params: &DesignParams) -> SortedSelection {
    let mut permutation: Vec<usize> = (0..instance.num_demands()).collect();
    permutation.sort_by(|&i, &j| {
        let di = &instance.demands()[i];
        let dj = &instance.demands()[j];
        dj.slack()
            .total_cmp(&di.slack())
            .then_with(|| di.id.cmp(&dj.id))
    });
    let count = params.coverage_count(instance.num_demands());
    let selected = permutation[..count]
        .iter()
        .map(|&i| instance.demands()[i].id.clone())
        .collect();
    SortedSelection {
        permutation,
        count,
        selected,
    }
}

pub fn solve_conflict_free_uniform(
    instance: &Instance,
    params: &DesignParams,
) -> Result<ServicePlan> {
    solve_conflict_free_uniform_with(instance, params, &SolveOptions::default())
}

pub fn solve_conflict_free_uniform_with(
    instance: &Instance,
    params: &DesignParams,
    solve: &SolveOptions,
) -> Result<ServicePlan> {
    if !instance.conflict_edges().is_empty() {
        return Err(Error::Precondition {
            message: format!(
                "polynomial procedure requires an empty conflict graph, got {} edges",
                instance.conflict_edges().len()
            ),
        });
    }
    let alpha0 = instance.demands()[0].tolerance;
    if instance
        .demands()
        .iter()
        .any(|d| (d.tolerance - alpha0).abs() > 1e-12)
    {
        return Err(Error::Precondition {
            message: "polynomial procedure requires a uniform confidence level".to_string(),
        });
    }
    if params.weighted_coverage {
        // the exchange argument is cardinality-based
        return Err(Error::Precondition {
            message: "polynomial procedure does not support weighted coverage".to_string(),
        });
    }
    params.validate_for(instance)?;

    let selection = sorted_selection(instance, params);
    let mut sbar = vec![false; instance.num_demands()];
    for &i in &selection.permutation[..selection.count] {
        sbar[i] = true;
    }

    let program = build_subproblem(instance, params, &sbar)?;
    let solution = solve_subproblem_with(&program, solve)?;
    match &solution.status {
        SubproblemStatus::Optimal => Ok(ServicePlan::new(
            solution.service_rates(&program),
            sbar,
            solution.objective,
        )),
        SubproblemStatus::Infeasible(reason) => Err(Error::Infeasible {
            reason: format!(
                "least-restrictive selection infeasible ({}); the instance has no feasible plan",
                reason.family
            ),
        }),
        SubproblemStatus::NumericalFailure(message) => Err(Error::NumericalFailure {
            message: message.clone(),
        }),
    }
}

/// Picks a k-subset whose (slack, tolerance) pairs dominate every remaining
/// demand componentwise, if one exists.
///
/// If any dominating subset exists, the top k under the order
/// (slack desc, tolerance desc, id asc) is one, since swapping equal pairs
/// preserves dominance.
pub fn dominance_select(instance: &Instance, count: usize) -> Option<Vec<String>> {
    let n = instance.num_demands();
    if count == 0 || count > n {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let di = &instance.demands()[i];
        let dj = &instance.demands()[j];
        dj.slack()
            .total_cmp(&di.slack())
            .then_with(|| dj.tolerance.total_cmp(&di.tolerance))
            .then_with(|| di.id.cmp(&dj.id))
    });
    let (chosen, rest) = order.split_at(count);
    let min_slack = chosen
        .iter()
        .map(|&i| instance.demands()[i].slack())
        .fold(f64::INFINITY, f64::min);
    let min_alpha = chosen
        .iter()
        .map(|&i| instance.demands()[i].tolerance)
        .fold(f64::INFINITY, f64::min);
    let dominated = rest.iter().all(|&i| {
        let d = &instance.demands()[i];
        d.slack() <= min_slack && d.tolerance <= min_alpha
    });
    if !dominated {
        return None;
    }
    let mut ids: Vec<String> = chosen
        .iter()
        .map(|&i| instance.demands()[i].id.clone())
        .collect();
    ids.sort();
    Some(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Demand, Regime};

    fn uniform_instance(slacks: &[f64]) -> Instance {
        let demands = slacks
            .iter()
            .enumerate()
            .map(|(a, &s)| Demand::new(format!("d{a}"), 1.0, 1.0 + s, 0.1, 1.0).unwrap())
            .collect();
        let regimes = vec![Regime::new(0, 0.5, 1.0, 1.0).unwrap()];
        Instance::new(demands, regimes, [], 1e-4).unwrap()
    }

    #[test]
    fn protects_largest_slacks() {
        let inst = uniform_instance(&[5.0, 3.0, 1.0]);
        let params = DesignParams::new(2.0 / 3.0, 0.0, 1e9, 0.0, false).unwrap();
        let plan = solve_conflict_free_uniform(&inst, &params).unwrap();
        assert_eq!(plan.protected, vec![true, true, false]);
    }

    #[test]
    fn equal_slacks_break_ties_by_id() {
        let inst = uniform_instance(&[2.0, 2.0, 2.0]);
        let params = DesignParams::new(1.0 / 3.0, 0.0, 1e9, 0.0, false).unwrap();
        let plan = solve_conflict_free_uniform(&inst, &params).unwrap();
        assert_eq!(plan.protected, vec![true, false, false]);
        // symmetry: any single choice has the same objective
        let other = {
            let sbar = vec![false, true, false];
            let program = crate::cone::build_subproblem(&inst, &params, &sbar).unwrap();
            crate::cone::solve_subproblem(&program).unwrap().objective
        };
        assert!((plan.objective_value - other).abs() < 1e-8 * (1.0 + other.abs()));
    }

    #[test]
    fn preconditions_are_enforced() {
        // conflicts present
        let demands = vec![
            Demand::new("a", 0.0, 5.0, 0.1, 1.0).unwrap(),
            Demand::new("b", 0.0, 5.0, 0.1, 1.0).unwrap(),
        ];
        let regimes = vec![Regime::new(0, 0.5, 1.0, 1.0).unwrap()];
        let inst = Instance::new(
            demands,
            regimes.clone(),
            [("a".to_string(), "b".to_string())],
            1e-4,
        )
        .unwrap();
        let params = DesignParams::new(0.5, 0.0, 1e9, 0.0, false).unwrap();
        assert!(matches!(
            solve_conflict_free_uniform(&inst, &params),
            Err(Error::Precondition { .. })
        ));

        // heterogeneous alpha
        let demands = vec![
            Demand::new("a", 0.0, 5.0, 0.1, 1.0).unwrap(),
            Demand::new("b", 0.0, 5.0, 0.2, 1.0).unwrap(),
        ];
        let inst = Instance::new(demands, regimes, [], 1e-4).unwrap();
        assert!(matches!(
            solve_conflict_free_uniform(&inst, &params),
            Err(Error::Precondition { .. })
        ));
    }

    fn pairs_instance(pairs: &[(f64, f64)]) -> Instance {
        let demands = pairs
            .iter()
            .enumerate()
            .map(|(a, &(slack, alpha))| {
                Demand::new(format!("d{a}"), 0.0, slack, alpha, 1.0).unwrap()
            })
            .collect();
        let regimes = vec![Regime::new(0, 0.5, 1.0, 1.0).unwrap()];
        Instance::new(demands, regimes, [], 1e-4).unwrap()
    }

    #[test]
    fn dominance_examples() {
        // pairwise dominance holds for the top two
        let inst = pairs_instance(&[(10.0, 0.1), (9.0, 0.09), (1.0, 0.01)]);
        let got = dominance_select(&inst, 2).unwrap();
        assert_eq!(got, vec!["d0".to_string(), "d1".to_string()]);

        // incomparable pair: no dominating singleton
        let inst = pairs_instance(&[(10.0, 0.01), (1.0, 0.1)]);
        assert!(dominance_select(&inst, 1).is_none());

        // uniform alpha reduces to top-k by slack
        let inst = pairs_instance(&[(3.0, 0.05), (7.0, 0.05), (5.0, 0.05)]);
        let got = dominance_select(&inst, 2).unwrap();
        assert_eq!(got, vec!["d1".to_string(), "d2".to_string()]);
    }

    #[test]
    fn sla_lhs_monotone_in_slack() {
        // the ordering lemma: larger slack, smaller left-hand side
        let regimes = vec![
            Regime::new(0, 0.6, 0.6, 1.0).unwrap(),
            Regime::new(1, 0.4, 0.4, 1.0).unwrap(),
        ];
        let mu = vec![0.9, 0.8];
        let mut prev = f64::INFINITY;
        for slack in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let d = Demand::new("d", 1.0, 1.0 + slack, 0.1, 1.0).unwrap();
            let lhs = crate::perf::sla_lhs(&d, &regimes, &mu).unwrap();
            assert!(lhs <= prev + 1e-15);
            prev = lhs;
        }
    }
}
