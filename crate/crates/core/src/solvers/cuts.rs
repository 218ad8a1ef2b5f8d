//! Benders cuts: optimality cuts from subproblem duals and combinatorial
//! feasibility cuts.

use crate::cone::{SubproblemSolution, SubproblemStatus};
use crate::error::{Error, Result};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Optimality,
    Feasibility,
}

/// A master-problem row generated from one subproblem solve.
///
/// Optimality: `theta >= constant + sum_a coefficients[a] * s_a`, the
/// supporting hyperplane `Theta(sbar) + q . (s - sbar)` rearranged.
/// Feasibility: `sum_{a in support} s_a <= constant`, excluding every
/// superset of the infeasible support.
#[derive(Debug, Clone)]
pub struct Cut {
    pub kind: CutKind,
    pub coefficients: Vec<f64>,
    pub constant: f64,
    pub source_iteration: usize,
}

impl Cut {
    /// Right-hand side the cut imposes on theta at a binary point
    /// (optimality cuts only).
    pub fn theta_bound_at(&self, s: &[bool]) -> f64 {
        debug_assert_eq!(self.kind, CutKind::Optimality);
        self.constant
            + self
                .coefficients
                .iter()
                .zip(s)
                .map(|(&q, &si)| if si { q } else { 0.0 })
                .sum::<f64>()
    }

    /// Whether a binary point satisfies a feasibility cut.
    pub fn admits(&self, s: &[bool]) -> bool {
        debug_assert_eq!(self.kind, CutKind::Feasibility);
        let lhs: f64 = self
            .coefficients
            .iter()
            .zip(s)
            .map(|(&c, &si)| if si { c } else { 0.0 })
            .sum();
        lhs <= self.constant + 1e-9
    }
}

/// Builds the optimality cut theta >= Theta(sbar) + sum_a q_a (s_a - sbar_a)
/// with q_a = (1 - alpha_a) f_a + sum_r h2_ar; conflict duals are zero by
/// construction since the master owns those rows.
pub fn optimality_cut(
    sbar: &[bool],
    solution: &SubproblemSolution,
    instance: &Instance,
) -> Result<Cut> {
    if !matches!(solution.status, SubproblemStatus::Optimal) {
        return Err(Error::Precondition {
            message: "optimality cut requires an optimal subproblem solution".to_string(),
        });
    }
    let n = instance.num_demands();
    let nr = instance.num_regimes();
    if solution.sla_duals.len() != n
        || solution.sla_cone_duals.len() != n
        || solution.sla_cone_duals.iter().any(|h| h.len() != nr)
    {
        return Err(Error::MissingDuals {
            what: "SLA row or cone dual triples",
        });
    }

    let mut coefficients = Vec::with_capacity(n);
    for (a, demand) in instance.demands().iter().enumerate() {
        let f = solution.sla_duals[a];
        let h2: f64 = solution.sla_cone_duals[a].iter().map(|h| h[1]).sum();
        coefficients.push((1.0 - demand.tolerance) * f + h2);
    }
    let anchored: f64 = coefficients
        .iter()
        .zip(sbar)
        .map(|(&q, &si)| if si { q } else { 0.0 })
        .sum();
    Ok(Cut {
        kind: CutKind::Optimality,
        coefficients,
        constant: solution.objective - anchored,
        source_iteration: 0,
    })
}

/// Excludes the infeasible support and all of its supersets:
/// sum_{a: sbar_a = 1} s_a <= |support| - 1. An empty support yields the
/// always-violated row 0 <= -1, making the master (and thus the whole
/// problem) infeasible.
pub fn feasibility_cut(sbar: &[bool]) -> Cut {
    let coefficients: Vec<f64> = sbar.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let support = coefficients.iter().filter(|&&c| c > 0.0).count();
    Cut {
        kind: CutKind::Feasibility,
        coefficients,
        constant: support as f64 - 1.0,
        source_iteration: 0,
    }
}
