//! Branch-and-bound on the protection vector with the convex continuous
//! relaxation of the compact model as bounding oracle; s stays jointly
//! convex in the SLA cone blocks when relaxed to [0,1].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cone::{
    build_compact_relaxation, build_subproblem, solve_subproblem_with, SolveOptions,
    SubproblemStatus,
};
use crate::error::{Error, Result};
use crate::model::{DesignParams, Instance, ServicePlan};

use super::{plan_from_solution, DEFAULT_GAP_TOL};

#[derive(Debug, Clone)]
pub struct CompactOptions {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub solve: SolveOptions,
}

impl Default for CompactOptions {
    fn default() -> Self {
        CompactOptions {
            gap_tol: DEFAULT_GAP_TOL,
            node_limit: 100_000,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompactOutcome {
    pub plan: ServicePlan,
    pub nodes: usize,
    /// Absolute bound gap at termination.
    pub gap: f64,
    pub converged: bool,
}

struct Node {
    bound: f64,
    id: usize,
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn compact_solve(
    instance: &Instance,
    params: &DesignParams,
    gap_tol: f64,
) -> Result<ServicePlan> {
    compact_solve_with(
        instance,
        params,
        &CompactOptions {
            gap_tol,
            ..Default::default()
        },
    )
    .map(|out| out.plan)
}

pub fn compact_solve_with(
    instance: &Instance,
    params: &DesignParams,
    options: &CompactOptions,
) -> Result<CompactOutcome> {
    if !(options.gap_tol > 0.0) {
        return Err(Error::domain("gap_tol", "must be > 0"));
    }
    params.validate_for(instance)?;
    let n = instance.num_demands();
    let protectable: Vec<bool> = instance.demands().iter().map(|d| d.protectable()).collect();

    let mut incumbent: Option<(f64, ServicePlan)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut nodes = 0usize;
    // smallest bound among nodes pruned by the incumbent; the global lower
    // bound is the min of this and the open-node bounds
    let mut pruned_floor = f64::INFINITY;

    let root: Vec<Option<bool>> = (0..n)
        .map(|a| if protectable[a] { None } else { Some(false) })
        .collect();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        fixed: root,
    });
    next_id += 1;

    while let Some(node) = heap.pop() {
        if nodes >= options.node_limit {
            let lb = node.bound.min(pruned_floor);
            let gap = match &incumbent {
                Some((obj, _)) => obj - lb,
                None => f64::INFINITY,
            };
            return match incumbent {
                Some((_, plan)) => Ok(CompactOutcome {
                    plan,
                    nodes,
                    gap,
                    converged: false,
                }),
                None => Err(Error::NodeLimit {
                    limit: options.node_limit,
                    gap,
                }),
            };
        }
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - options.gap_tol * (1.0 + inc.abs()) {
                pruned_floor = pruned_floor.min(node.bound);
                continue;
            }
        }
        nodes += 1;

        let bounds: Vec<(f64, f64)> = node
            .fixed
            .iter()
            .map(|f| match f {
                Some(true) => (1.0, 1.0),
                Some(false) => (0.0, 0.0),
                None => (0.0, 1.0),
            })
            .collect();
        let program = build_compact_relaxation(instance, params, &bounds)?;
        let solution = solve_subproblem_with(&program, &options.solve)?;
        let (theta_rel, s_rel) = match &solution.status {
            SubproblemStatus::Optimal => (solution.objective, solution.protection_values(&program)),
            SubproblemStatus::Infeasible(_) => continue,
            SubproblemStatus::NumericalFailure(message) => {
                return Err(Error::NumericalFailure {
                    message: format!("node relaxation: {message}"),
                });
            }
        };
        if let Some((inc, _)) = &incumbent {
            if theta_rel >= inc - options.gap_tol * (1.0 + inc.abs()) {
                pruned_floor = pruned_floor.min(theta_rel);
                continue;
            }
        }

        // most fractional free coordinate; ties by larger slack, then index
        let mut branch: Option<(usize, f64)> = None;
        for a in 0..n {
            if node.fixed[a].is_none() {
                let frac = 0.5 - (s_rel[a] - 0.5).abs();
                if frac > 1e-6 {
                    let better = match branch {
                        None => true,
                        Some((best_a, best_frac)) => {
                            frac > best_frac + 1e-12
                                || ((frac - best_frac).abs() <= 1e-12
                                    && instance.demands()[a].slack()
                                        > instance.demands()[best_a].slack())
                        }
                    };
                    if better {
                        branch = Some((a, frac));
                    }
                }
            }
        }

        match branch {
            None => {
                // integral relaxation: pin the rounded vector and resolve for
                // an exact incumbent objective
                let sbar: Vec<bool> = s_rel.iter().map(|&v| v >= 0.5).collect();
                let pinned = build_subproblem(instance, params, &sbar)?;
                let pinned_solution = solve_subproblem_with(&pinned, &options.solve)?;
                match &pinned_solution.status {
                    SubproblemStatus::Optimal => {
                        let theta = pinned_solution.objective;
                        if incumbent.as_ref().map_or(true, |(inc, _)| theta < *inc) {
                            incumbent =
                                Some((theta, plan_from_solution(&pinned, &pinned_solution, sbar)));
                        }
                    }
                    // borderline rounding: the relaxation value still bounds
                    // this leaf, nothing feasible was lost
                    SubproblemStatus::Infeasible(_) => {}
                    SubproblemStatus::NumericalFailure(message) => {
                        return Err(Error::NumericalFailure {
                            message: format!("pinned incumbent solve: {message}"),
                        });
                    }
                }
            }
            Some((a, _)) => {
                for v in [false, true] {
                    let mut fixed = node.fixed.clone();
                    fixed[a] = Some(v);
                    heap.push(Node {
                        bound: theta_rel,
                        id: next_id,
                        fixed,
                    });
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some((obj, plan)) => Ok(CompactOutcome {
            plan,
            nodes,
            gap: (obj - pruned_floor).max(0.0),
            converged: true,
        }),
        None => Err(Error::Infeasible {
            reason: "no integral point satisfies the compact model".to_string(),
        }),
    }
}
