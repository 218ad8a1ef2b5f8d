//! Exact solution paths: Benders decomposition with analytic cuts, compact
//! branch-and-bound on the protection vector, and exhaustive enumeration as
//! a small-instance oracle.

mod benders;
mod compact;
mod cuts;
mod enumerate;
mod master;

pub use benders::{benders_solve, benders_solve_with, BendersOptions, BendersOutcome, BendersState, IterationRecord};
pub use compact::{compact_solve, compact_solve_with, CompactOptions, CompactOutcome};
pub use cuts::{feasibility_cut, optimality_cut, Cut, CutKind};
pub use enumerate::{enumerate_solve, ENUMERATION_GUARD};
pub use master::{master_solve, MasterOutcome};

use crate::cone::{ConicProgram, SubproblemSolution};
use crate::model::ServicePlan;

/// Assembles a plan from an optimal subproblem solution at a fixed
/// protection vector.
pub(crate) fn plan_from_solution(
    program: &ConicProgram,
    solution: &SubproblemSolution,
    protected: Vec<bool>,
) -> ServicePlan {
    ServicePlan::new(
        solution.service_rates(program),
        protected,
        solution.objective,
    )
}

/// Default relative optimality gap.
pub const DEFAULT_GAP_TOL: f64 = 1e-5;
/// Default Benders iteration cap.
pub const DEFAULT_MAX_ITER: usize = 500;
