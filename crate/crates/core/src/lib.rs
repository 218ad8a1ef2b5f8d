//! Design of multi-regime parallel-queue service systems.
//!
//! The library selects regime service rates and an SLA-protected demand
//! subset minimizing capacity cost plus a logarithmic congestion penalty,
//! subject to stability margins, chance-constrained response-time
//! guarantees, conflict-graph restrictions, coverage and CVaR tail-risk
//! control. Solution paths: Benders decomposition with analytic cuts, a
//! compact branch-and-bound over the convex relaxation, exhaustive
//! enumeration for small instances, and a polynomial procedure for the
//! conflict-free uniform-confidence case. A Monte Carlo simulator validates
//! the closed-form response model, and an ingestion layer builds instances
//! from incident logs.

pub mod cone;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod solvers;
pub mod perf;
pub mod poly;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    ConstraintId, Demand, DesignParams, Instance, PerformanceReport, Regime, ServicePlan,
    Violation,
};
