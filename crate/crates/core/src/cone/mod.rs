//! Exponential-cone program intermediate representation, cone membership
//! tests, the model builders and the interior-point solve with certified
//! KKT residuals.
//!
//! The cone convention throughout this module is
//! `K_exp = closure{(x,y,z): x >= y e^{z/y}, y > 0}` with dual
//! `K_exp* = {(u,v,w): e u >= -w e^{v/w}, w < 0} u {(u,v,0): u,v >= 0}`.

mod build;
mod kkt;
mod solve;

pub use build::{build_compact_relaxation, build_subproblem, SPolicy, GAMMA_INF};
pub use kkt::{kkt_residuals, KktResiduals};
pub use solve::{
    solve_subproblem, solve_subproblem_with, InfeasibilityReason, SolveOptions, SubproblemSolution,
    SubproblemStatus,
};
pub(crate) use solve::csc_from_triplets as solve_csc_from_triplets;

use crate::error::{Error, Result};

/// Absolute tolerance for cone membership tests.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// Membership in the exponential cone: `x >= y e^{z/y}` with `y > 0`, plus
/// the boundary ray `{(x, 0, z): z <= 0 <= x}`.
pub fn exp_cone_contains(x: f64, y: f64, z: f64) -> bool {
    exp_cone_margin(x, y, z) >= -MEMBERSHIP_TOL * x.abs().max(y.abs()).max(1.0)
}

/// Signed slack of the defining inequality; nonnegative inside the cone.
/// Points with a second coordinate below the scaled boundary tolerance
/// report how far below zero it sits rather than a hard -inf, so noise-level
/// deviations stay comparable against residual thresholds.
pub fn exp_cone_margin(x: f64, y: f64, z: f64) -> f64 {
    let tol = MEMBERSHIP_TOL * x.abs().max(z.abs()).max(1.0);
    if y > tol {
        let e = z / y;
        if e > 700.0 {
            return f64::NEG_INFINITY;
        }
        x - y * e.exp()
    } else if y >= -tol {
        // boundary ray: z <= 0 <= x
        x.min(-z)
    } else {
        y
    }
}

/// Membership in the dual exponential cone: `e u >= -w e^{v/w}` with `w < 0`,
/// plus `{(u, v, 0): u, v >= 0}`.
pub fn dual_cone_contains(u: f64, v: f64, w: f64) -> bool {
    dual_cone_margin(u, v, w) >= -MEMBERSHIP_TOL * u.abs().max(w.abs()).max(1.0)
}

/// Signed slack of the dual cone inequality; nonnegative inside the cone.
/// Mirrors `exp_cone_margin`'s graded treatment of the w ~ 0 boundary.
pub fn dual_cone_margin(u: f64, v: f64, w: f64) -> f64 {
    let tol = MEMBERSHIP_TOL * u.abs().max(v.abs()).max(1.0);
    if w < -tol {
        let e = v / w;
        if e > 700.0 {
            return f64::NEG_INFINITY;
        }
        std::f64::consts::E * u + w * e.exp()
    } else if w <= tol {
        u.min(v)
    } else {
        -w
    }
}

/// Role of a catalog variable in the design model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// Service rate mu_r.
    ServiceRate(usize),
    /// Congestion log bound nu_r <= ln(mu_r - Lambda_r).
    LogSlack(usize),
    /// Inverse-slack bound tau_r >= 1/(mu_r - Lambda_r).
    TailTau(usize),
    /// Log link ell_r <= ln(tau_r).
    TailEll(usize),
    /// CVaR anchor eta.
    TailEta,
    /// Expected-response upper bound r_a.
    TailValue(usize),
    /// CVaR excess U_a.
    TailExcess(usize),
    /// SLA chance auxiliary zeta_{a,r}.
    SlaZeta(usize, usize),
    /// SLA exponent u_{a,r} = -(mu_r - Lambda_r) Delta_a.
    SlaExponent(usize, usize),
    /// Protection coordinate s_a (pinned or box-relaxed).
    Protection(usize),
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub role: VarRole,
    pub name: String,
}

/// Affine expression `sum coeff * var + constant`.
#[derive(Debug, Clone, Default)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn var(id: usize) -> Self {
        AffExpr {
            terms: vec![(id, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        AffExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(mut self, id: usize, coeff: f64) -> Self {
        self.terms.push((id, coeff));
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(id, c)| c * x[id]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    /// expr <= 0
    Le,
    /// expr = 0
    Eq,
}

/// Constraint family, used for dual lookup and infeasibility attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFamily {
    Stability,
    /// The SLA activation rows sum_r pi_r zeta_ar <= 1 + (alpha_a - 1) s_a.
    SlaActivation,
    /// Equality u_ar = -(mu_r - Lambda_r) Delta_a.
    SlaLink,
    /// zeta_ar >= 0 for blocks lowered at fixed s_a = 0.
    SlaBoundary,
    /// Equality s_a = sbar_a.
    ProtectionPin,
    /// Box rows 0 <= s_a <= 1 in the relaxation.
    ProtectionBound,
    Coverage,
    Conflict,
    /// r_a >= t_a + sum_r pi_r tau_r.
    TailValue,
    /// U_a >= r_a - eta.
    TailExcess,
    /// eta + (1/D) sum U_a <= Gamma.
    TailBudget,
    /// nu_r + ell_r >= 0.
    TailLogLink,
    /// Simple nonnegativity rows.
    VarBound,
}

impl RowFamily {
    pub fn group_name(self) -> &'static str {
        match self {
            RowFamily::Stability => "stability",
            RowFamily::SlaActivation | RowFamily::SlaLink | RowFamily::SlaBoundary => "sla",
            RowFamily::ProtectionPin | RowFamily::ProtectionBound => "protection",
            RowFamily::Coverage => "coverage",
            RowFamily::Conflict => "conflict",
            RowFamily::TailValue
            | RowFamily::TailExcess
            | RowFamily::TailBudget
            | RowFamily::TailLogLink => "tail",
            RowFamily::VarBound => "bounds",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinRow {
    pub family: RowFamily,
    pub label: String,
    pub sense: RowSense,
    pub expr: AffExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeFamily {
    /// (zeta_ar, s_a, u_ar) in K_exp.
    SlaChance,
    /// (mu_r - Lambda_r, 1, nu_r) in K_exp.
    CongestionLog,
    /// (tau_r, 1, ell_r) in K_exp.
    TailLog,
}

impl ConeFamily {
    pub fn group_name(self) -> &'static str {
        match self {
            ConeFamily::SlaChance => "sla",
            ConeFamily::CongestionLog => "congestion",
            ConeFamily::TailLog => "tail",
        }
    }
}

/// One exponential-cone block; the triple is ordered (x, y, z) with
/// membership `x >= y e^{z/y}`.
#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub family: ConeFamily,
    pub label: String,
    pub triple: [AffExpr; 3],
}

/// Index map from model coordinates to catalog variable ids.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    pub mu: Vec<usize>,
    pub nu: Vec<usize>,
    pub tau: Vec<usize>,
    pub ell: Vec<usize>,
    pub eta: usize,
    pub tail_value: Vec<usize>,
    pub tail_excess: Vec<usize>,
    /// zeta[a][r]
    pub zeta: Vec<Vec<usize>>,
    /// u[a][r]
    pub u: Vec<Vec<usize>>,
    pub s: Vec<usize>,
}

/// A built exponential-cone program with its variable catalog, linear rows,
/// cone blocks and linear objective.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub vars: Vec<VarInfo>,
    pub objective: Vec<f64>,
    pub rows: Vec<LinRow>,
    pub cones: Vec<ConeBlock>,
    pub map: VarMap,
    pub num_demands: usize,
    pub num_regimes: usize,
    pub policy: SPolicy,
    /// pi_r per regime, kept for dual reconstruction of lowered blocks.
    pub mixture_weights: Vec<f64>,
    /// Row index of the SLA activation row per demand.
    pub sla_row_of: Vec<usize>,
    /// Cone block index per (demand, regime); None when lowered at s_a = 0.
    pub sla_cone_of: Vec<Vec<Option<usize>>>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Validates structural invariants of the catalog and rows.
    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for row in &self.rows {
            for &(id, _) in &row.expr.terms {
                if id >= n {
                    return Err(Error::invalid("program", format!("row {} references var {id}", row.label)));
                }
            }
        }
        for block in &self.cones {
            for expr in &block.triple {
                for &(id, _) in &expr.terms {
                    if id >= n {
                        return Err(Error::invalid(
                            "program",
                            format!("cone {} references var {id}", block.label),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Plain-text interchange dump: objective, rows and cone blocks, suitable
    /// for cross-checking against an external conic solver.
    pub fn dump_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "# exponential-cone program ({} vars, {} rows, {} cones)",
            self.vars.len(), self.rows.len(), self.cones.len());
        let fmt_expr = |expr: &AffExpr| -> String {
            let mut s = String::new();
            for (i, &(id, c)) in expr.terms.iter().enumerate() {
                if i > 0 {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{c}*{}", self.vars[id].name);
            }
            if expr.constant != 0.0 || expr.terms.is_empty() {
                if !expr.terms.is_empty() {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{}", expr.constant);
            }
            s
        };
        let mut obj = String::from("minimize: ");
        let mut first = true;
        for (id, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                if !first {
                    obj.push_str(" + ");
                }
                let _ = write!(obj, "{c}*{}", self.vars[id].name);
                first = false;
            }
        }
        let _ = writeln!(out, "{obj}");
        for v in &self.vars {
            let _ = writeln!(out, "var {}", v.name);
        }
        for row in &self.rows {
            let op = match row.sense {
                RowSense::Le => "<=",
                RowSense::Eq => "=",
            };
            let _ = writeln!(out, "row {}: {} {op} 0", row.label, fmt_expr(&row.expr));
        }
        for block in &self.cones {
            let _ = writeln!(
                out,
                "cone {} (K_exp): ({}; {}; {})",
                block.label,
                fmt_expr(&block.triple[0]),
                fmt_expr(&block.triple[1]),
                fmt_expr(&block.triple[2]),
            );
        }
        out
    }
}
