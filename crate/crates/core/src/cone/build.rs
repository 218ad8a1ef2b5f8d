//! Builders for the continuous design program: the fixed-protection
//! subproblem and the box-relaxed compact model used by branch-and-bound.

use crate::error::{Error, Result};
use crate::model::{DesignParams, Instance};

use super::{
    AffExpr, ConeBlock, ConeFamily, ConicProgram, LinRow, RowFamily, RowSense, VarInfo, VarMap,
    VarRole,
};

/// Finite stand-in for an unbounded CVaR threshold; keeps the tail block in
/// the program so its shape is fixed across parameter sweeps.
pub const GAMMA_INF: f64 = 1e9;

/// Protection handling for the build: pinned to fixed values (Benders
/// subproblem) or box-relaxed with master rows included (compact model).
#[derive(Debug, Clone, PartialEq)]
pub enum SPolicy {
    /// s_a pinned by an equality row to the given 0/1 value.
    Pinned(Vec<f64>),
    /// lo_a <= s_a <= hi_a, with coverage and conflict rows included.
    /// Entries with lo == hi behave like pins.
    Boxed(Vec<(f64, f64)>),
}

impl SPolicy {
    fn len(&self) -> usize {
        match self {
            SPolicy::Pinned(v) => v.len(),
            SPolicy::Boxed(v) => v.len(),
        }
    }

    /// The fixed value of s_a if this coordinate is pinned.
    fn fixed_value(&self, a: usize) -> Option<f64> {
        match self {
            SPolicy::Pinned(v) => Some(v[a]),
            SPolicy::Boxed(v) => {
                let (lo, hi) = v[a];
                (lo == hi).then_some(lo)
            }
        }
    }

    fn with_master_rows(&self) -> bool {
        matches!(self, SPolicy::Boxed(_))
    }
}

/// Builds the continuous exponential-cone subproblem at a fixed protection
/// vector. Conflict and coverage rows are not included; the master owns them.
pub fn build_subproblem(
    instance: &Instance,
    params: &DesignParams,
    sbar: &[bool],
) -> Result<ConicProgram> {
    if sbar.len() != instance.num_demands() {
        return Err(Error::DimensionMismatch {
            what: "protection flags",
            expected: instance.num_demands(),
            got: sbar.len(),
        });
    }
    let pins = sbar.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    build(instance, params, SPolicy::Pinned(pins))
}

/// Builds the continuous relaxation of the compact model with s box-relaxed
/// (branch-fixed coordinates use lo == hi), including coverage and conflicts.
pub fn build_compact_relaxation(
    instance: &Instance,
    params: &DesignParams,
    bounds: &[(f64, f64)],
) -> Result<ConicProgram> {
    if bounds.len() != instance.num_demands() {
        return Err(Error::DimensionMismatch {
            what: "protection bounds",
            expected: instance.num_demands(),
            got: bounds.len(),
        });
    }
    build(instance, params, SPolicy::Boxed(bounds.to_vec()))
}

fn build(instance: &Instance, params: &DesignParams, policy: SPolicy) -> Result<ConicProgram> {
    let n = instance.num_demands();
    let nr = instance.num_regimes();
    debug_assert_eq!(policy.len(), n);
    let tail_div = params.tail_count(n)? as f64;
    let eps = instance.stability_margin();
    let kappa = params.congestion_weight;

    let mut vars: Vec<VarInfo> = Vec::with_capacity(4 * nr + 2 * n + 2 * n * nr + 1 + n);
    let push = |role: VarRole, name: String, vars: &mut Vec<VarInfo>| -> usize {
        vars.push(VarInfo { role, name });
        vars.len() - 1
    };

    let mut map = VarMap::default();
    for r in 0..nr {
        map.mu.push(push(VarRole::ServiceRate(r), format!("mu[{r}]"), &mut vars));
    }
    for r in 0..nr {
        map.nu.push(push(VarRole::LogSlack(r), format!("nu[{r}]"), &mut vars));
    }
    for r in 0..nr {
        map.tau.push(push(VarRole::TailTau(r), format!("tau[{r}]"), &mut vars));
    }
    for r in 0..nr {
        map.ell.push(push(VarRole::TailEll(r), format!("ell[{r}]"), &mut vars));
    }
    map.eta = push(VarRole::TailEta, "eta".to_string(), &mut vars);
    for a in 0..n {
        map.tail_value.push(push(VarRole::TailValue(a), format!("r[{a}]"), &mut vars));
    }
    for a in 0..n {
        map.tail_excess.push(push(VarRole::TailExcess(a), format!("U[{a}]"), &mut vars));
    }
    for a in 0..n {
        let mut row = Vec::with_capacity(nr);
        for r in 0..nr {
            row.push(push(VarRole::SlaZeta(a, r), format!("zeta[{a},{r}]"), &mut vars));
        }
        map.zeta.push(row);
    }
    for a in 0..n {
        let mut row = Vec::with_capacity(nr);
        for r in 0..nr {
            row.push(push(VarRole::SlaExponent(a, r), format!("u[{a},{r}]"), &mut vars));
        }
        map.u.push(row);
    }
    for a in 0..n {
        map.s.push(push(VarRole::Protection(a), format!("s[{a}]"), &mut vars));
    }

    let mut objective = vec![0.0; vars.len()];
    for (r, regime) in instance.regimes().iter().enumerate() {
        objective[map.mu[r]] = regime.unit_cost;
        objective[map.nu[r]] = -kappa;
    }

    let mut rows: Vec<LinRow> = Vec::new();
    let mut cones: Vec<ConeBlock> = Vec::new();

    // Stability: mu_r - Lambda_r >= eps.
    for (r, regime) in instance.regimes().iter().enumerate() {
        rows.push(LinRow {
            family: RowFamily::Stability,
            label: format!("stability[{r}]"),
            sense: RowSense::Le,
            expr: AffExpr::default()
                .term(map.mu[r], -1.0)
                .offset(regime.arrival_rate + eps),
        });
    }

    // SLA activation: sum_r pi_r zeta_ar + (1 - alpha_a) s_a - 1 <= 0.
    let mut sla_row_of = Vec::with_capacity(n);
    for (a, demand) in instance.demands().iter().enumerate() {
        let mut expr = AffExpr::constant(-1.0).term(map.s[a], 1.0 - demand.tolerance);
        for (r, regime) in instance.regimes().iter().enumerate() {
            expr = expr.term(map.zeta[a][r], regime.mixture_weight);
        }
        sla_row_of.push(rows.len());
        rows.push(LinRow {
            family: RowFamily::SlaActivation,
            label: format!("sla[{a}]"),
            sense: RowSense::Le,
            expr,
        });
    }

    // Exponent links: u_ar + Delta_a (mu_r - Lambda_r) = 0.
    for (a, demand) in instance.demands().iter().enumerate() {
        let slack = demand.slack();
        for (r, regime) in instance.regimes().iter().enumerate() {
            rows.push(LinRow {
                family: RowFamily::SlaLink,
                label: format!("ulink[{a},{r}]"),
                sense: RowSense::Eq,
                expr: AffExpr::default()
                    .term(map.u[a][r], 1.0)
                    .term(map.mu[r], slack)
                    .offset(-slack * regime.arrival_rate),
            });
        }
    }

    // Protection pins / boxes.
    for a in 0..n {
        match &policy {
            SPolicy::Pinned(values) => {
                rows.push(LinRow {
                    family: RowFamily::ProtectionPin,
                    label: format!("pin[{a}]"),
                    sense: RowSense::Eq,
                    expr: AffExpr::var(map.s[a]).offset(-values[a]),
                });
            }
            SPolicy::Boxed(bounds) => {
                let (lo, hi) = bounds[a];
                if lo == hi {
                    rows.push(LinRow {
                        family: RowFamily::ProtectionPin,
                        label: format!("pin[{a}]"),
                        sense: RowSense::Eq,
                        expr: AffExpr::var(map.s[a]).offset(-lo),
                    });
                } else {
                    rows.push(LinRow {
                        family: RowFamily::ProtectionBound,
                        label: format!("slo[{a}]"),
                        sense: RowSense::Le,
                        expr: AffExpr::default().term(map.s[a], -1.0).offset(lo),
                    });
                    rows.push(LinRow {
                        family: RowFamily::ProtectionBound,
                        label: format!("shi[{a}]"),
                        sense: RowSense::Le,
                        expr: AffExpr::var(map.s[a]).offset(-hi),
                    });
                }
            }
        }
    }

    // SLA chance cones (zeta_ar, s_a, u_ar) in K_exp. At a fixed s_a = 0 the
    // block degenerates to its boundary ray; zeta_ar >= 0 is the only
    // non-redundant remnant (u_ar <= 0 follows from stability).
    let mut sla_cone_of = vec![vec![None; nr]; n];
    for a in 0..n {
        let lowered = policy.fixed_value(a) == Some(0.0);
        for r in 0..nr {
            if lowered {
                rows.push(LinRow {
                    family: RowFamily::SlaBoundary,
                    label: format!("zeta_ray[{a},{r}]"),
                    sense: RowSense::Le,
                    expr: AffExpr::default().term(map.zeta[a][r], -1.0),
                });
            } else {
                sla_cone_of[a][r] = Some(cones.len());
                cones.push(ConeBlock {
                    family: ConeFamily::SlaChance,
                    label: format!("sla_cone[{a},{r}]"),
                    triple: [
                        AffExpr::var(map.zeta[a][r]),
                        AffExpr::var(map.s[a]),
                        AffExpr::var(map.u[a][r]),
                    ],
                });
            }
        }
    }

    // Coverage and conflicts, relaxation mode only.
    if policy.with_master_rows() {
        let mut expr;
        if params.weighted_coverage {
            let total: f64 = instance.demands().iter().map(|d| d.weight).sum();
            expr = AffExpr::constant(params.coverage * total);
            for (a, demand) in instance.demands().iter().enumerate() {
                expr = expr.term(map.s[a], -demand.weight);
            }
        } else {
            expr = AffExpr::constant(params.coverage_count(n) as f64);
            for a in 0..n {
                expr = expr.term(map.s[a], -1.0);
            }
        }
        rows.push(LinRow {
            family: RowFamily::Coverage,
            label: "coverage".to_string(),
            sense: RowSense::Le,
            expr,
        });
        for (i, j) in instance.conflict_index_pairs() {
            rows.push(LinRow {
                family: RowFamily::Conflict,
                label: format!("conflict[{i},{j}]"),
                sense: RowSense::Le,
                expr: AffExpr::default()
                    .term(map.s[i], 1.0)
                    .term(map.s[j], 1.0)
                    .offset(-1.0),
            });
        }
    }

    // Tail block (Lemma-2 CVaR reformulation), always retained.
    for (a, demand) in instance.demands().iter().enumerate() {
        let mut expr = AffExpr::constant(demand.access_time).term(map.tail_value[a], -1.0);
        for (r, regime) in instance.regimes().iter().enumerate() {
            expr = expr.term(map.tau[r], regime.mixture_weight);
        }
        rows.push(LinRow {
            family: RowFamily::TailValue,
            label: format!("rlink[{a}]"),
            sense: RowSense::Le,
            expr,
        });
    }
    for a in 0..n {
        rows.push(LinRow {
            family: RowFamily::TailExcess,
            label: format!("excess[{a}]"),
            sense: RowSense::Le,
            expr: AffExpr::var(map.tail_value[a])
                .term(map.eta, -1.0)
                .term(map.tail_excess[a], -1.0),
        });
    }
    {
        // Scaled by 1/max(1, Gamma) so the near-infinite threshold encoding
        // does not degrade the problem conditioning.
        let scale = params.tail_threshold.max(1.0);
        let mut expr = AffExpr::default()
            .term(map.eta, 1.0 / scale)
            .offset(-params.tail_threshold / scale);
        for a in 0..n {
            expr = expr.term(map.tail_excess[a], 1.0 / (tail_div * scale));
        }
        rows.push(LinRow {
            family: RowFamily::TailBudget,
            label: "cvar".to_string(),
            sense: RowSense::Le,
            expr,
        });
    }
    for r in 0..nr {
        rows.push(LinRow {
            family: RowFamily::TailLogLink,
            label: format!("loglink[{r}]"),
            sense: RowSense::Le,
            expr: AffExpr::default()
                .term(map.nu[r], -1.0)
                .term(map.ell[r], -1.0),
        });
    }
    for r in 0..nr {
        cones.push(ConeBlock {
            family: ConeFamily::TailLog,
            label: format!("tau_cone[{r}]"),
            triple: [
                AffExpr::var(map.tau[r]),
                AffExpr::constant(1.0),
                AffExpr::var(map.ell[r]),
            ],
        });
    }
    for (r, regime) in instance.regimes().iter().enumerate() {
        cones.push(ConeBlock {
            family: ConeFamily::CongestionLog,
            label: format!("slack_cone[{r}]"),
            triple: [
                AffExpr::var(map.mu[r]).offset(-regime.arrival_rate),
                AffExpr::constant(1.0),
                AffExpr::var(map.nu[r]),
            ],
        });
    }

    // Nonnegativity of eta, U_a, r_a; nu, ell are logs and stay free.
    rows.push(LinRow {
        family: RowFamily::VarBound,
        label: "eta_nonneg".to_string(),
        sense: RowSense::Le,
        expr: AffExpr::default().term(map.eta, -1.0),
    });
    for a in 0..n {
        rows.push(LinRow {
            family: RowFamily::VarBound,
            label: format!("U_nonneg[{a}]"),
            sense: RowSense::Le,
            expr: AffExpr::default().term(map.tail_excess[a], -1.0),
        });
        rows.push(LinRow {
            family: RowFamily::VarBound,
            label: format!("r_nonneg[{a}]"),
            sense: RowSense::Le,
            expr: AffExpr::default().term(map.tail_value[a], -1.0),
        });
    }

    let program = ConicProgram {
        vars,
        objective,
        rows,
        cones,
        map,
        num_demands: n,
        num_regimes: nr,
        policy,
        mixture_weights: instance.mixture_weights(),
        sla_row_of,
        sla_cone_of,
    };
    program.validate()?;
    Ok(program)
}
