//! The Benders master problem: minimize theta over binary protection vectors
//! subject to the cut pool, coverage and conflict rows.
//!
//! Solved by an internal best-first branch-and-bound with LP-relaxation
//! bounding, then a lexicographic pass that returns the smallest optimal
//! protection vector for reproducible logs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};

use crate::error::{Error, Result};
use crate::model::{DesignParams, Instance};

use super::cuts::{Cut, CutKind};

#[derive(Debug, Clone, PartialEq)]
pub enum MasterOutcome {
    Optimal { sbar: Vec<bool>, theta: f64 },
    Infeasible,
}

/// Linear rows of the master, independent of branching state.
struct MasterRows<'a> {
    instance: &'a Instance,
    params: &'a DesignParams,
    cuts: &'a [Cut],
    theta_lb: f64,
    /// Demands that can never be protected (tolerance = 1).
    forced_zero: Vec<bool>,
    conflicts: Vec<(usize, usize)>,
}

impl<'a> MasterRows<'a> {
    fn new(
        instance: &'a Instance,
        params: &'a DesignParams,
        cuts: &'a [Cut],
        theta_lb: f64,
    ) -> Self {
        MasterRows {
            instance,
            params,
            cuts,
            theta_lb,
            forced_zero: instance.demands().iter().map(|d| !d.protectable()).collect(),
            conflicts: instance.conflict_index_pairs(),
        }
    }

    fn n(&self) -> usize {
        self.instance.num_demands()
    }

    /// theta at a full binary point: the tightest cut (or the floor).
    fn theta_at(&self, s: &[bool]) -> f64 {
        let mut theta = self.theta_lb;
        for cut in self.cuts {
            if cut.kind == CutKind::Optimality {
                theta = theta.max(cut.theta_bound_at(s));
            }
        }
        theta
    }

    /// Full feasibility check of a binary point against master rows.
    fn admits(&self, s: &[bool]) -> bool {
        for (a, &z) in self.forced_zero.iter().enumerate() {
            if z && s[a] {
                return false;
            }
        }
        if self.params.weighted_coverage {
            let total: f64 = self.instance.demands().iter().map(|d| d.weight).sum();
            let covered: f64 = self
                .instance
                .demands()
                .iter()
                .zip(s)
                .filter(|(_, &si)| si)
                .map(|(d, _)| d.weight)
                .sum();
            if covered < self.params.coverage * total - 1e-9 * total.max(1.0) {
                return false;
            }
        } else {
            let k = self.params.coverage_count(self.n());
            if s.iter().filter(|&&b| b).count() < k {
                return false;
            }
        }
        for &(i, j) in &self.conflicts {
            if s[i] && s[j] {
                return false;
            }
        }
        self.cuts
            .iter()
            .filter(|c| c.kind == CutKind::Feasibility)
            .all(|c| c.admits(s))
    }

    /// LP relaxation with branching fixes; variables are (theta, s_0..s_{n-1}).
    fn lp_bound(&self, fixed: &[Option<bool>]) -> Result<LpOutcome> {
        let n = self.n();
        let nv = n + 1;
        let mut eq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let mut le: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();

        // theta >= theta_lb
        le.push((vec![(0, -1.0)], -self.theta_lb));
        for cut in self.cuts {
            match cut.kind {
                CutKind::Optimality => {
                    // constant + q.s - theta <= 0
                    let mut row = vec![(0, -1.0)];
                    for (a, &q) in cut.coefficients.iter().enumerate() {
                        if q != 0.0 {
                            row.push((a + 1, q));
                        }
                    }
                    le.push((row, -cut.constant));
                }
                CutKind::Feasibility => {
                    let row: Vec<(usize, f64)> = cut
                        .coefficients
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0.0)
                        .map(|(a, &c)| (a + 1, c))
                        .collect();
                    le.push((row, cut.constant));
                }
            }
        }
        if self.params.weighted_coverage {
            let total: f64 = self.instance.demands().iter().map(|d| d.weight).sum();
            let row: Vec<(usize, f64)> = self
                .instance
                .demands()
                .iter()
                .enumerate()
                .map(|(a, d)| (a + 1, -d.weight))
                .collect();
            le.push((row, -self.params.coverage * total));
        } else {
            let k = self.params.coverage_count(n) as f64;
            let row: Vec<(usize, f64)> = (0..n).map(|a| (a + 1, -1.0)).collect();
            le.push((row, -k));
        }
        for &(i, j) in &self.conflicts {
            le.push((vec![(i + 1, 1.0), (j + 1, 1.0)], 1.0));
        }
        for a in 0..n {
            let forced = if self.forced_zero[a] { Some(false) } else { fixed[a] };
            match forced {
                Some(v) => eq.push((vec![(a + 1, 1.0)], if v { 1.0 } else { 0.0 })),
                None => {
                    le.push((vec![(a + 1, -1.0)], 0.0));
                    le.push((vec![(a + 1, 1.0)], 1.0));
                }
            }
        }

        let mut q = vec![0.0; nv];
        q[0] = 1.0;
        lp_solve(nv, &eq, &le, &q)
    }
}

enum LpOutcome {
    Optimal { x: Vec<f64>, obj: f64 },
    Infeasible,
}

fn lp_solve(
    nv: usize,
    eq: &[(Vec<(usize, f64)>, f64)],
    le: &[(Vec<(usize, f64)>, f64)],
    q: &[f64],
) -> Result<LpOutcome> {
    let m = eq.len() + le.len();
    let mut trips = Vec::new();
    let mut b = vec![0.0; m];
    for (i, (row, rhs)) in eq.iter().chain(le.iter()).enumerate() {
        for &(j, v) in row {
            trips.push((i, j, v));
        }
        b[i] = *rhs;
    }
    let a = crate::cone::solve_csc_from_triplets(m, nv, trips);
    let p = CscMatrix::<f64>::zeros((nv, nv));
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if !eq.is_empty() {
        cones.push(ZeroConeT(eq.len()));
    }
    if !le.is_empty() {
        cones.push(NonnegativeConeT(le.len()));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .map_err(|e| Error::NumericalFailure {
            message: format!("bad LP settings: {e}"),
        })?;
    let mut solver =
        DefaultSolver::new(&p, q, &a, &b, &cones, settings).map_err(|e| Error::NumericalFailure {
            message: format!("LP rejected: {e:?}"),
        })?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(LpOutcome::Optimal {
            x: solver.solution.x.clone(),
            obj: solver.solution.obj_val,
        }),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Ok(LpOutcome::Infeasible)
        }
        other => Err(Error::NumericalFailure {
            message: format!("master LP status {other:?}"),
        }),
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
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
        // BinaryHeap is a max-heap; order reversed for best-first on bound,
        // ties broken by older node id.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Minimizes theta subject to the cut pool, coverage and conflicts over
/// binary s; ties in the optimum broken by the lexicographically smallest
/// protection vector.
pub fn master_solve(
    instance: &Instance,
    params: &DesignParams,
    cuts: &[Cut],
    theta_lb: f64,
) -> Result<MasterOutcome> {
    let rows = MasterRows::new(instance, params, cuts, theta_lb);
    let n = rows.n();

    let mut incumbent: Option<(f64, Vec<bool>)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;

    match rows.lp_bound(&vec![None; n])? {
        LpOutcome::Infeasible => return Ok(MasterOutcome::Infeasible),
        LpOutcome::Optimal { x, obj } => {
            try_rounding(&rows, &x, &mut incumbent);
            heap.push(Node {
                bound: obj,
                id: next_id,
                fixed: vec![None; n],
            });
            next_id += 1;
        }
    }

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - 1e-9 * (1.0 + inc.abs()) {
                continue;
            }
        }
        let LpOutcome::Optimal { x, obj } = rows.lp_bound(&node.fixed)? else {
            continue;
        };
        if let Some((inc, _)) = &incumbent {
            if obj >= inc - 1e-9 * (1.0 + inc.abs()) {
                continue;
            }
        }
        try_rounding(&rows, &x, &mut incumbent);

        // branch on the most fractional free coordinate
        let mut branch: Option<(usize, f64)> = None;
        for a in 0..n {
            if node.fixed[a].is_none() && !rows.forced_zero[a] {
                let frac = (x[a + 1] - x[a + 1].round()).abs();
                if frac > 1e-6 && branch.map_or(true, |(_, bf)| frac > bf) {
                    branch = Some((a, frac));
                }
            }
        }
        let Some((a, _)) = branch else {
            // integral relaxation: the rounding pass above recorded it
            continue;
        };
        for v in [false, true] {
            let mut fixed = node.fixed.clone();
            fixed[a] = Some(v);
            heap.push(Node {
                bound: obj,
                id: next_id,
                fixed,
            });
            next_id += 1;
        }
    }

    let Some((theta_star, _)) = incumbent else {
        return Ok(MasterOutcome::Infeasible);
    };

    let sbar = lex_smallest(&rows, theta_star)?
        .expect("lexicographic pass must recover at least the incumbent");
    let theta = rows.theta_at(&sbar);
    Ok(MasterOutcome::Optimal { sbar, theta })
}

/// Rounds an LP point to binary, repairs coverage greedily and records the
/// candidate if feasible.
fn try_rounding(rows: &MasterRows, x: &[f64], incumbent: &mut Option<(f64, Vec<bool>)>) {
    let n = rows.n();
    let mut s: Vec<bool> = (0..n)
        .map(|a| !rows.forced_zero[a] && x[a + 1] >= 0.5)
        .collect();
    if !rows.admits(&s) {
        // raise the highest-valued free coordinates until coverage holds
        let mut order: Vec<usize> = (0..n).filter(|&a| !s[a] && !rows.forced_zero[a]).collect();
        order.sort_by(|&i, &j| x[j + 1].total_cmp(&x[i + 1]).then(i.cmp(&j)));
        for a in order {
            if rows.admits(&s) {
                break;
            }
            let conflicted = rows.conflicts.iter().any(|&(i, j)| {
                (i == a && s[j]) || (j == a && s[i])
            });
            if !conflicted {
                s[a] = true;
            }
        }
        if !rows.admits(&s) {
            return;
        }
    }
    let theta = rows.theta_at(&s);
    match incumbent {
        Some((inc, _)) if theta >= *inc - 1e-12 => {}
        _ => *incumbent = Some((theta, s)),
    }
}

/// Depth-first pass preferring s_a = 0, returning the lexicographically
/// smallest binary point whose theta is within a whisker of the optimum.
fn lex_smallest(rows: &MasterRows, theta_star: f64) -> Result<Option<Vec<bool>>> {
    let n = rows.n();
    let tie_tol = 1e-7 * (1.0 + theta_star.abs());
    let mut fixed: Vec<Option<bool>> = vec![None; n];
    lex_dfs(rows, theta_star, tie_tol, &mut fixed, 0)
}

fn lex_dfs(
    rows: &MasterRows,
    theta_star: f64,
    tie_tol: f64,
    fixed: &mut Vec<Option<bool>>,
    depth: usize,
) -> Result<Option<Vec<bool>>> {
    let n = rows.n();
    if depth == n {
        let s: Vec<bool> = fixed.iter().map(|f| f.unwrap_or(false)).collect();
        if rows.admits(&s) && rows.theta_at(&s) <= theta_star + tie_tol {
            return Ok(Some(s));
        }
        return Ok(None);
    }
    let choices: &[bool] = if rows.forced_zero[depth] {
        &[false]
    } else {
        &[false, true]
    };
    for &v in choices {
        fixed[depth] = Some(v);
        // cheap bound: coverage still reachable and cuts not already above par
        if cheap_bound(rows, fixed) <= theta_star + tie_tol {
            if let LpOutcome::Optimal { obj, .. } = rows.lp_bound(fixed)? {
                if obj <= theta_star + tie_tol {
                    if let Some(s) = lex_dfs(rows, theta_star, tie_tol, fixed, depth + 1)? {
                        return Ok(Some(s));
                    }
                }
            }
        }
    }
    fixed[depth] = None;
    Ok(None)
}

/// Combinatorial lower bound on theta under the current fixes: each cut is
/// completed with its cheapest coverage-respecting free coefficients.
/// Ignores conflicts and feasibility cuts, so it never overestimates.
fn cheap_bound(rows: &MasterRows, fixed: &[Option<bool>]) -> f64 {
    let n = rows.n();
    let fixed_true: Vec<usize> = (0..n).filter(|&a| fixed[a] == Some(true)).collect();
    let free: Vec<usize> = (0..n)
        .filter(|&a| fixed[a].is_none() && !rows.forced_zero[a])
        .collect();
    let need = if rows.params.weighted_coverage {
        // weighted coverage has no fixed cardinality; only negatives help
        0
    } else {
        let k = rows.params.coverage_count(n);
        if fixed_true.len() + free.len() < k {
            return f64::INFINITY;
        }
        k.saturating_sub(fixed_true.len())
    };
    let mut theta = rows.theta_lb;
    for cut in rows.cuts.iter().filter(|c| c.kind == CutKind::Optimality) {
        let mut v: f64 =
            cut.constant + fixed_true.iter().map(|&a| cut.coefficients[a]).sum::<f64>();
        let mut qs: Vec<f64> = free.iter().map(|&a| cut.coefficients[a]).collect();
        qs.sort_by(f64::total_cmp);
        // cheapest completion: the `need` smallest coefficients, plus any
        // remaining negative ones
        v += qs.iter().take(need).sum::<f64>();
        v += qs.iter().skip(need).filter(|&&q| q < 0.0).sum::<f64>();
        theta = theta.max(v);
    }
    theta
}
