//! Monte Carlo validation of the analytic response model: response times are
//! sampled from the routed parallel-queue mixture and compared against the
//! closed-form CDF, expectations and plan-level SLA/CVaR claims.
//!
//! Sampling uses explicitly seeded per-demand substreams, so results are
//! deterministic and independent of evaluation order.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Demand, DesignParams, Instance, Regime, ServicePlan};
use crate::perf::{cvar_of_values, expected_response, response_cdf, sla_lhs};

fn check_stable(regimes: &[Regime], service_rates: &[f64]) -> Result<()> {
    if regimes.len() != service_rates.len() {
        return Err(Error::DimensionMismatch {
            what: "service rates",
            expected: regimes.len(),
            got: service_rates.len(),
        });
    }
    for (r, &mu) in regimes.iter().zip(service_rates) {
        if !(mu > r.arrival_rate) {
            return Err(Error::UnstableRegime {
                regime: r.index,
                mu,
                lambda: r.arrival_rate,
            });
        }
    }
    Ok(())
}

/// One end-to-end response draw: a regime sampled from the mixture weights,
/// then the access time plus an exponential sojourn at rate mu_r - Lambda_r.
pub fn sample_response(
    demand: &Demand,
    regimes: &[Regime],
    service_rates: &[f64],
    rng: &mut impl Rng,
) -> Result<f64> {
    check_stable(regimes, service_rates)?;
    Ok(sample_response_unchecked(demand, regimes, service_rates, rng))
}

fn sample_response_unchecked(
    demand: &Demand,
    regimes: &[Regime],
    service_rates: &[f64],
    rng: &mut impl Rng,
) -> f64 {
    let pick: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = regimes.len() - 1;
    for (r, regime) in regimes.iter().enumerate() {
        acc += regime.mixture_weight;
        if pick < acc {
            chosen = r;
            break;
        }
    }
    let rate = service_rates[chosen] - regimes[chosen].arrival_rate;
    let u: f64 = rng.random();
    // inverse-CDF exponential; 1-u avoids ln(0)
    demand.access_time + (-(1.0 - u).ln()) / rate
}

/// Batch simulation result for one instance/plan pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub samples: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// Empirical CDF per demand evaluated on the grid.
    pub empirical_cdf: Vec<Vec<f64>>,
    /// Analytic CDF per demand on the same grid.
    pub analytic_cdf: Vec<Vec<f64>>,
    pub empirical_mean: Vec<f64>,
    /// Fraction of draws meeting the demand's threshold.
    pub sla_hit_rate: Vec<f64>,
    /// Max |empirical - analytic| over the grid, per demand.
    pub max_cdf_deviation: Vec<f64>,
}

/// Runs n draws per demand with a dedicated substream per demand, derived
/// from (seed, demand index).
pub fn simulate(
    instance: &Instance,
    plan: &ServicePlan,
    n: usize,
    seed: u64,
    grid: &[f64],
) -> Result<SimulationResult> {
    if n == 0 {
        return Err(Error::domain("n", "need at least one sample"));
    }
    check_stable(instance.regimes(), &plan.service_rates)?;
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(f64::total_cmp);

    let mut empirical_cdf = Vec::with_capacity(instance.num_demands());
    let mut analytic_cdf = Vec::with_capacity(instance.num_demands());
    let mut empirical_mean = Vec::with_capacity(instance.num_demands());
    let mut sla_hit_rate = Vec::with_capacity(instance.num_demands());
    let mut max_cdf_deviation = Vec::with_capacity(instance.num_demands());

    for (a, demand) in instance.demands().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(a as u64);
        let mut counts = vec![0usize; sorted_grid.len()];
        let mut hits = 0usize;
        let mut sum = 0.0f64;
        for _ in 0..n {
            let t = sample_response_unchecked(demand, instance.regimes(), &plan.service_rates, &mut rng);
            sum += t;
            if t <= demand.threshold {
                hits += 1;
            }
            // first grid point >= t gains a count; prefix sums give the CDF
            let idx = sorted_grid.partition_point(|&g| g < t);
            if idx < counts.len() {
                counts[idx] += 1;
            }
        }
        let mut cum = 0usize;
        let empirical: Vec<f64> = counts
            .iter()
            .map(|&c| {
                cum += c;
                cum as f64 / n as f64
            })
            .collect();
        let analytic: Vec<f64> = sorted_grid
            .iter()
            .map(|&t| response_cdf(demand, instance.regimes(), &plan.service_rates, t))
            .collect::<Result<_>>()?;
        let deviation = empirical
            .iter()
            .zip(&analytic)
            .map(|(e, a)| (e - a).abs())
            .fold(0.0f64, f64::max);

        empirical_cdf.push(empirical);
        analytic_cdf.push(analytic);
        empirical_mean.push(sum / n as f64);
        sla_hit_rate.push(hits as f64 / n as f64);
        max_cdf_deviation.push(deviation);
    }

    Ok(SimulationResult {
        samples: n,
        seed,
        grid: sorted_grid,
        empirical_cdf,
        analytic_cdf,
        empirical_mean,
        sla_hit_rate,
        max_cdf_deviation,
    })
}

/// CSV export: demand_id, grid_t, empirical_cdf, analytic_cdf.
pub fn write_cdf_csv<W: Write>(
    instance: &Instance,
    result: &SimulationResult,
    mut w: W,
) -> Result<()> {
    writeln!(w, "demand_id,grid_t,empirical_cdf,analytic_cdf")?;
    for (a, demand) in instance.demands().iter().enumerate() {
        for (g, &t) in result.grid.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                demand.id, t, result.empirical_cdf[a][g], result.analytic_cdf[a][g]
            )?;
        }
    }
    Ok(())
}

/// One named discrepancy found by plan verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationFailure {
    pub check: String,
    pub demand: Option<String>,
    pub observed: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub failures: Vec<VerificationFailure>,
    /// CVaR of the analytic expectations, checked against Gamma.
    pub cvar_of_expectations: f64,
    pub samples: usize,
}

/// Default slack allowed between empirical rates and their analytic targets,
/// sized for n = 10^6 draws.
pub const DEFAULT_EMPIRICAL_TOL: f64 = 0.005;

/// Checks empirical SLA hit rates of protected demands against 1 - alpha and
/// the CVaR of analytic expectations against Gamma.
pub fn verify_plan(
    instance: &Instance,
    params: &DesignParams,
    plan: &ServicePlan,
    n: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let grid: Vec<f64> = instance.demands().iter().map(|d| d.threshold).collect();
    let sim = simulate(instance, plan, n, seed, &grid)?;
    let mut failures = Vec::new();

    for (a, demand) in instance.demands().iter().enumerate() {
        if !plan.protected[a] {
            continue;
        }
        let required = 1.0 - demand.tolerance - DEFAULT_EMPIRICAL_TOL;
        if sim.sla_hit_rate[a] < required {
            failures.push(VerificationFailure {
                check: "sla_hit_rate".to_string(),
                demand: Some(demand.id.clone()),
                observed: sim.sla_hit_rate[a],
                required,
            });
        }
    }

    let expectations: Vec<f64> = instance
        .demands()
        .iter()
        .map(|d| expected_response(d, instance.regimes(), &plan.service_rates))
        .collect::<Result<_>>()?;
    let cvar = cvar_of_values(&expectations, params.tail_fraction)?;
    let bound = params.tail_threshold * (1.0 + 1e-7) + 1e-9;
    if cvar > bound {
        failures.push(VerificationFailure {
            check: "cvar".to_string(),
            demand: None,
            observed: cvar,
            required: params.tail_threshold,
        });
    }

    Ok(VerificationReport {
        passed: failures.is_empty(),
        failures,
        cvar_of_expectations: cvar,
        samples: n,
    })
}

/// Discrete-event cross-check: runs each regime as an event-driven M/M/1
/// queue (Poisson arrivals at Lambda_r, exponential service at mu_r),
/// discards a warm-up prefix and mixes per-regime sojourns by the routing
/// weights. Validates the stationary-mixture shortcut the main sampler
/// takes.
pub fn simulate_discrete_event(
    demand: &Demand,
    regimes: &[Regime],
    service_rates: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    const WARMUP: usize = 10_000;
    check_stable(regimes, service_rates)?;

    // per-regime sojourn pools
    let mut pools: Vec<Vec<f64>> = Vec::with_capacity(regimes.len());
    for (r, regime) in regimes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x0DE5 + r as u64);
        let lambda = regime.arrival_rate;
        let mu = service_rates[r];
        let need = n + WARMUP;
        let mut pool = Vec::with_capacity(need);
        let mut clock = 0.0f64; // arrival clock
        let mut server_free_at = 0.0f64;
        if lambda <= 0.0 {
            // no arrivals route here; weight must be zero as well
            pools.push(pool);
            continue;
        }
        for i in 0..need {
            let u: f64 = rng.random();
            clock += -(1.0 - u).ln() / lambda;
            let v: f64 = rng.random();
            let service = -(1.0 - v).ln() / mu;
            let start = clock.max(server_free_at);
            server_free_at = start + service;
            if i >= WARMUP {
                pool.push(server_free_at - clock);
            }
        }
        pools.push(pool);
    }

    // route n customers through the mixture
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xD15C);
    let mut cursors = vec![0usize; regimes.len()];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pick: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = regimes.len() - 1;
        for (r, regime) in regimes.iter().enumerate() {
            acc += regime.mixture_weight;
            if pick < acc {
                chosen = r;
                break;
            }
        }
        let pool = &pools[chosen];
        let sojourn = pool[cursors[chosen] % pool.len()];
        cursors[chosen] += 1;
        out.push(demand.access_time + sojourn);
    }
    Ok(out)
}

/// Analytic variance of the shifted hyperexponential:
/// sum pi_r 2/(mu_r-Lambda_r)^2 - (sum pi_r/(mu_r-Lambda_r))^2.
pub fn response_variance(regimes: &[Regime], service_rates: &[f64]) -> Result<f64> {
    check_stable(regimes, service_rates)?;
    let second: f64 = regimes
        .iter()
        .zip(service_rates)
        .map(|(r, &mu)| {
            let slack = mu - r.arrival_rate;
            r.mixture_weight * 2.0 / (slack * slack)
        })
        .sum();
    let mean: f64 = regimes
        .iter()
        .zip(service_rates)
        .map(|(r, &mu)| r.mixture_weight / (mu - r.arrival_rate))
        .sum();
    Ok(second - mean * mean)
}

/// Convenience wrapper returning the analytic SLA satisfaction probability.
pub fn analytic_sla_probability(
    demand: &Demand,
    regimes: &[Regime],
    service_rates: &[f64],
) -> Result<f64> {
    Ok(1.0 - sla_lhs(demand, regimes, service_rates)?)
}
