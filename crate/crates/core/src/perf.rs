//! Closed-form performance mathematics of the shifted-hyperexponential
//! response model: CDF, expectation, SLA left-hand side, the single-regime
//! rate bound and CVaR of a value list.

use crate::error::{Error, Result};
use crate::model::{Demand, Regime};

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

/// P(R_a <= t) for the shifted hyperexponential response time:
/// 0 below the access time, 1 - sum_r pi_r e^{-(mu_r - Lambda_r)(t - t_a)} above.
pub fn response_cdf(demand: &Demand, regimes: &[Regime], service_rates: &[f64], t: f64) -> Result<f64> {
    check_stable(regimes, service_rates)?;
    if !t.is_finite() {
        return Err(Error::domain("t", format!("non-finite evaluation point {t}")));
    }
    if t <= demand.access_time {
        return Ok(0.0);
    }
    let shifted = t - demand.access_time;
    let tail: f64 = regimes
        .iter()
        .zip(service_rates)
        .map(|(r, &mu)| r.mixture_weight * (-(mu - r.arrival_rate) * shifted).exp())
        .sum();
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// E[R_a] = t_a + sum_r pi_r / (mu_r - Lambda_r).
pub fn expected_response(demand: &Demand, regimes: &[Regime], service_rates: &[f64]) -> Result<f64> {
    check_stable(regimes, service_rates)?;
    let sojourn: f64 = regimes
        .iter()
        .zip(service_rates)
        .map(|(r, &mu)| r.mixture_weight / (mu - r.arrival_rate))
        .sum();
    Ok(demand.access_time + sojourn)
}

/// SLA left-hand side sum_r pi_r e^{-(mu_r - Lambda_r) Delta_a}; the chance
/// constraint P(R_a <= t*_a) >= 1 - alpha_a holds iff this is <= alpha_a.
/// Equals 1 - response_cdf(t*_a) exactly.
pub fn sla_lhs(demand: &Demand, regimes: &[Regime], service_rates: &[f64]) -> Result<f64> {
    check_stable(regimes, service_rates)?;
    let slack = demand.slack();
    Ok(regimes
        .iter()
        .zip(service_rates)
        .map(|(r, &mu)| r.mixture_weight * (-(mu - r.arrival_rate) * slack).exp())
        .sum())
}

/// Minimum feasible single-regime service rate
/// (max{eps, -ln(alpha)/Delta} - eps) * s + Lambda + eps.
pub fn single_regime_min_rate(lambda: f64, alpha: f64, slack: f64, eps: f64, protected: bool) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain("eps", format!("stability margin {eps} must be > 0")));
    }
    if !protected {
        return Ok(lambda + eps);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha", format!("{alpha} outside (0,1)")));
    }
    if !(slack > 0.0) {
        return Err(Error::domain("slack", format!("Delta = {slack} must be > 0 when protected")));
    }
    let required = (-alpha.ln() / slack).max(eps);
    Ok(required - eps + lambda + eps)
}

/// Mean of the largest floor((1-gamma) n) values.
pub fn cvar_of_values(values: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty { what: "cvar values" });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain("gamma", format!("{gamma} outside [0,1)")));
    }
    let n = values.len();
    let d = ((1.0 - gamma) * n as f64 + 1e-9).floor() as usize;
    if d == 0 {
        return Err(Error::DegenerateTail { gamma, n });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-comparable value in cvar"));
    Ok(sorted[..d].iter().sum::<f64>() / d as f64)
}
