//! Shared instance generators for the integration and acceptance suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use regime_design_core::model::{Demand, DesignParams, Instance, Regime};

pub struct FamilyOptions {
    pub max_demands: usize,
    pub max_regimes: usize,
    pub edge_density: f64,
    pub uniform_alpha: bool,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            max_demands: 12,
            max_regimes: 3,
            edge_density: 0.15,
            uniform_alpha: false,
        }
    }
}

/// Deterministic random instance family: demands with random access times,
/// slacks and tolerances, Lambda-proportional mixtures, random conflict
/// edges and random design knobs.
pub fn random_instance(seed: u64, options: &FamilyOptions) -> (Instance, DesignParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=options.max_demands);
    let nr = rng.random_range(1..=options.max_regimes);

    let lambdas: Vec<f64> = (0..nr).map(|_| rng.random_range(0.05..1.5)).collect();
    let total: f64 = lambdas.iter().sum();
    let regimes: Vec<Regime> = lambdas
        .iter()
        .enumerate()
        .map(|(r, &l)| Regime::new(r, l, l / total, rng.random_range(0.5..2.0)).unwrap())
        .collect();

    let shared_alpha = rng.random_range(0.02..0.5);
    let demands: Vec<Demand> = (0..n)
        .map(|a| {
            let access = rng.random_range(0.0..5.0);
            let slack = rng.random_range(1.0..40.0);
            let alpha = if options.uniform_alpha {
                shared_alpha
            } else {
                rng.random_range(0.02..0.5)
            };
            Demand::new(format!("d{a:02}"), access, access + slack, alpha, 1.0).unwrap()
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < options.edge_density {
                edges.push((format!("d{i:02}"), format!("d{j:02}")));
            }
        }
    }

    let beta = rng.random_range(0.2..0.8);
    // keep floor((1 - gamma) n) >= 1
    let gamma_cap = (1.0 - 1.05 / n as f64).clamp(0.0, 0.6);
    let gamma = if gamma_cap > 0.0 {
        rng.random_range(0.0..gamma_cap)
    } else {
        0.0
    };
    let kappa = if rng.random::<f64>() < 0.5 {
        0.0
    } else {
        rng.random_range(0.01..0.5)
    };
    let max_access = demands.iter().map(|d| d.access_time).fold(0.0f64, f64::max);
    let tail_threshold = if rng.random::<f64>() < 0.3 {
        max_access + rng.random_range(2.0..20.0)
    } else {
        1e9
    };

    let instance = Instance::new(demands, regimes, edges, 1e-4).unwrap();
    let params = DesignParams::new(beta, gamma, tail_threshold, kappa, false).unwrap();
    (instance, params)
}
