// scratch debug
use rand::Rng; use rand::SeedableRng; use rand_chacha::ChaCha8Rng;
use regime_design_core::cone::*;
use regime_design_core::model::*;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for draw in 0..50 {
        let lambda = rng.random_range(0.05..2.0);
        let kappa = rng.random_range(0.05..2.0);
        let cost = rng.random_range(0.5..2.0);
        let demands = vec![Demand::new("d0", 0.0, 10.0, 0.5, 1.0).unwrap()];
        let regimes = vec![Regime::new(0, lambda, 1.0, cost).unwrap()];
        let instance = Instance::new(demands, regimes, [], 1e-4).unwrap();
        let params = DesignParams::new(1.0, 0.0, GAMMA_INF, kappa, false).unwrap();
        let expect = lambda + kappa / cost;
        let program = build_subproblem(&instance, &params, &[false]).unwrap();
        let sol = solve_subproblem(&program).unwrap();
        let mu = sol.service_rates(&program)[0];
        let rel = (mu - expect).abs() / (1.0 + expect);
        if rel > 5e-7 {
            println!("draw {draw}: rel {rel:.2e} gap {:.2e} primal {:.2e} dual {:.2e} iters {} lam {lambda:.3} kap {kappa:.3} c {cost:.3}",
                sol.kkt.complementarity, sol.kkt.primal, sol.kkt.dual, sol.iterations);
        }
    }
}
