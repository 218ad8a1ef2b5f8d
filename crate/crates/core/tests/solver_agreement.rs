//! Cross-method agreement of the three exact solvers on a quick randomized
//! smoke suite, plus value-function monotonicity. The full-scale version of
//! these checks lives in the acceptance suite.

mod common;

use common::{random_instance, FamilyOptions};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use regime_design_core::cone::{build_subproblem, solve_subproblem};
use regime_design_core::eval::check_feasibility;
use regime_design_core::solvers::{benders_solve, compact_solve, enumerate_solve};

#[test]
fn three_solvers_agree_on_random_instances() {
    let options = FamilyOptions {
        max_demands: 9,
        ..Default::default()
    };
    let mut checked = 0;
    let mut infeasible = 0;
    for seed in 0..25u64 {
        let (instance, params) = random_instance(seed, &options);
        let enum_result = enumerate_solve(&instance, &params);
        let benders_result = benders_solve(&instance, &params, 1e-6, 400);
        let compact_result = compact_solve(&instance, &params, 1e-6);
        match enum_result {
            Ok(enum_plan) => {
                let benders = benders_result.unwrap_or_else(|e| panic!("seed {seed}: benders {e}"));
                let compact = compact_result.unwrap_or_else(|e| panic!("seed {seed}: compact {e}"));
                let obj = enum_plan.objective_value;
                let scale = 1.0 + obj.abs();
                assert!(
                    (benders.plan.objective_value - obj).abs() / scale < 1e-5,
                    "seed {seed}: benders {} vs enum {obj}",
                    benders.plan.objective_value
                );
                assert!(
                    (compact.objective_value - obj).abs() / scale < 1e-5,
                    "seed {seed}: compact {} vs enum {obj}",
                    compact.objective_value
                );
                for (name, plan) in [
                    ("enum", &enum_plan),
                    ("benders", &benders.plan),
                    ("compact", &compact),
                ] {
                    let (ok, v) = check_feasibility(&instance, &params, plan).unwrap();
                    assert!(ok, "seed {seed}: {name} infeasible plan: {v:?}");
                }
                checked += 1;
            }
            Err(_) => {
                assert!(
                    benders_result.is_err(),
                    "seed {seed}: benders found a plan where enumeration proved infeasibility"
                );
                assert!(
                    compact_result.is_err(),
                    "seed {seed}: compact found a plan where enumeration proved infeasibility"
                );
                infeasible += 1;
            }
        }
    }
    println!("agreement on {checked} solvable + {infeasible} infeasible instances");
    assert!(checked >= 10, "too few solvable instances in the family");
}

#[test]
fn value_function_is_componentwise_monotone() {
    let options = FamilyOptions {
        max_demands: 8,
        max_regimes: 2,
        edge_density: 0.0,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut pairs = 0;
    while pairs < 30 {
        let (instance, params) = random_instance(1000 + pairs as u64, &options);
        let n = instance.num_demands();
        let small: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
        let mut large = small.clone();
        for b in large.iter_mut() {
            if !*b && rng.random::<f64>() < 0.5 {
                *b = true;
            }
        }
        let p_small = build_subproblem(&instance, &params, &small).unwrap();
        let p_large = build_subproblem(&instance, &params, &large).unwrap();
        let s_small = solve_subproblem(&p_small).unwrap();
        let s_large = solve_subproblem(&p_large).unwrap();
        if !(s_small.status.is_optimal() && s_large.status.is_optimal()) {
            continue;
        }
        assert!(
            s_small.objective <= s_large.objective + 1e-6 * (1.0 + s_large.objective.abs()),
            "Theta({small:?}) = {} > Theta({large:?}) = {}",
            s_small.objective,
            s_large.objective
        );
        pairs += 1;
    }
}
