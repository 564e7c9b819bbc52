mod common;

use common::{enumerate_policies_opt, expectimax_opt, fluid_primal_enumeration, random_small_env};
use epibwk::exact_dp::{fluid_ub, opt_value, rollout_policy, solve_bellman};
use epibwk::model::{ContextId, EnvFile, EnvironmentModel};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn hand_instance() -> EnvironmentModel {
    EnvironmentModel::from_file(EnvFile {
        h: 2,
        l: 1,
        r_max: 1.0,
        contexts: vec![vec![0.0], vec![1.0]],
        actions: vec![0.0, 1.0],
        rho: vec![vec![0.0, 0.0], vec![0.0, 0.5]],
        reward: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
        consumption: vec![vec![0, 1], vec![0, 1]],
        lambda: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        rho_step: None,
    })
    .unwrap()
}

#[test]
fn oracle_cross_check_policy_enumeration_vs_expectimax() {
    // The two independent oracles must agree with each other before either
    // is trusted against the solver.
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    for _ in 0..25 {
        let env = random_small_env(&mut rng, 2, 1, 1, 2);
        for budget in 0..=env.max_budget().min(3) {
            let by_tree = expectimax_opt(&env, budget);
            let by_policies = enumerate_policies_opt(&env, budget, 1 << 20);
            assert!(
                (by_tree - by_policies).abs() < 1e-9,
                "oracles disagree: {by_tree} vs {by_policies}"
            );
        }
    }
}

#[test]
fn solver_matches_both_oracles_on_tiny_instances() {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    for _ in 0..25 {
        let env = random_small_env(&mut rng, 2, 2, 2, 2);
        let table = solve_bellman(&env);
        for budget in 0..=env.max_budget().min(3) {
            let solved = opt_value(&table, budget).unwrap();
            let by_tree = expectimax_opt(&env, budget);
            assert!(
                (solved - by_tree).abs() < 1e-9,
                "solver {solved} vs expectimax {by_tree}"
            );
        }
    }
}

#[test]
fn value_table_bounds_and_monotonicity() {
    let mut rng = ChaCha12Rng::seed_from_u64(43);
    for _ in 0..30 {
        let env = random_small_env(&mut rng, 3, 3, 3, 2);
        let table = solve_bellman(&env);
        let r_max = env.r_max();
        let l = env.max_consumption();
        for h in 1..=env.horizon() {
            let steps_left = (env.horizon() - h + 1) as f64;
            for b in 0..=env.max_budget() {
                // State values never exceed the budget/steps cap.
                for c in 0..env.num_contexts() {
                    let v = table.v(h, b, ContextId(c));
                    assert!(v <= (b as f64).min(steps_left) * r_max + 1e-9);
                    assert!(v >= -1e-12);
                }
                // State and averaged values are monotone in the budget;
                // averaged increments are bounded.
                if b > 0 {
                    for c in 0..env.num_contexts() {
                        assert!(
                            table.v(h, b, ContextId(c)) + 1e-12
                                >= table.v(h, b - 1, ContextId(c)),
                            "v not monotone"
                        );
                    }
                }
                for d in 1..=l.min(b) {
                    let gap = table.u(h, b) - table.u(h, b - d);
                    assert!(gap >= -1e-12, "u not monotone");
                    assert!(gap <= 2.0 * r_max * l as f64 + 1e-9, "increment too large");
                }
                // Values across contexts stay within the swap bound.
                for c in 0..env.num_contexts() {
                    for c2 in 0..env.num_contexts() {
                        let diff = (table.v(h, b, ContextId(c)) - table.v(h, b, ContextId(c2)))
                            .abs();
                        assert!(diff <= (2.0 * l as f64 + 1.0) * r_max + 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn dual_value_matches_primal_vertex_enumeration() {
    let mut rng = ChaCha12Rng::seed_from_u64(44);
    let mut checked = 0;
    for _ in 0..40 {
        let env = random_small_env(&mut rng, 3, 2, 2, 2);
        // Keep the enumeration tractable.
        if env.horizon() * env.num_contexts() > 9 {
            continue;
        }
        for budget in 1..=env.max_budget().min(3) {
            let dual = fluid_ub(&env, budget, 1e-10).unwrap();
            let primal = fluid_primal_enumeration(&env, budget);
            assert!(
                (dual - primal).abs() < 1e-6,
                "dual {dual} vs primal {primal}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 20, "too few instances exercised");
}

#[test]
fn fluid_bound_dominates_the_optimum() {
    let mut rng = ChaCha12Rng::seed_from_u64(45);
    for _ in 0..50 {
        let env = random_small_env(&mut rng, 3, 3, 3, 2);
        let table = solve_bellman(&env);
        for budget in 0..=env.max_budget().min(4) {
            let ub = fluid_ub(&env, budget, 1e-9).unwrap();
            let opt = opt_value(&table, budget).unwrap();
            assert!(ub >= opt - 1e-8, "ub {ub} below opt {opt}");
        }
    }
}

#[test]
fn rollout_mean_converges_to_opt() {
    let env = hand_instance();
    let table = solve_bellman(&env);
    let opt = opt_value(&table, 1).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(46);
    let n = 100_000;
    let mut total = 0.0;
    let mut total_sq = 0.0;
    for _ in 0..n {
        let r = rollout_policy(&env, &table, 1, &mut rng).unwrap();
        total += r;
        total_sq += r * r;
    }
    let mean = total / n as f64;
    let var = (total_sq / n as f64 - mean * mean).max(0.0);
    let se = (var / n as f64).sqrt();
    assert!(
        (mean - opt).abs() <= 3.0 * se + 1e-9,
        "rollout mean {mean} vs opt {opt} (se {se})"
    );
}

#[test]
fn deterministic_env_rollout_equals_opt_exactly() {
    let mut file = hand_instance().to_file();
    file.rho[1][1] = 1.0;
    let env = EnvironmentModel::from_file(file).unwrap();
    let table = solve_bellman(&env);
    let opt = opt_value(&table, 2).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(47);
    for _ in 0..20 {
        let r = rollout_policy(&env, &table, 2, &mut rng).unwrap();
        assert_eq!(r, opt);
    }
    let zero = rollout_policy(&env, &table, 0, &mut rng).unwrap();
    assert_eq!(zero, 0.0);
}

#[test]
fn step_dependent_conversion_is_solved_per_step() {
    // Two steps, win probability much higher at the second step; the solver
    // must see the step dependence, the expectimax oracle confirms.
    let env = EnvironmentModel::from_file(EnvFile {
        h: 2,
        l: 1,
        r_max: 1.0,
        contexts: vec![vec![0.0], vec![1.0]],
        actions: vec![0.0, 1.0],
        rho: vec![vec![0.0, 0.0], vec![0.0, 0.1]],
        reward: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
        consumption: vec![vec![0, 1], vec![0, 1]],
        lambda: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        rho_step: Some(vec![
            vec![vec![0.0, 0.0], vec![0.0, 0.1]],
            vec![vec![0.0, 0.0], vec![0.0, 0.9]],
        ]),
    })
    .unwrap();
    let table = solve_bellman(&env);
    let solved = opt_value(&table, 1).unwrap();
    let by_tree = expectimax_opt(&env, 1);
    assert!((solved - by_tree).abs() < 1e-12);
    // Playing only at step 2 would give 0.9; the optimum also tries step 1.
    assert!(solved > 0.9);
}
