mod common;

use common::random_small_env;
use epibwk::environments::{paper_c1, uniform_lambda};
use epibwk::model::{ActionId, ContextId, EnvFile, EnvironmentModel};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[test]
fn uniform_sampling_frequencies_within_three_sigma() {
    let k = 10;
    let env = paper_c1(k).unwrap();
    let n = 100_000;
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut counts = vec![0usize; env.num_contexts()];
    for _ in 0..n {
        counts[env.sample_context(1, &mut rng).unwrap().0] += 1;
    }
    assert_eq!(counts[0], 0);
    let p = 1.0 / (k + 1) as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    for c in 1..env.num_contexts() {
        let freq = counts[c] as f64 / n as f64;
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "context {c}: frequency {freq} vs {p}"
        );
    }
}

#[test]
fn sampling_matches_pmf_in_total_variation() {
    let mut rng = ChaCha12Rng::seed_from_u64(102);
    for trial in 0..4 {
        let env = random_small_env(&mut rng, 4, 40, 3, 2);
        let n = 100_000;
        let h = 1 + trial % env.horizon();
        let mut counts = vec![0usize; env.num_contexts()];
        for _ in 0..n {
            counts[env.sample_context(h, &mut rng).unwrap().0] += 1;
        }
        let tv: f64 = (0..env.num_contexts())
            .map(|c| {
                let freq = counts[c] as f64 / n as f64;
                (freq - env.lambda(h, ContextId(c))).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "total variation {tv} too large");
    }
}

#[test]
fn conversion_mean_matches_bernoulli_rate() {
    let env = EnvironmentModel::from_file(EnvFile {
        h: 1,
        l: 1,
        r_max: 1.0,
        contexts: vec![vec![0.0], vec![1.0]],
        actions: vec![0.0, 1.0],
        rho: vec![vec![0.0, 0.0], vec![0.0, 0.5]],
        reward: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
        consumption: vec![vec![0, 1], vec![0, 1]],
        lambda: uniform_lambda(1, 1),
        rho_step: None,
    })
    .unwrap();
    let n = 100_000;
    let mut rng = ChaCha12Rng::seed_from_u64(103);
    let mut conversions = 0usize;
    for _ in 0..n {
        let out = env.step(1, 1, ContextId(1), ActionId(1), &mut rng).unwrap();
        conversions += out.conversion as usize;
    }
    let mean = conversions as f64 / n as f64;
    let tol = 3.0 * 0.5 / (n as f64).sqrt();
    assert!((mean - 0.5).abs() <= tol, "mean {mean}");
}

#[test]
fn budget_never_goes_negative_along_trajectories() {
    let mut rng = ChaCha12Rng::seed_from_u64(104);
    for _ in 0..20 {
        let env = random_small_env(&mut rng, 4, 3, 3, 3);
        let mut b = env.max_budget().min(4);
        for h in 1..=env.horizon() {
            let theta = env.sample_context(h, &mut rng).unwrap();
            let feas = env.feasible_actions(b, theta).unwrap();
            // Worst case: always play the most expensive feasible action.
            let action = *feas
                .iter()
                .max_by_key(|&&a| env.consumption(theta, a))
                .unwrap();
            let out = env.step(h, b, theta, action, &mut rng).unwrap();
            assert!(out.consumed <= b);
            b -= out.consumed;
        }
    }
}
