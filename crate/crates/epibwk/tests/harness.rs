mod common;

use common::random_small_env;
use epibwk::environments::{uniform_lambda, DemandLink, PricingSpec};
use epibwk::exact_dp::{fluid_ub, opt_value, solve_bellman};
use epibwk::harness::{
    emit_outputs, fluid_policy_run, run_experiment, AgentCfg, BudgetsCfg, EnvBuild, EnvRef,
    ExperimentConfig,
};
use epibwk::model::BudgetSchedule;
use epibwk::oracles::{OracleConfig, OracleKind};
use epibwk::schedule::ScheduleKind;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn pricing_cfg(episodes: usize, reps: usize, agents: Vec<AgentCfg>) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvRef::Build(EnvBuild::Pricing {
            spec: PricingSpec {
                horizon: 4,
                prices: vec![1.0, 2.0, 3.0],
                contexts: vec![vec![0.2], vec![0.6], vec![1.0]],
                mu_bar: vec![1.0],
                u0: 0.35,
                demand: DemandLink::Logistic,
                lambda: uniform_lambda(4, 3),
            },
        }),
        episodes,
        budgets: BudgetsCfg::Constant(2),
        reps,
        seed: 77,
        agents,
    }
}

#[test]
fn oracle_dp_agent_tracks_the_optimum() {
    let cfg = pricing_cfg(60, 50, vec![AgentCfg::OracleDp { name: None }]);
    let series = run_experiment(&cfg).unwrap();
    let agent = &series.agents[0];
    // Mean per-episode regret of the exact policy is statistical noise.
    let t = cfg.episodes as f64;
    let mean_final = agent.mean_cum_regret[cfg.episodes - 1] / t;
    let se_final = agent.se_cum_regret[cfg.episodes - 1] / t;
    assert!(
        mean_final.abs() <= 3.0 * se_final + 1e-9,
        "oracle-dp drifts from the optimum: {mean_final} vs {se_final}"
    );
}

#[test]
fn single_step_greedy_and_mimic_coincide_with_known_conversion() {
    // With one step per episode the continuation value vanishes, so the
    // optimistic rule and the myopic rule agree action by action.
    let mut cfg = pricing_cfg(
        30,
        4,
        vec![
            AgentCfg::GreedyUcb {
                oracle: OracleConfig::of_kind(OracleKind::Exact),
                delta: 0.1,
                name: None,
            },
            AgentCfg::MimicOptDp {
                oracle: OracleConfig::of_kind(OracleKind::Exact),
                delta: 0.1,
                alpha: 0.5,
                m: 0,
                schedule: ScheduleKind::Default,
                name: None,
            },
        ],
    );
    if let EnvRef::Build(EnvBuild::Pricing { spec }) = &mut cfg.env {
        spec.horizon = 1;
        spec.lambda = uniform_lambda(1, 3);
    }
    cfg.budgets = BudgetsCfg::Constant(1);
    let series = run_experiment(&cfg).unwrap();
    let greedy = &series.agents[0];
    let mimic = &series.agents[1];
    for rep in 0..cfg.reps {
        let a = greedy.runs[rep].as_ref().unwrap();
        let b = mimic.runs[rep].as_ref().unwrap();
        for (ea, eb) in a.episodes.iter().zip(&b.episodes) {
            assert_eq!(ea.reward, eb.reward, "rep {rep} episode {}", ea.t);
        }
    }
}

#[test]
fn fluid_policy_with_slack_budget_plays_myopically_optimal() {
    // Budget equal to L*H never binds: the dual price is zero and the
    // fluid rule with the true conversion model is myopic-optimal, which
    // matches the exact policy when consumption cannot run out.
    let cfg = pricing_cfg(
        40,
        8,
        vec![
            AgentCfg::FluidPolicy {
                oracle: OracleConfig::of_kind(OracleKind::Exact),
                delta: 0.1,
                name: None,
            },
            AgentCfg::OracleDp { name: None },
        ],
    );
    let mut cfg = cfg;
    cfg.budgets = BudgetsCfg::Constant(4); // L * H = 1 * 4
    let series = run_experiment(&cfg).unwrap();
    let fluid = &series.agents[0];
    let oracle = &series.agents[1];
    for rep in 0..cfg.reps {
        let a = fluid.runs[rep].as_ref().unwrap();
        let b = oracle.runs[rep].as_ref().unwrap();
        assert_eq!(a.total_reward(), b.total_reward(), "rep {rep}");
    }
}

#[test]
fn fluid_policy_reward_respects_the_bound_chain() {
    // Across random small instances: mean realized reward <= opt <= UB,
    // the first inequality up to Monte Carlo noise.
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for trial in 0..5 {
        let env = random_small_env(&mut rng, 3, 3, 3, 2);
        let table = solve_bellman(&env);
        let budget = env.max_budget().min(3).max(1);
        let opt = opt_value(&table, budget).unwrap();
        let ub = fluid_ub(&env, budget, 1e-9).unwrap();
        assert!(ub >= opt - 1e-8);

        let oracle = OracleConfig::of_kind(OracleKind::Exact)
            .prepare(&env, 200)
            .unwrap();
        let budgets = BudgetSchedule::constant(budget, 200);
        let opt_by_budget = table.opt_by_budget();
        let mut run_rng = ChaCha12Rng::seed_from_u64(900 + trial);
        let log = fluid_policy_run(
            &env,
            &oracle,
            0.1,
            &budgets,
            &opt_by_budget,
            1e-9,
            &mut run_rng,
        )
        .unwrap();
        let t = log.episodes.len() as f64;
        let mean = log.total_reward() / t;
        let var = log
            .episodes
            .iter()
            .map(|e| (e.reward - mean) * (e.reward - mean))
            .sum::<f64>()
            / (t - 1.0);
        let se = (var / t).sqrt();
        assert!(
            mean <= opt + 3.0 * se + 1e-9,
            "fluid mean {mean} above opt {opt} (se {se})"
        );
    }
}

#[test]
fn aggregate_csv_matches_hand_average_of_per_rep_rows() {
    let cfg = pricing_cfg(10, 5, vec![AgentCfg::OracleDp { name: None }]);
    let series = run_experiment(&cfg).unwrap();
    let dir = std::env::temp_dir().join("epibwk_harness_agg");
    let paths = emit_outputs(&series, &dir).unwrap();

    let runs_csv = std::fs::read_to_string(&paths[0]).unwrap();
    let mut sums = vec![0.0_f64; cfg.episodes];
    let mut counts = vec![0usize; cfg.episodes];
    for line in runs_csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let t: usize = fields[1].parse().unwrap();
        let cum: f64 = fields[5].parse().unwrap();
        sums[t - 1] += cum;
        counts[t - 1] += 1;
    }
    let aggregate_csv = std::fs::read_to_string(dir.join("aggregate.csv")).unwrap();
    for line in aggregate_csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let t: usize = fields[0].parse().unwrap();
        let mean: f64 = fields[2].parse().unwrap();
        let hand = sums[t - 1] / counts[t - 1] as f64;
        assert!((mean - hand).abs() < 1e-12, "t={t}: {mean} vs {hand}");
    }
}

#[test]
fn svg_is_well_formed_markup() {
    let cfg = pricing_cfg(
        6,
        2,
        vec![
            AgentCfg::OracleDp { name: None },
            AgentCfg::GreedyUcb {
                oracle: OracleConfig::of_kind(OracleKind::Karm),
                delta: 0.1,
                name: Some("greedy & friends".into()),
            },
        ],
    );
    let series = run_experiment(&cfg).unwrap();
    let dir = std::env::temp_dir().join("epibwk_harness_svg");
    emit_outputs(&series, &dir).unwrap();
    let svg = std::fs::read_to_string(dir.join("regret.svg")).unwrap();

    // Minimal well-formedness scan: tags balance and no stray ampersands.
    let mut stack: Vec<String> = Vec::new();
    let mut rest = svg.as_str();
    while let Some(start) = rest.find('<') {
        let end = rest[start..].find('>').expect("unclosed tag") + start;
        let tag = &rest[start + 1..end];
        if let Some(name) = tag.strip_prefix('/') {
            assert_eq!(stack.pop().as_deref(), Some(name), "mismatched close");
        } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
            let name: String = tag.split_whitespace().next().unwrap().to_string();
            stack.push(name);
        }
        rest = &rest[end + 1..];
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    for (i, _) in svg.match_indices('&') {
        assert!(
            svg[i..].starts_with("&amp;") || svg[i..].starts_with("&lt;") || svg[i..].starts_with("&gt;"),
            "unescaped ampersand"
        );
    }
}

#[test]
fn agent_names_default_and_override() {
    assert_eq!(AgentCfg::OracleDp { name: None }.name(), "oracle-dp");
    assert_eq!(
        AgentCfg::OracleDp {
            name: Some("skyline".into())
        }
        .name(),
        "skyline"
    );
}
