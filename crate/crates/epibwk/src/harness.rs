//! Experiment orchestration: run agents against environments over repeated
//! seeds, compute regret against the exact solver, and emit CSV/SVG outputs.

use crate::agent::{run_mimic_opt_dp, EpisodeRecord, RunLog};
use crate::environments::{
    build_auction, build_pricing, build_procurement, paper_c1, paper_c2, AuctionSpec,
    PricingSpec, ProcurementSpec,
};
use crate::exact_dp::{fluid_dual, rollout_policy, solve_bellman, ExactValueTable};
use crate::model::{
    ActionId, BudgetSchedule, ContextId, EnvFile, EnvironmentModel, NULL_ACTION,
};
use crate::oracles::{ConfidenceBounds, LabeledDataset, LabeledRecord, OracleConfig, PreparedOracle};
use crate::par;
use crate::schedule::{make_schedule, ScheduleKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numeric(String),
}

/// Where the experiment's environment comes from: a file path, an inline
/// definition, or a named builder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvRef {
    Path(String),
    Build(EnvBuild),
    Inline(Box<EnvFile>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvBuild {
    PaperC1 { k: usize },
    PaperC2,
    Pricing { spec: PricingSpec },
    Auction { spec: AuctionSpec },
    Procurement { spec: ProcurementSpec },
}

impl EnvRef {
    pub fn load(&self) -> Result<EnvironmentModel, HarnessError> {
        match self {
            EnvRef::Path(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                let file: EnvFile = serde_json::from_str(&text)
                    .map_err(|e| HarnessError::Config(format!("environment file {path}: {e}")))?;
                EnvironmentModel::from_file(file)
                    .map_err(|e| HarnessError::Config(format!("environment file {path}: {e}")))
            }
            EnvRef::Inline(file) => EnvironmentModel::from_file((**file).clone())
                .map_err(|e| HarnessError::Config(format!("inline environment: {e}"))),
            EnvRef::Build(build) => {
                let built = match build {
                    EnvBuild::PaperC1 { k } => paper_c1(*k),
                    EnvBuild::PaperC2 => paper_c2(),
                    EnvBuild::Pricing { spec } => build_pricing(spec),
                    EnvBuild::Auction { spec } => build_auction(spec),
                    EnvBuild::Procurement { spec } => build_procurement(spec),
                };
                built.map_err(|e| HarnessError::Config(format!("environment builder: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetsCfg {
    Constant(usize),
    Explicit(Vec<usize>),
}

impl BudgetsCfg {
    fn resolve(&self, episodes: usize) -> Result<BudgetSchedule, HarnessError> {
        match self {
            BudgetsCfg::Constant(b) => Ok(BudgetSchedule::constant(*b, episodes)),
            BudgetsCfg::Explicit(v) => {
                if v.len() != episodes {
                    return Err(HarnessError::Config(format!(
                        "budget schedule has {} entries for T={episodes}",
                        v.len()
                    )));
                }
                Ok(BudgetSchedule(v.clone()))
            }
        }
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_alpha() -> f64 {
    0.5
}

fn default_schedule() -> ScheduleKind {
    ScheduleKind::Default
}

/// One competitor in an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AgentCfg {
    MimicOptDp {
        oracle: OracleConfig,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        m: usize,
        #[serde(default = "default_schedule")]
        schedule: ScheduleKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    GreedyUcb {
        oracle: OracleConfig,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    FluidPolicy {
        oracle: OracleConfig,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    OracleDp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

impl AgentCfg {
    pub fn name(&self) -> String {
        let (custom, default) = match self {
            AgentCfg::MimicOptDp { name, .. } => (name, "mimic-opt-dp"),
            AgentCfg::GreedyUcb { name, .. } => (name, "greedy-ucb"),
            AgentCfg::FluidPolicy { name, .. } => (name, "fluid-policy"),
            AgentCfg::OracleDp { name } => (name, "oracle-dp"),
        };
        custom.clone().unwrap_or_else(|| default.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvRef,
    #[serde(rename = "T")]
    pub episodes: usize,
    pub budgets: BudgetsCfg,
    pub reps: usize,
    pub seed: u64,
    pub agents: Vec<AgentCfg>,
}

/// Per-agent repetition logs plus mean/standard-error aggregates of the
/// cumulative regret.
#[derive(Debug, Clone)]
pub struct AgentSeries {
    pub name: String,
    pub runs: Vec<Result<RunLog, String>>,
    pub failures: usize,
    pub mean_cum_regret: Vec<f64>,
    pub se_cum_regret: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RegretSeries {
    pub episodes: usize,
    pub agents: Vec<AgentSeries>,
}

fn aggregate(name: String, runs: Vec<Result<RunLog, String>>, episodes: usize) -> AgentSeries {
    let ok: Vec<&RunLog> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n = ok.len();
    let mut mean = vec![0.0; episodes];
    let mut se = vec![0.0; episodes];
    if n > 0 {
        for t in 0..episodes {
            let mut total = 0.0;
            for log in &ok {
                total += log.episodes[t].cum_regret;
            }
            mean[t] = total / n as f64;
            if n > 1 {
                let mut ss = 0.0;
                for log in &ok {
                    let d = log.episodes[t].cum_regret - mean[t];
                    ss += d * d;
                }
                se[t] = (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt();
            }
        }
    }
    AgentSeries {
        name,
        failures: runs.len() - n,
        runs,
        mean_cum_regret: mean,
        se_cum_regret: se,
    }
}

fn rep_rng(seed: u64, rep: usize) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ rep as u64)
}

/// Plays the recorded exact policy every episode.
fn oracle_dp_run(
    env: &EnvironmentModel,
    table: &ExactValueTable,
    budgets: &BudgetSchedule,
    opt: &[f64],
    rng: &mut ChaCha12Rng,
) -> Result<RunLog, String> {
    let mut log = RunLog::default();
    let mut cum = 0.0;
    for (idx, &b) in budgets.0.iter().enumerate() {
        let reward = rollout_policy(env, table, b, rng).map_err(|e| e.to_string())?;
        cum += opt[b] - reward;
        log.episodes.push(EpisodeRecord {
            t: idx + 1,
            budget: b,
            opt: opt[b],
            reward,
            cum_regret: cum,
            radius_sum: 0.0,
            updated: false,
        });
    }
    Ok(log)
}

/// Myopic optimism: each step maximizes `ucb * r` over the feasible set with
/// no continuation value; bounds refit on all past labeled data each episode.
pub fn greedy_ucb_run(
    env: &EnvironmentModel,
    oracle: &PreparedOracle,
    delta: f64,
    budgets: &BudgetSchedule,
    opt: &[f64],
    rng: &mut ChaCha12Rng,
) -> Result<RunLog, String> {
    let mut bounds = Arc::new(ConfidenceBounds::vacuous(
        env.num_contexts(),
        env.num_actions(),
        delta,
    ));
    let mut data = LabeledDataset::new();
    let mut log = RunLog::default();
    let mut cum = 0.0;
    for (idx, &b_start) in budgets.0.iter().enumerate() {
        let t = idx + 1;
        let mut b = b_start;
        let mut reward = 0.0;
        let mut radius_sum = 0.0;
        for h in 1..=env.horizon() {
            let theta = env.sample_context(h, rng).map_err(|e| e.to_string())?;
            let mut best = f64::NEG_INFINITY;
            let mut best_a = NULL_ACTION;
            for a in 0..env.num_actions() {
                let a = ActionId(a);
                if !env.is_feasible(b, theta, a) {
                    continue;
                }
                let val = bounds.ucb(h, theta, a) * env.reward(theta, a);
                if val > best {
                    best = val;
                    best_a = a;
                }
            }
            let (lcb, ucb) = bounds.pair(h, theta, best_a);
            radius_sum += ucb - lcb;
            let out = env.step(h, b, theta, best_a, rng).map_err(|e| e.to_string())?;
            reward += out.reward_earned;
            b -= out.consumed;
            if best_a != NULL_ACTION {
                data.push(LabeledRecord {
                    context: theta,
                    action: best_a,
                    step: h,
                    converted: out.conversion,
                })
                .map_err(|e| e.to_string())?;
            }
        }
        let delta_next = delta / ((t + 1) as f64 * (t + 1) as f64);
        bounds = oracle.fit(&data, delta_next).map_err(|e| e.to_string())?;
        cum += opt[b_start] - reward;
        log.episodes.push(EpisodeRecord {
            t,
            budget: b_start,
            opt: opt[b_start],
            reward,
            cum_regret: cum,
            radius_sum,
            updated: true,
        });
    }
    Ok(log)
}

/// Midpoint conversion estimates for every pair the dual sweep touches.
fn midpoint_table(env: &EnvironmentModel, bounds: &ConfidenceBounds) -> Vec<f64> {
    let n_ctx = env.num_contexts();
    let n_act = env.num_actions();
    let rows = if bounds.is_per_step() { env.horizon() } else { 1 };
    let mut table = vec![0.0; rows * n_ctx * n_act];
    for h in 0..rows {
        for c in 0..n_ctx {
            for a in 0..n_act {
                let (lo, hi) = bounds.pair(h + 1, ContextId(c), ActionId(a));
                table[(h * n_ctx + c) * n_act + a] = 0.5 * (lo + hi);
            }
        }
    }
    table
}

/// Plans with the fluid relaxation: each episode solves the dual price for
/// the current conversion estimate, then plays the price-adjusted myopic
/// rule. Bounds refit on all past labeled data each episode.
pub fn fluid_policy_run(
    env: &EnvironmentModel,
    oracle: &PreparedOracle,
    delta: f64,
    budgets: &BudgetSchedule,
    opt: &[f64],
    tol: f64,
    rng: &mut ChaCha12Rng,
) -> Result<RunLog, String> {
    let n_ctx = env.num_contexts();
    let n_act = env.num_actions();
    let mut bounds = Arc::new(ConfidenceBounds::vacuous(n_ctx, n_act, delta));
    let mut data = LabeledDataset::new();
    let mut log = RunLog::default();
    let mut cum = 0.0;
    for (idx, &b_start) in budgets.0.iter().enumerate() {
        let t = idx + 1;
        let rho_hat = midpoint_table(env, &bounds);
        let per_step = bounds.is_per_step();
        let rho_of = |h: usize, theta: ContextId, a: ActionId| -> f64 {
            let row = if per_step { h - 1 } else { 0 };
            rho_hat[(row * n_ctx + theta.0) * n_act + a.0]
        };
        let dual = fluid_dual(env, &rho_of, per_step, b_start, tol)
            .map_err(|e| e.to_string())?;
        let lambda_star = dual.lambda_star;

        let mut b = b_start;
        let mut reward = 0.0;
        let mut radius_sum = 0.0;
        for h in 1..=env.horizon() {
            let theta = env.sample_context(h, rng).map_err(|e| e.to_string())?;
            let mut best = f64::NEG_INFINITY;
            let mut best_a = NULL_ACTION;
            for a in 0..env.num_actions() {
                let a = ActionId(a);
                if !env.is_feasible(b, theta, a) {
                    continue;
                }
                let d = env.consumption(theta, a) as f64;
                let val = rho_of(h, theta, a) * (env.reward(theta, a) - lambda_star * d);
                if val > best {
                    best = val;
                    best_a = a;
                }
            }
            let (lcb, ucb) = bounds.pair(h, theta, best_a);
            radius_sum += ucb - lcb;
            let out = env.step(h, b, theta, best_a, rng).map_err(|e| e.to_string())?;
            reward += out.reward_earned;
            b -= out.consumed;
            if best_a != NULL_ACTION {
                data.push(LabeledRecord {
                    context: theta,
                    action: best_a,
                    step: h,
                    converted: out.conversion,
                })
                .map_err(|e| e.to_string())?;
            }
        }
        let delta_next = delta / ((t + 1) as f64 * (t + 1) as f64);
        bounds = oracle.fit(&data, delta_next).map_err(|e| e.to_string())?;
        cum += opt[b_start] - reward;
        log.episodes.push(EpisodeRecord {
            t,
            budget: b_start,
            opt: opt[b_start],
            reward,
            cum_regret: cum,
            radius_sum,
            updated: true,
        });
    }
    Ok(log)
}

fn mimic_run(
    env: &EnvironmentModel,
    oracle: &PreparedOracle,
    delta: f64,
    alpha: f64,
    m: usize,
    schedule_kind: ScheduleKind,
    budgets: &BudgetSchedule,
    opt: &[f64],
    rng: &mut ChaCha12Rng,
) -> Result<RunLog, String> {
    let mut state = make_schedule(alpha, m, schedule_kind).map_err(|e| e.to_string())?;
    if m > 0 {
        let mut arrays = Vec::with_capacity(m);
        for _ in 0..m {
            let mut array = Vec::with_capacity(env.horizon());
            for h in 1..=env.horizon() {
                array.push(env.sample_context(h, rng).map_err(|e| e.to_string())?);
            }
            arrays.push(array);
        }
        state = state.with_initial_arrays(arrays).map_err(|e| e.to_string())?;
    }
    run_mimic_opt_dp(env, budgets, oracle, delta, &mut state, opt, rng).map_err(|e| e.to_string())
}

/// Solves the environment once, then runs every configured agent over
/// `reps` seeded repetitions (concurrently when the `parallel` feature is
/// on; per-repetition streams are derived as `seed XOR rep`).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretSeries, HarnessError> {
    if cfg.reps < 1 {
        return Err(HarnessError::Config("reps must be at least 1".into()));
    }
    if cfg.agents.is_empty() {
        return Err(HarnessError::Config("agents must be nonempty".into()));
    }
    if cfg.episodes < 1 {
        return Err(HarnessError::Config("T must be at least 1".into()));
    }
    let env = cfg.env.load()?;
    let budgets = cfg.budgets.resolve(cfg.episodes)?;
    budgets
        .validate(&env)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let table = solve_bellman(&env);
    let opt = table.opt_by_budget();

    let mut agents = Vec::with_capacity(cfg.agents.len());
    for agent in &cfg.agents {
        let name = agent.name();
        let runs: Vec<Result<RunLog, String>> = match agent {
            AgentCfg::OracleDp { .. } => par::map_indexed(cfg.reps, |rep| {
                let mut rng = rep_rng(cfg.seed, rep);
                oracle_dp_run(&env, &table, &budgets, &opt, &mut rng)
            }),
            AgentCfg::GreedyUcb { oracle, delta, .. } => {
                let prepared = oracle
                    .prepare(&env, cfg.episodes)
                    .map_err(|e| HarnessError::Config(format!("agent {name}: {e}")))?;
                par::map_indexed(cfg.reps, |rep| {
                    let mut rng = rep_rng(cfg.seed, rep);
                    greedy_ucb_run(&env, &prepared, *delta, &budgets, &opt, &mut rng)
                })
            }
            AgentCfg::FluidPolicy { oracle, delta, .. } => {
                let prepared = oracle
                    .prepare(&env, cfg.episodes)
                    .map_err(|e| HarnessError::Config(format!("agent {name}: {e}")))?;
                let tol = crate::exact_dp::default_fluid_tol(&env);
                par::map_indexed(cfg.reps, |rep| {
                    let mut rng = rep_rng(cfg.seed, rep);
                    fluid_policy_run(&env, &prepared, *delta, &budgets, &opt, tol, &mut rng)
                })
            }
            AgentCfg::MimicOptDp {
                oracle,
                delta,
                alpha,
                m,
                schedule,
                ..
            } => {
                let prepared = oracle
                    .prepare(&env, cfg.episodes)
                    .map_err(|e| HarnessError::Config(format!("agent {name}: {e}")))?;
                par::map_indexed(cfg.reps, |rep| {
                    let mut rng = rep_rng(cfg.seed, rep);
                    mimic_run(
                        &env, &prepared, *delta, *alpha, *m, *schedule, &budgets, &opt, &mut rng,
                    )
                })
            }
        };
        agents.push(aggregate(name, runs, cfg.episodes));
    }
    Ok(RegretSeries {
        episodes: cfg.episodes,
        agents,
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes one per-repetition CSV per agent, the aggregate CSV, and the
/// regret chart. Returns the created paths.
pub fn emit_outputs(series: &RegretSeries, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();

    for agent in &series.agents {
        let mut csv = String::from("rep,t,B_t,opt_t,episode_reward,cum_regret,radius_sum,updated\n");
        for (rep, run) in agent.runs.iter().enumerate() {
            if let Ok(log) = run {
                for e in &log.episodes {
                    writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{}",
                        rep, e.t, e.budget, e.opt, e.reward, e.cum_regret, e.radius_sum, e.updated
                    )
                    .expect("string write");
                }
            }
        }
        let path = dir.join(format!("runs_{}.csv", sanitize(&agent.name)));
        write_file(&path, &csv)?;
        paths.push(path);
    }

    let mut csv = String::from("t,agent,mean_cum_regret,se\n");
    for agent in &series.agents {
        for t in 0..series.episodes {
            writeln!(
                csv,
                "{},{},{},{}",
                t + 1,
                agent.name,
                agent.mean_cum_regret[t],
                agent.se_cum_regret[t]
            )
            .expect("string write");
        }
    }
    let path = dir.join("aggregate.csv");
    write_file(&path, &csv)?;
    paths.push(path);

    let path = dir.join("regret.svg");
    write_file(&path, &render_svg(series))?;
    paths.push(path);
    Ok(paths)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Mean cumulative regret per agent with a `+-3 se` band.
fn render_svg(series: &RegretSeries) -> String {
    let width = 880.0;
    let height = 560.0;
    let (left, right, top, bottom) = (70.0, 200.0, 30.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let t_max = series.episodes.max(1) as f64;
    let mut y_max: f64 = 1e-9;
    for agent in &series.agents {
        for t in 0..series.episodes {
            y_max = y_max.max(agent.mean_cum_regret[t] + 3.0 * agent.se_cum_regret[t]);
        }
    }
    y_max *= 1.05;
    let x = |t: f64| left + (t / t_max) * plot_w;
    let y = |v: f64| top + plot_h - (v.max(0.0) / y_max) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"13\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>").unwrap();
    // Axes.
    writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h,
        left + plot_w,
        top + plot_h
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h
    )
    .unwrap();
    for i in 0..=5 {
        let frac = i as f64 / 5.0;
        let tx = x(frac * t_max);
        let ty = top + plot_h;
        writeln!(
            svg,
            "<line x1=\"{tx:.2}\" y1=\"{ty:.2}\" x2=\"{tx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            ty + 5.0
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{tx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.0}</text>",
            ty + 20.0,
            frac * t_max
        )
        .unwrap();
        let vy = y(frac * y_max);
        writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{vy:.2}\" x2=\"{left}\" y2=\"{vy:.2}\" stroke=\"black\"/>",
            left - 5.0
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.1}</text>",
            left - 9.0,
            vy + 4.0,
            frac * y_max
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">episode</text>",
        left + plot_w / 2.0,
        height - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">\
         mean cumulative regret</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    )
    .unwrap();

    for (i, agent) in series.agents.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // 3-se band.
        let mut band = String::new();
        for t in 0..series.episodes {
            let v = agent.mean_cum_regret[t] + 3.0 * agent.se_cum_regret[t];
            write!(band, "{:.2},{:.2} ", x((t + 1) as f64), y(v)).unwrap();
        }
        for t in (0..series.episodes).rev() {
            let v = agent.mean_cum_regret[t] - 3.0 * agent.se_cum_regret[t];
            write!(band, "{:.2},{:.2} ", x((t + 1) as f64), y(v)).unwrap();
        }
        writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.trim_end()
        )
        .unwrap();
        let mut line = String::new();
        for t in 0..series.episodes {
            write!(
                line,
                "{:.2},{:.2} ",
                x((t + 1) as f64),
                y(agent.mean_cum_regret[t])
            )
            .unwrap();
        }
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            line.trim_end()
        )
        .unwrap();
        // Legend entry.
        let ly = top + 16.0 + 22.0 * i as f64;
        writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>",
            left + plot_w + 14.0,
            left + plot_w + 44.0
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            left + plot_w + 50.0,
            ly + 4.0,
            xml_escape(&agent.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
