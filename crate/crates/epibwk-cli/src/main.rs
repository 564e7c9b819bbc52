//! Command line for the episodic allocation toolkit: exact solving,
//! environment generation, benchmark runs, and single simulations.

use clap::{Parser, Subcommand, ValueEnum};
use epibwk::environments::{
    build_auction, build_pricing, build_procurement, paper_c1, paper_c2, uniform_lambda,
    AuctionSpec, DemandLink, HobModel, PricingSpec, ProcurementSpec,
};
use epibwk::exact_dp::{default_fluid_tol, fluid_ub, opt_value, solve_bellman};
use epibwk::harness::{
    emit_outputs, run_experiment, AgentCfg, BudgetsCfg, EnvRef, ExperimentConfig, HarnessError,
};
use epibwk::model::{ContextId, EnvironmentModel};
use epibwk::oracles::OracleConfig;
use epibwk::schedule::ScheduleKind;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "epibwk",
    about = "Episodic bandits-with-knapsacks: solvers, simulators, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an environment exactly and print the optimum and fluid bound.
    ExactOpt {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Dual tolerance (default 1e-8 * r_max * H).
        #[arg(long)]
        tol: Option<f64>,
        /// Write the state values as CSV (columns h,b,theta,V).
        #[arg(long)]
        dump_table: Option<PathBuf>,
    },
    /// Environment generation.
    Env {
        #[command(subcommand)]
        command: EnvCommand,
    },
    /// Run a benchmark config and write CSV/SVG outputs.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one seeded repetition of a single agent.
    Simulate {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        agent: AgentKind,
        #[arg(long = "T", default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Starting budget per episode (default: the maximum, L * H).
        #[arg(long)]
        budget: Option<usize>,
        /// Oracle config as inline JSON, e.g. '{"oracle":"karm"}'.
        #[arg(long, default_value = r#"{"oracle":"karm"}"#)]
        oracle: String,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Pre-loaded unlabeled context arrays.
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// Write the per-episode log as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EnvCommand {
    /// Build a named environment and write its JSON definition.
    Make {
        #[arg(long, value_enum)]
        kind: EnvKind,
        #[arg(long)]
        out: PathBuf,
        /// Bid/value grid size for the auction instances.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 24)]
        horizon: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Pricing,
    Auction,
    Procurement,
    PaperC1,
    PaperC2,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Mimic,
    GreedyUcb,
    FluidPolicy,
    OracleDp,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn numeric_err(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_NUMERIC,
        message: message.into(),
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Numeric(_) => numeric_err(e.to_string()),
            _ => config_err(e.to_string()),
        }
    }
}

fn load_env(path: &PathBuf) -> Result<EnvironmentModel, CliError> {
    EnvRef::Path(path.display().to_string())
        .load()
        .map_err(CliError::from)
}

fn write_text(path: &PathBuf, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| config_err(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ExactOpt {
            env,
            budget,
            tol,
            dump_table,
        } => {
            let env = load_env(&env)?;
            if budget > env.max_budget() {
                return Err(config_err(format!(
                    "budget {budget} exceeds L*H = {}",
                    env.max_budget()
                )));
            }
            let table = solve_bellman(&env);
            let opt = opt_value(&table, budget).map_err(|e| numeric_err(e.to_string()))?;
            let tol = tol.unwrap_or_else(|| default_fluid_tol(&env));
            let ub = fluid_ub(&env, budget, tol).map_err(|e| numeric_err(e.to_string()))?;
            println!("opt_t {opt}");
            println!("UB_t {ub}");
            if let Some(path) = dump_table {
                let mut csv = String::from("h,b,theta,V\n");
                for h in 1..=env.horizon() {
                    for b in 0..=env.max_budget() {
                        for c in 0..env.num_contexts() {
                            writeln!(csv, "{h},{b},{c},{}", table.v(h, b, ContextId(c)))
                                .expect("string write");
                        }
                    }
                }
                write_text(&path, &csv)?;
            }
            Ok(())
        }
        Command::Env {
            command: EnvCommand::Make { kind, out, k, horizon },
        } => {
            let env = make_env(kind, k, horizon)?;
            let text = serde_json::to_string_pretty(&env.to_file())
                .map_err(|e| config_err(e.to_string()))?;
            write_text(&out, &text)?;
            println!(
                "wrote {} ({} contexts, {} actions, H={}, L={})",
                out.display(),
                env.num_contexts(),
                env.num_actions(),
                env.horizon(),
                env.max_consumption()
            );
            Ok(())
        }
        Command::Bench { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| config_err(format!("cannot read {}: {e}", config.display())))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| config_err(format!("{}: {e}", config.display())))?;
            let series = run_experiment(&cfg)?;
            let paths = emit_outputs(&series, &out)?;
            for agent in &series.agents {
                let last = cfg.episodes - 1;
                println!(
                    "{}: mean cumulative regret {:.4} (se {:.4}){}",
                    agent.name,
                    agent.mean_cum_regret[last],
                    agent.se_cum_regret[last],
                    if agent.failures > 0 {
                        format!(" [{} failed reps]", agent.failures)
                    } else {
                        String::new()
                    }
                );
            }
            for path in paths {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Simulate {
            env,
            agent,
            episodes,
            seed,
            budget,
            oracle,
            delta,
            alpha,
            m,
            out,
        } => {
            let model = load_env(&env)?;
            let budget = budget.unwrap_or_else(|| model.max_budget());
            let oracle_cfg: OracleConfig = serde_json::from_str(&oracle)
                .map_err(|e| config_err(format!("oracle config: {e}")))?;
            let agent_cfg = match agent {
                AgentKind::Mimic => AgentCfg::MimicOptDp {
                    oracle: oracle_cfg,
                    delta,
                    alpha,
                    m,
                    schedule: if m > 0 {
                        ScheduleKind::Unlabeled
                    } else {
                        ScheduleKind::Default
                    },
                    name: None,
                },
                AgentKind::GreedyUcb => AgentCfg::GreedyUcb {
                    oracle: oracle_cfg,
                    delta,
                    name: None,
                },
                AgentKind::FluidPolicy => AgentCfg::FluidPolicy {
                    oracle: oracle_cfg,
                    delta,
                    name: None,
                },
                AgentKind::OracleDp => AgentCfg::OracleDp { name: None },
            };
            let cfg = ExperimentConfig {
                env: EnvRef::Path(env.display().to_string()),
                episodes,
                budgets: BudgetsCfg::Constant(budget),
                reps: 1,
                seed,
                agents: vec![agent_cfg],
            };
            let series = run_experiment(&cfg)?;
            let run = series.agents[0].runs[0]
                .as_ref()
                .map_err(|e| numeric_err(e.clone()))?;
            println!(
                "{}: T={episodes} B={budget} seed={seed} total reward {:.4}, final cumulative \
                 regret {:.4}",
                series.agents[0].name,
                run.total_reward(),
                run.final_cum_regret()
            );
            if let Some(path) = out {
                let mut csv =
                    String::from("t,B_t,opt_t,episode_reward,cum_regret,radius_sum,updated\n");
                for e in &run.episodes {
                    writeln!(
                        csv,
                        "{},{},{},{},{},{},{}",
                        e.t, e.budget, e.opt, e.reward, e.cum_regret, e.radius_sum, e.updated
                    )
                    .expect("string write");
                }
                write_text(&path, &csv)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn make_env(kind: EnvKind, k: usize, horizon: usize) -> Result<EnvironmentModel, CliError> {
    let built = match kind {
        EnvKind::PaperC1 => paper_c1(k),
        EnvKind::PaperC2 => paper_c2(),
        EnvKind::Pricing => {
            // Small demo instance: eight customer profiles on a line.
            let contexts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
            build_pricing(&PricingSpec {
                horizon,
                prices: (1..=5).map(|p| p as f64).collect(),
                lambda: uniform_lambda(horizon, contexts.len()),
                contexts,
                mu_bar: vec![2.0],
                u0: 0.6,
                demand: DemandLink::Logistic,
            })
        }
        EnvKind::Procurement => {
            let contexts: Vec<Vec<f64>> = (0..8).map(|i| vec![0.5 + i as f64 / 7.0]).collect();
            build_procurement(&ProcurementSpec {
                horizon,
                max_price: 5,
                lambda: uniform_lambda(horizon, contexts.len()),
                contexts,
                mu_bar: vec![2.0],
                u0: 0.5,
                demand: DemandLink::Logistic,
            })
        }
        EnvKind::Auction => {
            let values: Vec<usize> = (1..=k + 1).collect();
            build_auction(&AuctionSpec {
                horizon,
                max_bid: k,
                lambda: uniform_lambda(horizon, values.len()),
                values,
                hob: HobModel::Identical {
                    mu: (1..=k).map(|a| a as f64 / (k + 1) as f64).collect(),
                },
            })
        }
    };
    built.map_err(|e| config_err(e.to_string()))
}
