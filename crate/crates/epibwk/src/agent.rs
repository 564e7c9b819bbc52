//! The online learner: optimistic backward induction over stored context
//! arrays, the matching action rule, and the full episode loop with lazy
//! updates.

use crate::model::{
    ActionId, BudgetSchedule, ContextId, EnvironmentModel, ModelError, NULL_ACTION,
};
use crate::oracles::{ConfidenceBounds, LabeledRecord, OracleError, PreparedOracle};
use crate::par;
use crate::schedule::{ScheduleError, ScheduleState};
use rand::Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("optimistic backward induction needs at least one stored context array")]
    EmptyUnlabeledStore,
    #[error("stored context array {index} has length {got}, expected horizon {expected}")]
    ArrayLength {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("optimum lookup covers budgets 0..{got}, need 0..={need}")]
    OptLookupTooShort { got: usize, need: usize },
}

/// Optimistic value-to-go estimates `U_hat[h][b]`, dense over the full
/// budget grid; rebuilt from scratch at each non-lazy episode.
#[derive(Debug, Clone)]
pub struct OptimisticValueTable {
    pub built_at_episode: usize,
    pub delta_t: f64,
    horizon: usize,
    budgets: usize,
    u: Vec<f64>,
}

impl OptimisticValueTable {
    /// The all-zero table the learner starts episode 1 with.
    pub fn zeros(env: &EnvironmentModel) -> Self {
        let horizon = env.horizon();
        let budgets = env.max_budget() + 1;
        OptimisticValueTable {
            built_at_episode: 1,
            delta_t: 1.0,
            horizon,
            budgets,
            u: vec![0.0; (horizon + 1) * budgets],
        }
    }

    pub fn u_hat(&self, h: usize, b: usize) -> f64 {
        debug_assert!((1..=self.horizon + 1).contains(&h));
        self.u[(h - 1) * self.budgets + b]
    }

    fn row(&self, h: usize) -> &[f64] {
        &self.u[(h - 1) * self.budgets..h * self.budgets]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn max_budget(&self) -> usize {
        self.budgets - 1
    }
}

/// One-step optimistic objective: upper bound on the conversion for the
/// reward earned, lower bound for the budget consumed.
#[inline]
fn objective(lcb: f64, ucb: f64, r: f64, u_keep: f64, u_spend: f64) -> f64 {
    ucb * r + lcb * u_spend + (1.0 - lcb) * u_keep
}

/// Optimistic state value at `(h, b, theta)` given the table's next row.
/// The maximizer is exactly what [`select_action`] plays there.
pub fn optimistic_value(
    bounds: &ConfidenceBounds,
    table: &OptimisticValueTable,
    h: usize,
    b: usize,
    theta: ContextId,
    env: &EnvironmentModel,
) -> f64 {
    best_optimistic(bounds, table.row(h + 1), h, b, theta, env).0
}

/// The action rule: maximize the optimistic objective over the feasible set,
/// ties to the lowest action id.
pub fn select_action(
    bounds: &ConfidenceBounds,
    table: &OptimisticValueTable,
    h: usize,
    b: usize,
    theta: ContextId,
    env: &EnvironmentModel,
) -> ActionId {
    best_optimistic(bounds, table.row(h + 1), h, b, theta, env).1
}

#[inline]
fn best_optimistic(
    bounds: &ConfidenceBounds,
    u_next: &[f64],
    h: usize,
    b: usize,
    theta: ContextId,
    env: &EnvironmentModel,
) -> (f64, ActionId) {
    let mut best = f64::NEG_INFINITY;
    let mut best_a = NULL_ACTION;
    for a in 0..env.num_actions() {
        let a = ActionId(a);
        if !env.is_feasible(b, theta, a) {
            continue;
        }
        let (lcb, ucb) = bounds.pair(h, theta, a);
        let d = env.consumption(theta, a);
        let val = objective(lcb, ucb, env.reward(theta, a), u_next[b], u_next[b - d]);
        if val > best {
            best = val;
            best_a = a;
        }
    }
    (best, best_a)
}

/// Backward induction with confidence bounds in place of the conversion
/// model and stored context arrays in place of the context distributions.
///
/// For each step the per-budget estimate is the average of the optimistic
/// state values over the stored arrays, capped at `(b /\ (H-h+1)) * r_max`;
/// the cap applies to the average, not to individual terms.
pub fn optimistic_dp(
    bounds: &ConfidenceBounds,
    delta_t: f64,
    unlabeled: &[Vec<ContextId>],
    env: &EnvironmentModel,
    built_at_episode: usize,
) -> Result<OptimisticValueTable, AgentError> {
    if unlabeled.is_empty() {
        return Err(AgentError::EmptyUnlabeledStore);
    }
    let horizon = env.horizon();
    for (index, array) in unlabeled.iter().enumerate() {
        if array.len() != horizon {
            return Err(AgentError::ArrayLength {
                index,
                got: array.len(),
                expected: horizon,
            });
        }
    }
    let budgets = env.max_budget() + 1;
    let r_max = env.r_max();
    let count = unlabeled.len() as f64;
    let mut u = vec![0.0; (horizon + 1) * budgets];

    for h in (1..=horizon).rev() {
        let u_next: Vec<f64> = u[h * budgets..(h + 1) * budgets].to_vec();
        // Optimistic state values per stored array, then average per budget
        // in array order so the reduction is independent of thread count.
        // Bound pairs are fetched once per (step, context) row; the budget
        // loop below applies the same objective expression as
        // `best_optimistic`, so the two paths pick identical maximizers.
        let per_sample = par::map_indexed(unlabeled.len(), |s| {
            let theta = unlabeled[s][h - 1];
            let rows: Vec<(f64, f64, f64, usize, bool)> = (0..env.num_actions())
                .map(|a| {
                    let a = ActionId(a);
                    let (lcb, ucb) = bounds.pair(h, theta, a);
                    (
                        lcb,
                        ucb,
                        env.reward(theta, a),
                        env.consumption(theta, a),
                        env.reward(theta, a) >= 0.0,
                    )
                })
                .collect();
            (0..budgets)
                .map(|b| {
                    let mut best = f64::NEG_INFINITY;
                    for &(lcb, ucb, r, d, r_ok) in &rows {
                        if !r_ok || d > b {
                            continue;
                        }
                        let val = objective(lcb, ucb, r, u_next[b], u_next[b - d]);
                        if val > best {
                            best = val;
                        }
                    }
                    best
                })
                .collect::<Vec<f64>>()
        });
        let steps_left = (horizon - h + 1) as f64;
        for b in 0..budgets {
            let mut total = 0.0;
            for row in &per_sample {
                total += row[b];
            }
            let cap = (b as f64).min(steps_left) * r_max;
            u[(h - 1) * budgets + b] = (total / count).min(cap);
        }
    }

    let table = OptimisticValueTable {
        built_at_episode,
        delta_t,
        horizon,
        budgets,
        u,
    };
    debug_assert!(
        check_value_table_invariants(&table, env).is_ok(),
        "{}",
        check_value_table_invariants(&table, env).unwrap_err()
    );
    Ok(table)
}

/// Structural facts every optimistic table must satisfy: zero terminal row,
/// monotone in budget, increments bounded by `2 r_max L`, and the running
/// cap `(b /\ (H-h+1)) r_max`.
pub fn check_value_table_invariants(
    table: &OptimisticValueTable,
    env: &EnvironmentModel,
) -> Result<(), String> {
    let r_max = env.r_max();
    let l = env.max_consumption();
    let horizon = table.horizon;
    let tol = 1e-9 * r_max.max(1.0);
    for b in 0..=table.max_budget() {
        if table.u_hat(horizon + 1, b) != 0.0 {
            return Err(format!("terminal row not zero at b={b}"));
        }
    }
    for h in 1..=horizon {
        let steps_left = (horizon - h + 1) as f64;
        for b in 0..=table.max_budget() {
            let here = table.u_hat(h, b);
            let cap = (b as f64).min(steps_left) * r_max;
            if here > cap + tol {
                return Err(format!("cap violated at h={h} b={b}: {here} > {cap}"));
            }
            for d in 1..=l.min(b) {
                let gap = here - table.u_hat(h, b - d);
                if gap < -tol {
                    return Err(format!("non-monotone at h={h} b={b} d={d}: {gap}"));
                }
                if gap > 2.0 * r_max * l as f64 + tol {
                    return Err(format!(
                        "increment bound violated at h={h} b={b} d={d}: {gap}"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// One episode row of a run log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub t: usize,
    pub budget: usize,
    pub opt: f64,
    pub reward: f64,
    pub cum_regret: f64,
    /// Sum over the episode's steps of the confidence width at the played
    /// pair.
    pub radius_sum: f64,
    /// Whether the episode ended with a refit of bounds and value table.
    pub updated: bool,
}

/// Per-episode history of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub episodes: Vec<EpisodeRecord>,
}

impl RunLog {
    pub fn total_reward(&self) -> f64 {
        self.episodes.iter().map(|e| e.reward).sum()
    }

    pub fn final_cum_regret(&self) -> f64 {
        self.episodes.last().map_or(0.0, |e| e.cum_regret)
    }
}

/// Runs the full online learner for one repetition.
///
/// Per episode: play the optimistic action rule; afterwards either bank the
/// context array (member episodes, estimates carried unchanged) or extend
/// the labeled data, refit the oracle at `delta / (t+1)^2`, and rebuild the
/// value table.
pub fn run_mimic_opt_dp<R: Rng + ?Sized>(
    env: &EnvironmentModel,
    budgets: &BudgetSchedule,
    oracle: &PreparedOracle,
    delta: f64,
    state: &mut ScheduleState,
    opt_by_budget: &[f64],
    rng: &mut R,
) -> Result<RunLog, AgentError> {
    budgets.validate(env)?;
    if opt_by_budget.len() < env.max_budget() + 1 {
        return Err(AgentError::OptLookupTooShort {
            got: opt_by_budget.len(),
            need: env.max_budget(),
        });
    }
    for (index, array) in state.unlabeled.iter().enumerate() {
        if array.len() != env.horizon() {
            return Err(AgentError::ArrayLength {
                index,
                got: array.len(),
                expected: env.horizon(),
            });
        }
    }

    let mut bounds = Arc::new(ConfidenceBounds::vacuous(
        env.num_contexts(),
        env.num_actions(),
        delta,
    ));
    let mut table = Arc::new(OptimisticValueTable::zeros(env));
    let mut log = RunLog::default();
    let mut cum_regret = 0.0;

    for (idx, &b_start) in budgets.0.iter().enumerate() {
        let t = idx + 1;
        let mut b = b_start;
        let mut reward = 0.0;
        let mut radius_sum = 0.0;
        let mut contexts = Vec::with_capacity(env.horizon());
        let mut fresh_records: Vec<LabeledRecord> = Vec::new();

        for h in 1..=env.horizon() {
            let theta = env.sample_context(h, rng)?;
            let action = select_action(&bounds, &table, h, b, theta, env);
            let (lcb, ucb) = bounds.pair(h, theta, action);
            radius_sum += ucb - lcb;
            let out = env.step(h, b, theta, action, rng)?;
            debug_assert!(out.consumed <= b, "budget violated");
            reward += out.reward_earned;
            b -= out.consumed;
            contexts.push(theta);
            if action != NULL_ACTION {
                fresh_records.push(LabeledRecord {
                    context: theta,
                    action,
                    step: h,
                    converted: out.conversion,
                });
            }
        }

        let updated = if state.schedule.contains(t) {
            // Lazy episode: bank the contexts, keep every estimate as-is.
            state.unlabeled.push(contexts);
            false
        } else {
            for record in fresh_records {
                state.labeled.push(record)?;
            }
            let delta_next = delta / ((t + 1) as f64 * (t + 1) as f64);
            bounds = oracle.fit(&state.labeled, delta_next)?;
            table = Arc::new(optimistic_dp(
                &bounds,
                delta_next,
                &state.unlabeled,
                env,
                t + 1,
            )?);
            true
        };

        cum_regret += opt_by_budget[b_start] - reward;
        log.episodes.push(EpisodeRecord {
            t,
            budget: b_start,
            opt: opt_by_budget[b_start],
            reward,
            cum_regret,
            radius_sum,
            updated,
        });
    }
    Ok(log)
}
