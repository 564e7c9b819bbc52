//! Domain types for the episodic allocation model and one-step simulation
//! dynamics.
//!
//! An environment is a finite catalog of contexts and actions together with
//! per-pair conversion probability `rho`, reward `r`, integer consumption `d`,
//! and a per-step context distribution `lambda[h]`. Index 0 is reserved for
//! the null context (no arrival) and the null action (no allocation).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index into the context catalog. Index 0 is the null context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextId(pub usize);

/// Index into the action set. Index 0 is the null action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

/// The null context: no request arrives.
pub const NULL_CONTEXT: ContextId = ContextId(0);
/// The null action: no allocation, zero reward and zero consumption.
pub const NULL_ACTION: ActionId = ActionId(0);

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("context index {0} out of range (catalog has {1})")]
    InvalidContext(usize, usize),
    #[error("action index {0} out of range ({1} actions)")]
    InvalidAction(usize, usize),
    #[error("budget {0} out of range 0..={1}")]
    InvalidBudget(usize, usize),
    #[error("step index {0} out of range 1..={1}")]
    InvalidStep(usize, usize),
    #[error("action {action:?} infeasible at (h={h}, b={b}, theta={theta:?})")]
    InfeasibleAction {
        h: usize,
        b: usize,
        theta: ContextId,
        action: ActionId,
    },
    #[error("invalid environment: {0}")]
    Validation(String),
    #[error("unknown feature map {0:?}")]
    UnknownFeatureMap(String),
}

/// Outcome of one simulated time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub context: ContextId,
    pub action: ActionId,
    /// Bernoulli conversion draw `Y`.
    pub conversion: bool,
    /// `r(theta, a) * Y`.
    pub reward_earned: f64,
    /// `d(theta, a) * Y`.
    pub consumed: usize,
}

/// Per-episode starting budgets `B_1..B_T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSchedule(pub Vec<usize>);

impl BudgetSchedule {
    pub fn constant(b: usize, t: usize) -> Self {
        BudgetSchedule(vec![b; t])
    }

    /// Every budget must lie in `1..=L*H`.
    pub fn validate(&self, env: &EnvironmentModel) -> Result<(), ModelError> {
        let cap = env.max_budget();
        for &b in &self.0 {
            if b < 1 || b > cap {
                return Err(ModelError::InvalidBudget(b, cap));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Feature vectors `phi(theta, a)` exported by an environment for
/// regression-style oracles. Null pairs map to the zero vector.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub dim: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn phi(&self, theta: ContextId, a: ActionId) -> &[f64] {
        let start = (theta.0 * self.n_actions + a.0) * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Serialized form of an environment definition file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvFile {
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub r_max: f64,
    /// Raw context vectors; entry 0 is the null context.
    pub contexts: Vec<Vec<f64>>,
    /// Raw action values; entry 0 is the null action.
    pub actions: Vec<f64>,
    /// `rho[theta][a]`.
    pub rho: Vec<Vec<f64>>,
    /// `reward[theta][a]`.
    pub reward: Vec<Vec<f64>>,
    /// `consumption[theta][a]`.
    pub consumption: Vec<Vec<usize>>,
    /// `lambda[h][theta]`, one row per time step.
    pub lambda: Vec<Vec<f64>>,
    /// Optional step-dependent conversion probabilities `rho_step[h][theta][a]`,
    /// used by environments whose conversion model varies within an episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_step: Option<Vec<Vec<Vec<f64>>>>,
}

/// The simulation ground truth: catalog, tables, and context distributions.
///
/// Immutable after construction; shared freely across concurrent runs.
#[derive(Debug, Clone)]
pub struct EnvironmentModel {
    horizon: usize,
    max_consumption: usize,
    r_max: f64,
    contexts: Vec<Vec<f64>>,
    actions: Vec<f64>,
    rho: Vec<f64>,
    reward: Vec<f64>,
    consumption: Vec<usize>,
    rho_step: Option<Vec<f64>>,
    lambda: Vec<f64>,
    lambda_cdf: Vec<f64>,
}

impl EnvironmentModel {
    pub fn from_file(file: EnvFile) -> Result<Self, ModelError> {
        let n_ctx = file.contexts.len();
        let n_act = file.actions.len();
        let flat2 = |t: &Vec<Vec<f64>>, name: &str| -> Result<Vec<f64>, ModelError> {
            if t.len() != n_ctx || t.iter().any(|row| row.len() != n_act) {
                return Err(ModelError::Validation(format!(
                    "{name} table must be {n_ctx}x{n_act}"
                )));
            }
            Ok(t.iter().flatten().copied().collect())
        };
        let rho = flat2(&file.rho, "rho")?;
        let reward = flat2(&file.reward, "reward")?;
        if file.consumption.len() != n_ctx
            || file.consumption.iter().any(|row| row.len() != n_act)
        {
            return Err(ModelError::Validation(format!(
                "consumption table must be {n_ctx}x{n_act}"
            )));
        }
        let consumption: Vec<usize> = file.consumption.iter().flatten().copied().collect();
        if file.lambda.len() != file.h || file.lambda.iter().any(|row| row.len() != n_ctx) {
            return Err(ModelError::Validation(format!(
                "lambda must have {} rows of length {n_ctx}",
                file.h
            )));
        }
        let lambda: Vec<f64> = file.lambda.iter().flatten().copied().collect();
        let rho_step = match &file.rho_step {
            None => None,
            Some(cube) => {
                if cube.len() != file.h
                    || cube
                        .iter()
                        .any(|m| m.len() != n_ctx || m.iter().any(|row| row.len() != n_act))
                {
                    return Err(ModelError::Validation(format!(
                        "rho_step must be {}x{n_ctx}x{n_act}",
                        file.h
                    )));
                }
                Some(cube.iter().flatten().flatten().copied().collect())
            }
        };
        let mut lambda_cdf = lambda.clone();
        for h in 0..file.h {
            let row = &mut lambda_cdf[h * n_ctx..(h + 1) * n_ctx];
            for i in 1..n_ctx {
                row[i] += row[i - 1];
            }
        }
        let env = EnvironmentModel {
            horizon: file.h,
            max_consumption: file.l,
            r_max: file.r_max,
            contexts: file.contexts,
            actions: file.actions,
            rho,
            reward,
            consumption,
            rho_step,
            lambda,
            lambda_cdf,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn to_file(&self) -> EnvFile {
        let n_ctx = self.num_contexts();
        let n_act = self.num_actions();
        let unflat = |t: &[f64]| -> Vec<Vec<f64>> {
            (0..n_ctx).map(|c| t[c * n_act..(c + 1) * n_act].to_vec()).collect()
        };
        EnvFile {
            h: self.horizon,
            l: self.max_consumption,
            r_max: self.r_max,
            contexts: self.contexts.clone(),
            actions: self.actions.clone(),
            rho: unflat(&self.rho),
            reward: unflat(&self.reward),
            consumption: (0..n_ctx)
                .map(|c| self.consumption[c * n_act..(c + 1) * n_act].to_vec())
                .collect(),
            lambda: (0..self.horizon)
                .map(|h| self.lambda[h * n_ctx..(h + 1) * n_ctx].to_vec())
                .collect(),
            rho_step: self.rho_step.as_ref().map(|cube| {
                (0..self.horizon)
                    .map(|h| {
                        (0..n_ctx)
                            .map(|c| {
                                let base = (h * n_ctx + c) * n_act;
                                cube[base..base + n_act].to_vec()
                            })
                            .collect()
                    })
                    .collect()
            }),
        }
    }

    /// Checks pmf rows, null conventions, consumption bounds, and reward caps.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n_ctx = self.num_contexts();
        let n_act = self.num_actions();
        if n_ctx < 1 || n_act < 1 {
            return Err(ModelError::Validation(
                "catalog needs the null context and null action".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(ModelError::Validation("H must be positive".into()));
        }
        if self.max_consumption == 0 {
            return Err(ModelError::Validation("L must be positive".into()));
        }
        for h in 0..self.horizon {
            let row = &self.lambda[h * n_ctx..(h + 1) * n_ctx];
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(ModelError::Validation(format!(
                    "lambda row {} sums to {total}, expected 1",
                    h + 1
                )));
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(ModelError::Validation(format!(
                    "lambda row {} has a negative entry",
                    h + 1
                )));
            }
        }
        for c in 0..n_ctx {
            for a in 0..n_act {
                let i = c * n_act + a;
                let rho = self.rho[i];
                if !(0.0..=1.0).contains(&rho) {
                    return Err(ModelError::Validation(format!(
                        "rho({c},{a}) = {rho} outside [0,1]"
                    )));
                }
                if self.reward[i] > self.r_max + 1e-12 {
                    return Err(ModelError::Validation(format!(
                        "reward({c},{a}) exceeds r_max"
                    )));
                }
                if self.consumption[i] > self.max_consumption {
                    return Err(ModelError::Validation(format!(
                        "consumption({c},{a}) exceeds L"
                    )));
                }
                // Null conventions: the null action earns and consumes nothing
                // anywhere; the null context never converts, so its step
                // outcomes are zero whatever the catalog rewards say (the
                // auction stores negative rewards there so that feasibility
                // caps bids at the private value).
                if a == 0 && (rho != 0.0 || self.reward[i] != 0.0 || self.consumption[i] != 0) {
                    return Err(ModelError::Validation(format!(
                        "null action must have rho=r=d=0 at context {c}"
                    )));
                }
                if c == 0 && rho != 0.0 {
                    return Err(ModelError::Validation(
                        "null context must have rho=0 for every action".into(),
                    ));
                }
                // Positive reward requires consuming at least one unit.
                if a != 0 && self.consumption[i] < 1 {
                    return Err(ModelError::Validation(format!(
                        "non-null action {a} must consume at least 1 unit at context {c}"
                    )));
                }
            }
        }
        if let Some(cube) = &self.rho_step {
            for (i, &p) in cube.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ModelError::Validation(format!(
                        "rho_step entry {i} outside [0,1]"
                    )));
                }
                let a = i % n_act;
                let c = (i / n_act) % n_ctx;
                if (a == 0 || c == 0) && p != 0.0 {
                    return Err(ModelError::Validation(
                        "rho_step must be 0 on null rows and columns".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Episode length `H`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Maximum per-step consumption `L`.
    pub fn max_consumption(&self) -> usize {
        self.max_consumption
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Largest meaningful budget, `L * H`.
    pub fn max_budget(&self) -> usize {
        self.max_consumption * self.horizon
    }

    /// Raw catalog vector of a context (inspection and feature maps).
    pub fn context_value(&self, theta: ContextId) -> &[f64] {
        &self.contexts[theta.0]
    }

    /// Raw value of an action (price, bid, ...).
    pub fn action_value(&self, a: ActionId) -> f64 {
        self.actions[a.0]
    }

    /// Conversion probability, ignoring any step dependence.
    pub fn rho(&self, theta: ContextId, a: ActionId) -> f64 {
        self.rho[theta.0 * self.num_actions() + a.0]
    }

    /// Conversion probability at step `h` (1-based). Falls back to the
    /// stationary table when the environment has no step dependence.
    pub fn rho_at(&self, h: usize, theta: ContextId, a: ActionId) -> f64 {
        match &self.rho_step {
            Some(cube) => {
                cube[((h - 1) * self.num_contexts() + theta.0) * self.num_actions() + a.0]
            }
            None => self.rho(theta, a),
        }
    }

    pub fn has_step_dependent_rho(&self) -> bool {
        self.rho_step.is_some()
    }

    pub fn reward(&self, theta: ContextId, a: ActionId) -> f64 {
        self.reward[theta.0 * self.num_actions() + a.0]
    }

    pub fn consumption(&self, theta: ContextId, a: ActionId) -> usize {
        self.consumption[theta.0 * self.num_actions() + a.0]
    }

    /// Arrival probability of `theta` at step `h` (1-based).
    pub fn lambda(&self, h: usize, theta: ContextId) -> f64 {
        self.lambda[(h - 1) * self.num_contexts() + theta.0]
    }

    /// Membership test for the feasible set `A(b, theta)`: affordable and
    /// non-negatively rewarded. Hot-loop companion of [`feasible_actions`].
    #[inline]
    pub fn is_feasible(&self, b: usize, theta: ContextId, a: ActionId) -> bool {
        let i = theta.0 * self.num_actions() + a.0;
        self.reward[i] >= 0.0 && self.consumption[i] <= b
    }

    /// The feasible set `A(b, theta)`, ascending by action id. Always
    /// contains the null action.
    pub fn feasible_actions(
        &self,
        b: usize,
        theta: ContextId,
    ) -> Result<Vec<ActionId>, ModelError> {
        if theta.0 >= self.num_contexts() {
            return Err(ModelError::InvalidContext(theta.0, self.num_contexts()));
        }
        if b > self.max_budget() {
            return Err(ModelError::InvalidBudget(b, self.max_budget()));
        }
        Ok((0..self.num_actions())
            .map(ActionId)
            .filter(|&a| self.is_feasible(b, theta, a))
            .collect())
    }

    /// Draws a context from `lambda[h]` by inverse CDF.
    pub fn sample_context<R: Rng + ?Sized>(
        &self,
        h: usize,
        rng: &mut R,
    ) -> Result<ContextId, ModelError> {
        if h < 1 || h > self.horizon {
            return Err(ModelError::InvalidStep(h, self.horizon));
        }
        let n_ctx = self.num_contexts();
        let row = &self.lambda_cdf[(h - 1) * n_ctx..h * n_ctx];
        let u: f64 = rng.random();
        let idx = row.partition_point(|&c| c <= u);
        Ok(ContextId(idx.min(n_ctx - 1)))
    }

    /// Simulates one time step: draws the conversion and returns the outcome.
    ///
    /// The caller must pass a feasible action; an infeasible one is a
    /// simulation bug, not a learner error.
    pub fn step<R: Rng + ?Sized>(
        &self,
        h: usize,
        b: usize,
        theta: ContextId,
        action: ActionId,
        rng: &mut R,
    ) -> Result<StepOutcome, ModelError> {
        if h < 1 || h > self.horizon {
            return Err(ModelError::InvalidStep(h, self.horizon));
        }
        if theta.0 >= self.num_contexts() {
            return Err(ModelError::InvalidContext(theta.0, self.num_contexts()));
        }
        if action.0 >= self.num_actions() {
            return Err(ModelError::InvalidAction(action.0, self.num_actions()));
        }
        if !self.is_feasible(b, theta, action) {
            return Err(ModelError::InfeasibleAction {
                h,
                b,
                theta,
                action,
            });
        }
        let u: f64 = rng.random();
        let conversion = u < self.rho_at(h, theta, action);
        let y = conversion as usize;
        Ok(StepOutcome {
            context: theta,
            action,
            conversion,
            reward_earned: self.reward(theta, action) * y as f64,
            consumed: self.consumption(theta, action) * y,
        })
    }

    /// Materializes a named feature map. `"theta-a"` concatenates the raw
    /// context vector with the raw action value; null pairs map to zero.
    pub fn feature_map(&self, name: &str) -> Result<FeatureMap, ModelError> {
        match name {
            "theta-a" => {
                let ctx_dim = self
                    .contexts
                    .iter()
                    .map(|v| v.len())
                    .max()
                    .unwrap_or(0);
                let dim = ctx_dim + 1;
                let n_act = self.num_actions();
                let mut data = vec![0.0; self.num_contexts() * n_act * dim];
                for c in 1..self.num_contexts() {
                    for a in 1..n_act {
                        let base = (c * n_act + a) * dim;
                        for (j, &x) in self.contexts[c].iter().enumerate() {
                            data[base + j] = x;
                        }
                        data[base + ctx_dim] = self.actions[a];
                    }
                }
                Ok(FeatureMap {
                    dim,
                    n_actions: n_act,
                    data,
                })
            }
            other => Err(ModelError::UnknownFeatureMap(other.to_string())),
        }
    }
}
