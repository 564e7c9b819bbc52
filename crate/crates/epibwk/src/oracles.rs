//! Confidence-bound oracles: from labeled conversion data and a confidence
//! level, produce pointwise upper/lower bounds on the conversion probability
//! with simultaneous coverage.
//!
//! All oracles clamp into `[0,1]` and pin the null action (and the null
//! context, whose conversion probability is known to be zero) to `(0, 0)`.

use crate::glm::GlmBounds;
use crate::model::{ActionId, ContextId, EnvironmentModel, FeatureMap, ModelError};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("labeled record {index} uses the null action")]
    NullActionRecord { index: usize },
    #[error("labeled record {index} is out of range for the catalog")]
    RecordOutOfRange { index: usize },
    #[error("labeled record {index} has step {step} outside 1..={horizon}")]
    StepOutOfRange {
        index: usize,
        step: usize,
        horizon: usize,
    },
    #[error("delta {0} outside (0, 1)")]
    InvalidDelta(f64),
    #[error("invalid oracle spec: {0}")]
    Spec(String),
    #[error(
        "newton solve did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NewtonDivergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One conversion observation. `step` is the 1-based time step within the
/// episode that produced it (used by step-dependent oracles).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRecord {
    pub context: ContextId,
    pub action: ActionId,
    pub step: usize,
    pub converted: bool,
}

/// Conversion observations collected across episodes. Null-action steps are
/// never stored; their conversion probability is already known.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub records: Vec<LabeledRecord>,
}

impl LabeledDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: LabeledRecord) -> Result<(), OracleError> {
        if record.action.0 == 0 {
            return Err(OracleError::NullActionRecord {
                index: self.records.len(),
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Dense bound tables, either one row per context or one per (step, context).
#[derive(Debug, Clone)]
pub struct BoundsTable {
    per_step: bool,
    n_ctx: usize,
    n_act: usize,
    lcb: Vec<f64>,
    ucb: Vec<f64>,
}

impl BoundsTable {
    fn index(&self, h: usize, theta: ContextId, a: ActionId) -> usize {
        let row = if self.per_step {
            (h - 1) * self.n_ctx + theta.0
        } else {
            theta.0
        };
        row * self.n_act + a.0
    }
}

/// The output of a CB oracle: pointwise `lcb <= rho <= ucb` with
/// simultaneous coverage `1 - delta`. Immutable once built.
#[derive(Debug, Clone)]
pub enum ConfidenceBounds {
    Table { table: BoundsTable, delta: f64 },
    Glm(GlmBounds),
}

impl ConfidenceBounds {
    /// `(lcb, ucb)` at step `h` (1-based) for `(theta, a)`.
    #[inline]
    pub fn pair(&self, h: usize, theta: ContextId, a: ActionId) -> (f64, f64) {
        match self {
            ConfidenceBounds::Table { table, .. } => {
                let i = table.index(h, theta, a);
                (table.lcb[i], table.ucb[i])
            }
            ConfidenceBounds::Glm(g) => g.pair(theta, a),
        }
    }

    pub fn ucb(&self, h: usize, theta: ContextId, a: ActionId) -> f64 {
        self.pair(h, theta, a).1
    }

    pub fn lcb(&self, h: usize, theta: ContextId, a: ActionId) -> f64 {
        self.pair(h, theta, a).0
    }

    pub fn delta(&self) -> f64 {
        match self {
            ConfidenceBounds::Table { delta, .. } => *delta,
            ConfidenceBounds::Glm(g) => g.delta(),
        }
    }

    pub fn is_per_step(&self) -> bool {
        match self {
            ConfidenceBounds::Table { table, .. } => table.per_step,
            ConfidenceBounds::Glm(_) => false,
        }
    }

    /// Builds bounds from explicit dense tables (row-major over
    /// `[step x] context x action`), validating range, order, and the null
    /// conventions. Meant for custom oracles and randomized tests.
    pub fn from_tables(
        per_step: bool,
        h_len: usize,
        n_ctx: usize,
        n_act: usize,
        lcb: Vec<f64>,
        ucb: Vec<f64>,
        delta: f64,
    ) -> Result<Self, OracleError> {
        let rows = if per_step { h_len } else { 1 };
        let expected = rows * n_ctx * n_act;
        if lcb.len() != expected || ucb.len() != expected {
            return Err(OracleError::Spec(format!(
                "bound tables must have {expected} entries"
            )));
        }
        for i in 0..expected {
            if !(0.0 <= lcb[i] && lcb[i] <= ucb[i] && ucb[i] <= 1.0) {
                return Err(OracleError::Spec(format!(
                    "bounds out of order at flat index {i}"
                )));
            }
            let a = i % n_act;
            let c = (i / n_act) % n_ctx;
            if (a == 0 || c == 0) && (lcb[i] != 0.0 || ucb[i] != 0.0) {
                return Err(OracleError::Spec(
                    "null rows and columns must be pinned to (0, 0)".into(),
                ));
            }
        }
        Ok(ConfidenceBounds::Table {
            table: BoundsTable {
                per_step,
                n_ctx,
                n_act,
                lcb,
                ucb,
            },
            delta,
        })
    }

    /// The no-data bounds: `[0, 1]` on every informative pair, `(0, 0)` on
    /// null rows and columns.
    pub fn vacuous(n_ctx: usize, n_act: usize, delta: f64) -> Self {
        let mut lcb = vec![0.0; n_ctx * n_act];
        let mut ucb = vec![0.0; n_ctx * n_act];
        for c in 1..n_ctx {
            for a in 1..n_act {
                lcb[c * n_act + a] = 0.0;
                ucb[c * n_act + a] = 1.0;
            }
        }
        ConfidenceBounds::Table {
            table: BoundsTable {
                per_step: false,
                n_ctx,
                n_act,
                lcb,
                ucb,
            },
            delta,
        }
    }
}

fn check_delta(delta: f64) -> Result<(), OracleError> {
    if delta <= 0.0 || delta >= 1.0 {
        return Err(OracleError::InvalidDelta(delta));
    }
    Ok(())
}

fn check_records(
    data: &LabeledDataset,
    n_ctx: usize,
    n_act: usize,
    horizon: Option<usize>,
) -> Result<(), OracleError> {
    for (index, r) in data.records.iter().enumerate() {
        if r.action.0 == 0 {
            return Err(OracleError::NullActionRecord { index });
        }
        if r.context.0 >= n_ctx || r.action.0 >= n_act {
            return Err(OracleError::RecordOutOfRange { index });
        }
        if let Some(h_len) = horizon {
            if r.step < 1 || r.step > h_len {
                return Err(OracleError::StepOutOfRange {
                    index,
                    step: r.step,
                    horizon: h_len,
                });
            }
        }
    }
    Ok(())
}

/// Per-action empirical means with Hoeffding radii, constant in the context.
pub fn karm_stationary_cb(
    data: &LabeledDataset,
    delta: f64,
    n_ctx: usize,
    n_act: usize,
) -> Result<ConfidenceBounds, OracleError> {
    check_delta(delta)?;
    check_records(data, n_ctx, n_act, None)?;
    let mut pulls = vec![0usize; n_act];
    let mut wins = vec![0usize; n_act];
    for r in &data.records {
        pulls[r.action.0] += 1;
        wins[r.action.0] += r.converted as usize;
    }
    let n = data.len().max(1) as f64;
    let log_term = (2.0 * n * n_act as f64 / delta).ln();
    let mut lcb = vec![0.0; n_ctx * n_act];
    let mut ucb = vec![0.0; n_ctx * n_act];
    for a in 1..n_act {
        let m = pulls[a].max(1) as f64;
        let mean = wins[a] as f64 / m;
        let radius = (log_term / m).sqrt();
        let lo = (mean - radius).clamp(0.0, 1.0);
        let hi = (mean + radius).clamp(0.0, 1.0);
        for c in 1..n_ctx {
            lcb[c * n_act + a] = lo;
            ucb[c * n_act + a] = hi;
        }
    }
    Ok(ConfidenceBounds::Table {
        table: BoundsTable {
            per_step: false,
            n_ctx,
            n_act,
            lcb,
            ucb,
        },
        delta,
    })
}

/// Per-(step, action) empirical means with Hoeffding radii; the step tag of
/// each record selects the row.
pub fn karm_nonstationary_cb(
    data: &LabeledDataset,
    delta: f64,
    n_ctx: usize,
    n_act: usize,
    horizon: usize,
) -> Result<ConfidenceBounds, OracleError> {
    check_delta(delta)?;
    check_records(data, n_ctx, n_act, Some(horizon))?;
    let mut pulls = vec![0usize; horizon * n_act];
    let mut wins = vec![0usize; horizon * n_act];
    for r in &data.records {
        let i = (r.step - 1) * n_act + r.action.0;
        pulls[i] += 1;
        wins[i] += r.converted as usize;
    }
    let n = data.len().max(1) as f64;
    let log_term = (2.0 * n * horizon as f64 * n_act as f64 / delta).ln();
    let mut lcb = vec![0.0; horizon * n_ctx * n_act];
    let mut ucb = vec![0.0; horizon * n_ctx * n_act];
    for h in 0..horizon {
        for a in 1..n_act {
            let m = pulls[h * n_act + a].max(1) as f64;
            let mean = wins[h * n_act + a] as f64 / m;
            let radius = (log_term / m).sqrt();
            let lo = (mean - radius).clamp(0.0, 1.0);
            let hi = (mean + radius).clamp(0.0, 1.0);
            for c in 1..n_ctx {
                let i = (h * n_ctx + c) * n_act + a;
                lcb[i] = lo;
                ucb[i] = hi;
            }
        }
    }
    Ok(ConfidenceBounds::Table {
        table: BoundsTable {
            per_step: true,
            n_ctx,
            n_act,
            lcb,
            ucb,
        },
        delta,
    })
}

/// Degenerate bounds equal to the true conversion probabilities. Test and
/// skyline use only: a learner holding these knows the conversion model.
pub fn exact_cb(env: &EnvironmentModel) -> ConfidenceBounds {
    let n_ctx = env.num_contexts();
    let n_act = env.num_actions();
    let per_step = env.has_step_dependent_rho();
    let rows = if per_step { env.horizon() } else { 1 };
    let mut values = vec![0.0; rows * n_ctx * n_act];
    for h in 0..rows {
        for c in 0..n_ctx {
            for a in 0..n_act {
                values[(h * n_ctx + c) * n_act + a] =
                    env.rho_at(h + 1, ContextId(c), ActionId(a));
            }
        }
    }
    ConfidenceBounds::Table {
        table: BoundsTable {
            per_step,
            n_ctx,
            n_act,
            lcb: values.clone(),
            ucb: values,
        },
        delta: 0.0,
    }
}

/// Oracle selection and hyperparameters, as they appear in run configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleConfig {
    pub oracle: OracleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default = "default_feature_map")]
    pub feature_map: String,
    /// Experiment-mode override of the regression radius multiplier; the
    /// theoretical value is the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_override: Option<f64>,
}

fn default_feature_map() -> String {
    "theta-a".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Karm,
    KarmNonstat,
    Linear,
    Logistic,
    Exact,
}

impl OracleConfig {
    pub fn of_kind(kind: OracleKind) -> Self {
        OracleConfig {
            oracle: kind,
            lambda: None,
            kappa_f: None,
            ell_f: None,
            q: None,
            feature_map: default_feature_map(),
            gamma_override: None,
        }
    }

    /// Resolves the feature map and hyperparameters against a concrete
    /// environment. `total_episodes` supplies the sample-budget hint used by
    /// the default ridge weight.
    pub fn prepare(
        &self,
        env: &EnvironmentModel,
        total_episodes: usize,
    ) -> Result<PreparedOracle, OracleError> {
        let n_ctx = env.num_contexts();
        let n_act = env.num_actions();
        let horizon = env.horizon();
        let kind = match self.oracle {
            OracleKind::Karm => PreparedKind::Karm,
            OracleKind::KarmNonstat => PreparedKind::KarmNonstat,
            OracleKind::Exact => PreparedKind::Exact(Arc::new(exact_cb(env))),
            OracleKind::Linear | OracleKind::Logistic => {
                let features = Arc::new(env.feature_map(&self.feature_map)?);
                let q = self.q.unwrap_or_else(|| max_feature_norm(&features, n_ctx, n_act));
                let logistic = self.oracle == OracleKind::Logistic;
                let link = if logistic {
                    crate::glm::LinkFn::Logistic
                } else {
                    crate::glm::LinkFn::Linear
                };
                let kappa_f = self.kappa_f.unwrap_or(if logistic {
                    (-2.0 * q).exp()
                } else {
                    1.0
                });
                let ell_f = self.ell_f.unwrap_or(if logistic { 0.25 } else { 1.0 });
                let spec = crate::glm::GlmSpec {
                    dim: features.dim,
                    link,
                    ell_f,
                    kappa_f,
                    lambda: self.lambda,
                    horizon_hint: horizon * total_episodes,
                    q,
                };
                spec.validate()?;
                if logistic {
                    PreparedKind::Logistic {
                        features,
                        spec,
                        gamma_override: self.gamma_override,
                    }
                } else {
                    PreparedKind::Linear { features, spec }
                }
            }
        };
        Ok(PreparedOracle {
            kind,
            n_ctx,
            n_act,
            horizon,
        })
    }
}

fn max_feature_norm(features: &FeatureMap, n_ctx: usize, n_act: usize) -> f64 {
    let mut best: f64 = 1.0;
    for c in 0..n_ctx {
        for a in 0..n_act {
            let norm: f64 = features
                .phi(ContextId(c), ActionId(a))
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            best = best.max(norm);
        }
    }
    best
}

enum PreparedKind {
    Karm,
    KarmNonstat,
    Linear {
        features: Arc<FeatureMap>,
        spec: crate::glm::GlmSpec,
    },
    Logistic {
        features: Arc<FeatureMap>,
        spec: crate::glm::GlmSpec,
        gamma_override: Option<f64>,
    },
    Exact(Arc<ConfidenceBounds>),
}

/// An oracle bound to an environment's catalog, ready to refit on data.
pub struct PreparedOracle {
    kind: PreparedKind,
    n_ctx: usize,
    n_act: usize,
    horizon: usize,
}

impl PreparedOracle {
    pub fn fit(
        &self,
        data: &LabeledDataset,
        delta: f64,
    ) -> Result<Arc<ConfidenceBounds>, OracleError> {
        match &self.kind {
            PreparedKind::Karm => Ok(Arc::new(karm_stationary_cb(
                data,
                delta,
                self.n_ctx,
                self.n_act,
            )?)),
            PreparedKind::KarmNonstat => Ok(Arc::new(karm_nonstationary_cb(
                data,
                delta,
                self.n_ctx,
                self.n_act,
                self.horizon,
            )?)),
            PreparedKind::Linear { features, spec } => Ok(Arc::new(crate::glm::glm_cb(
                data,
                Arc::clone(features),
                spec,
                delta,
            )?)),
            PreparedKind::Logistic {
                features,
                spec,
                gamma_override,
            } => Ok(Arc::new(crate::glm::logistic_cb(
                data,
                Arc::clone(features),
                spec,
                delta,
                *gamma_override,
            )?)),
            PreparedKind::Exact(bounds) => Ok(Arc::clone(bounds)),
        }
    }
}
