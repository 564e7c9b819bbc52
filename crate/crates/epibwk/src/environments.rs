//! Builders instantiating the environment model for pricing, procurement,
//! and first-price auction applications, plus the two benchmark instances.

use crate::model::{EnvFile, EnvironmentModel, ModelError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("conversion probability {rho} at (context {context}, action {action}) outside [0,1]")]
    RhoOutOfRange {
        context: usize,
        action: usize,
        rho: f64,
    },
    #[error("winning probabilities must be nondecreasing in the bid")]
    NonMonotoneMu,
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandLink {
    Linear,
    Logistic,
}

impl DemandLink {
    fn eval(&self, w: f64) -> f64 {
        match self {
            DemandLink::Linear => w,
            DemandLink::Logistic => 1.0 / (1.0 + (-w).exp()),
        }
    }
}

/// Uniform context rows for `h` steps over `n` payload contexts, with zero
/// mass on the null context.
pub fn uniform_lambda(horizon: usize, n_payload: usize) -> Vec<Vec<f64>> {
    let mut row = vec![0.0; n_payload + 1];
    for p in row.iter_mut().skip(1) {
        *p = 1.0 / n_payload as f64;
    }
    vec![row; horizon]
}

/// Dynamic pricing: post one of `prices` to each arriving customer; a sale
/// earns the price and consumes one unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricingSpec {
    pub horizon: usize,
    /// Non-null price grid, ascending.
    pub prices: Vec<f64>,
    /// Payload context vectors (the null context is prepended).
    pub contexts: Vec<Vec<f64>>,
    /// Utility weights; same dimension as the context vectors.
    pub mu_bar: Vec<f64>,
    /// Price dis-utility.
    pub u0: f64,
    pub demand: DemandLink,
    /// `horizon` rows over the full catalog (null context first).
    pub lambda: Vec<Vec<f64>>,
}

pub fn build_pricing(spec: &PricingSpec) -> Result<EnvironmentModel, BuildError> {
    if spec.prices.is_empty() || spec.contexts.is_empty() {
        return Err(BuildError::Spec("need at least one price and one context".into()));
    }
    if spec.prices.iter().any(|&p| p <= 0.0) {
        return Err(BuildError::Spec("prices must be positive".into()));
    }
    let dim = spec.mu_bar.len();
    if spec.contexts.iter().any(|c| c.len() != dim) {
        return Err(BuildError::Spec(format!(
            "every context must have dimension {dim}"
        )));
    }
    let n_ctx = spec.contexts.len() + 1;
    let n_act = spec.prices.len() + 1;
    let mut contexts = vec![vec![0.0; dim]];
    contexts.extend(spec.contexts.iter().cloned());
    let mut actions = vec![0.0];
    actions.extend(spec.prices.iter().copied());

    let mut rho = vec![vec![0.0; n_act]; n_ctx];
    let mut reward = vec![vec![0.0; n_act]; n_ctx];
    // A sale always costs one unit, whatever the context; the null context
    // never converts, so nothing is ever consumed there.
    let cons_row: Vec<usize> = (0..n_act).map(|a| usize::from(a != 0)).collect();
    let consumption = vec![cons_row; n_ctx];
    for c in 1..n_ctx {
        let utility: f64 = spec.mu_bar
            .iter()
            .zip(&contexts[c])
            .map(|(m, x)| m * x)
            .sum();
        for a in 1..n_act {
            let p = spec.demand.eval(utility - spec.u0 * actions[a]);
            if !(0.0..=1.0).contains(&p) {
                return Err(BuildError::RhoOutOfRange {
                    context: c,
                    action: a,
                    rho: p,
                });
            }
            rho[c][a] = p;
            reward[c][a] = actions[a];
        }
    }
    let r_max = spec.prices.iter().cloned().fold(f64::MIN, f64::max);
    Ok(EnvironmentModel::from_file(EnvFile {
        h: spec.horizon,
        l: 1,
        r_max,
        contexts,
        actions,
        rho,
        reward,
        consumption,
        lambda: spec.lambda.clone(),
        rho_step: None,
    })?)
}

/// Dynamic procurement: offer a price in `{0} u [L]` to each arriving
/// worker; an acceptance earns unit reward and consumes the offered price.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcurementSpec {
    pub horizon: usize,
    /// Largest offer; the grid is `0..=max_price`.
    pub max_price: usize,
    pub contexts: Vec<Vec<f64>>,
    pub mu_bar: Vec<f64>,
    pub u0: f64,
    pub demand: DemandLink,
    pub lambda: Vec<Vec<f64>>,
}

pub fn build_procurement(spec: &ProcurementSpec) -> Result<EnvironmentModel, BuildError> {
    if spec.max_price == 0 || spec.contexts.is_empty() {
        return Err(BuildError::Spec("need a positive max price and contexts".into()));
    }
    let dim = spec.mu_bar.len();
    if spec.contexts.iter().any(|c| c.len() != dim) {
        return Err(BuildError::Spec(format!(
            "every context must have dimension {dim}"
        )));
    }
    let n_ctx = spec.contexts.len() + 1;
    let n_act = spec.max_price + 1;
    let mut contexts = vec![vec![0.0; dim]];
    contexts.extend(spec.contexts.iter().cloned());
    let actions: Vec<f64> = (0..n_act).map(|a| a as f64).collect();

    let mut rho = vec![vec![0.0; n_act]; n_ctx];
    let mut reward = vec![vec![0.0; n_act]; n_ctx];
    // Acceptance at offer a costs a units, whatever the context.
    let cons_row: Vec<usize> = (0..n_act).collect();
    let consumption = vec![cons_row; n_ctx];
    for c in 1..n_ctx {
        let disutility: f64 = spec.mu_bar
            .iter()
            .zip(&contexts[c])
            .map(|(m, x)| m * x)
            .sum();
        for a in 1..n_act {
            let p = spec.demand.eval(spec.u0 * a as f64 - disutility);
            if !(0.0..=1.0).contains(&p) {
                return Err(BuildError::RhoOutOfRange {
                    context: c,
                    action: a,
                    rho: p,
                });
            }
            rho[c][a] = p;
            reward[c][a] = 1.0;
        }
    }
    Ok(EnvironmentModel::from_file(EnvFile {
        h: spec.horizon,
        l: spec.max_price,
        r_max: 1.0,
        contexts,
        actions,
        rho,
        reward,
        consumption,
        lambda: spec.lambda.clone(),
        rho_step: None,
    })?)
}

/// Highest-other-bid model for the auction builder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HobModel {
    /// One winning-probability curve `mu[a-1]` for bids `1..=max_bid`,
    /// shared by every step.
    Identical { mu: Vec<f64> },
    /// A curve per step: `mu[h-1][a-1]`.
    Distinct { mu: Vec<Vec<f64>> },
}

/// First-price auctions: private integer values as contexts, integer bids
/// as actions; a win earns value minus bid and consumes the bid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuctionSpec {
    pub horizon: usize,
    /// Bid grid is `0..=max_bid`.
    pub max_bid: usize,
    /// Payload private values, positive integers.
    pub values: Vec<usize>,
    /// `horizon` rows over the full catalog (null context first).
    pub lambda: Vec<Vec<f64>>,
    pub hob: HobModel,
}

fn check_mu(mu: &[f64], max_bid: usize) -> Result<(), BuildError> {
    if mu.len() != max_bid {
        return Err(BuildError::Spec(format!(
            "winning-probability curve must have {max_bid} entries"
        )));
    }
    if mu.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(BuildError::Spec("winning probabilities must lie in [0,1]".into()));
    }
    if mu.windows(2).any(|w| w[1] < w[0]) {
        return Err(BuildError::NonMonotoneMu);
    }
    Ok(())
}

pub fn build_auction(spec: &AuctionSpec) -> Result<EnvironmentModel, BuildError> {
    if spec.max_bid == 0 || spec.values.is_empty() {
        return Err(BuildError::Spec("need a positive max bid and values".into()));
    }
    if spec.values.iter().any(|&v| v == 0) {
        return Err(BuildError::Spec("private values must be positive".into()));
    }
    let n_ctx = spec.values.len() + 1;
    let n_act = spec.max_bid + 1;
    let mut contexts = vec![vec![0.0]];
    contexts.extend(spec.values.iter().map(|&v| vec![v as f64]));
    let actions: Vec<f64> = (0..n_act).map(|a| a as f64).collect();

    // Reward theta - a may be negative in the catalog; feasibility filters
    // those bids out, which is what caps bids at the private value (and at
    // zero for the null context). A winning bid of a costs a units.
    let mut reward = vec![vec![0.0; n_act]; n_ctx];
    let cons_row: Vec<usize> = (0..n_act).collect();
    let consumption = vec![cons_row; n_ctx];
    for c in 0..n_ctx {
        let value = if c == 0 { 0.0 } else { spec.values[c - 1] as f64 };
        for a in 1..n_act {
            reward[c][a] = value - a as f64;
        }
    }
    let max_value = *spec.values.iter().max().unwrap() as f64;
    let r_max = max_value - 1.0;

    let (rho, rho_step) = match &spec.hob {
        HobModel::Identical { mu } => {
            check_mu(mu, spec.max_bid)?;
            let mut rho = vec![vec![0.0; n_act]; n_ctx];
            for c in 1..n_ctx {
                for a in 1..n_act {
                    rho[c][a] = mu[a - 1];
                }
            }
            (rho, None)
        }
        HobModel::Distinct { mu } => {
            if mu.len() != spec.horizon {
                return Err(BuildError::Spec(format!(
                    "distinct-items model needs {} curves",
                    spec.horizon
                )));
            }
            for row in mu {
                check_mu(row, spec.max_bid)?;
            }
            // The stationary table holds the first step's curve; the cube
            // carries the step dependence used by simulation and solvers.
            let mut rho = vec![vec![0.0; n_act]; n_ctx];
            for c in 1..n_ctx {
                for a in 1..n_act {
                    rho[c][a] = mu[0][a - 1];
                }
            }
            let mut cube = vec![vec![vec![0.0; n_act]; n_ctx]; spec.horizon];
            for h in 0..spec.horizon {
                for c in 1..n_ctx {
                    for a in 1..n_act {
                        cube[h][c][a] = mu[h][a - 1];
                    }
                }
            }
            (rho, Some(cube))
        }
    };

    Ok(EnvironmentModel::from_file(EnvFile {
        h: spec.horizon,
        l: spec.max_bid,
        r_max,
        contexts,
        actions,
        rho,
        reward,
        consumption,
        lambda: spec.lambda.clone(),
        rho_step,
    })?)
}

/// The non-contextual auction benchmark: values uniform on `1..=k+1`,
/// bids `0..=k`, winning probability `a / (k+1)`, 24 steps.
pub fn paper_c1(k: usize) -> Result<EnvironmentModel, BuildError> {
    let values: Vec<usize> = (1..=k + 1).collect();
    let mu: Vec<f64> = (1..=k).map(|a| a as f64 / (k + 1) as f64).collect();
    build_auction(&AuctionSpec {
        horizon: 24,
        max_bid: k,
        values: values.clone(),
        lambda: uniform_lambda(24, values.len()),
        hob: HobModel::Identical { mu },
    })
}

/// The logistic-pricing benchmark: contexts on the 100x100 unit grid,
/// integer prices `1..=10`, conversion `sigma((x1 + x2 - a) / sqrt(3))`,
/// 24 steps.
pub fn paper_c2() -> Result<EnvironmentModel, BuildError> {
    let mut contexts = Vec::with_capacity(100 * 100);
    for i in 0..100 {
        for j in 0..100 {
            contexts.push(vec![i as f64 / 99.0, j as f64 / 99.0]);
        }
    }
    let s = 1.0 / 3.0_f64.sqrt();
    build_pricing(&PricingSpec {
        horizon: 24,
        prices: (1..=10).map(|p| p as f64).collect(),
        lambda: uniform_lambda(24, contexts.len()),
        contexts,
        mu_bar: vec![s, s],
        u0: s,
        demand: DemandLink::Logistic,
    })
}
