//! Generalized-linear conversion oracles: penalized regression on feature
//! vectors plus ellipsoid-style confidence radii.

use crate::model::{ActionId, ContextId, FeatureMap};
use crate::oracles::{ConfidenceBounds, LabeledDataset, OracleError};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Inverse link function mapping the linear index to a conversion
/// probability.
#[derive(Debug, Clone, Copy)]
pub enum LinkFn {
    Linear,
    Logistic,
    Custom {
        f: fn(f64) -> f64,
        df: fn(f64) -> f64,
    },
}

impl LinkFn {
    #[inline]
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            LinkFn::Linear => w,
            LinkFn::Logistic => 1.0 / (1.0 + (-w).exp()),
            LinkFn::Custom { f, .. } => f(w),
        }
    }

    #[inline]
    pub fn deriv(&self, w: f64) -> f64 {
        match self {
            LinkFn::Linear => 1.0,
            LinkFn::Logistic => {
                let p = self.eval(w);
                p * (1.0 - p)
            }
            LinkFn::Custom { df, .. } => df(w),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, LinkFn::Linear)
    }
}

/// Model description for the regression oracles.
#[derive(Debug, Clone)]
pub struct GlmSpec {
    pub dim: usize,
    pub link: LinkFn,
    /// Lipschitz constant of the link.
    pub ell_f: f64,
    /// Curvature lower bound of the link on the admissible domain.
    pub kappa_f: f64,
    /// Ridge weight; when absent the sample-budget default is used.
    pub lambda: Option<f64>,
    /// Expected total number of observations, for the default ridge weight.
    pub horizon_hint: usize,
    /// Bound on feature norms.
    pub q: f64,
}

impl GlmSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.dim == 0 {
            return Err(OracleError::Spec("feature dimension must be positive".into()));
        }
        if self.ell_f <= 0.0 || self.kappa_f <= 0.0 || self.q <= 0.0 {
            return Err(OracleError::Spec(
                "ell_f, kappa_f and q must be positive".into(),
            ));
        }
        if let Some(l) = self.lambda {
            if l <= 0.0 {
                return Err(OracleError::Spec("lambda must be positive".into()));
            }
        }
        Ok(())
    }

    /// Ridge weight: configured value, or
    /// `4 d log(1 + T / d^2) / kappa_f^2` from the sample-budget hint.
    pub fn lambda_value(&self) -> f64 {
        self.lambda.unwrap_or_else(|| {
            let d = self.dim as f64;
            let t = self.horizon_hint.max(1) as f64;
            4.0 * d * (1.0 + t / (d * d)).ln() / (self.kappa_f * self.kappa_f)
        })
    }
}

/// Fitted coefficients and design matrix of a regression oracle.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub mu_hat: Vec<f64>,
    pub n: usize,
    pub lambda: f64,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
}

impl GlmFit {
    pub fn design_matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// `sqrt(phi^T V^{-1} phi)`.
    pub fn vinv_norm(&self, phi: &[f64]) -> f64 {
        quad_form(&self.v_inv, phi).max(0.0).sqrt()
    }
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut total = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[(i, j)] * x[j];
        }
        total += x[i] * row;
    }
    total
}

fn gather<'a>(
    data: &LabeledDataset,
    features: &'a FeatureMap,
) -> Result<Vec<(&'a [f64], f64)>, OracleError> {
    data.records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            if r.action.0 == 0 {
                return Err(OracleError::NullActionRecord { index });
            }
            Ok((features.phi(r.context, r.action), r.converted as usize as f64))
        })
        .collect()
}

fn invert_spd(v: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    v.clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| OracleError::Spec("design matrix is not positive definite".into()))
}

/// Solves the penalized score equation
/// `sum_n [Y_n - f(phi_n^T mu)] phi_n = kappa_f * lambda * mu`.
///
/// The linear link uses the closed-form ridge solution; other links run a
/// damped Newton iteration with a fixed summation order, so the result is
/// deterministic in the data order.
pub fn fit_glm(
    data: &LabeledDataset,
    features: &FeatureMap,
    spec: &GlmSpec,
) -> Result<GlmFit, OracleError> {
    spec.validate()?;
    if features.dim != spec.dim {
        return Err(OracleError::Spec(format!(
            "feature map dimension {} does not match spec dimension {}",
            features.dim, spec.dim
        )));
    }
    let rows = gather(data, features)?;
    let d = spec.dim;
    let lambda = spec.lambda_value();
    let mut v = DMatrix::<f64>::identity(d, d) * lambda;
    for (phi, _) in &rows {
        for i in 0..d {
            for j in 0..d {
                v[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    let v_inv = invert_spd(&v)?;

    let mu_hat = if spec.link.is_linear() {
        let mut rhs = DVector::<f64>::zeros(d);
        for (phi, y) in &rows {
            for i in 0..d {
                rhs[i] += y * phi[i];
            }
        }
        &v_inv * rhs
    } else {
        newton_score(&rows, spec, lambda)?
    };

    Ok(GlmFit {
        mu_hat: mu_hat.iter().copied().collect(),
        n: rows.len(),
        lambda,
        v,
        v_inv,
    })
}

const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;

fn score(
    rows: &[(&[f64], f64)],
    spec: &GlmSpec,
    lambda: f64,
    mu: &DVector<f64>,
) -> DVector<f64> {
    let d = mu.len();
    let mut g = DVector::<f64>::zeros(d);
    for (phi, y) in rows {
        let z: f64 = (0..d).map(|i| phi[i] * mu[i]).sum();
        let resid = y - spec.link.eval(z);
        for i in 0..d {
            g[i] += resid * phi[i];
        }
    }
    g - spec.kappa_f * lambda * mu
}

fn newton_score(
    rows: &[(&[f64], f64)],
    spec: &GlmSpec,
    lambda: f64,
) -> Result<DVector<f64>, OracleError> {
    let d = spec.dim;
    let mut mu = DVector::<f64>::zeros(d);
    let mut g = score(rows, spec, lambda, &mu);
    for iter in 0..NEWTON_MAX_ITER {
        let g_norm = g.norm();
        if g_norm <= NEWTON_TOL {
            return Ok(mu);
        }
        // Negated Jacobian: sum f'(z) phi phi^T + kappa_f lambda I, positive
        // definite because f' >= 0 and lambda > 0.
        let mut j = DMatrix::<f64>::identity(d, d) * (spec.kappa_f * lambda);
        for (phi, _) in rows {
            let z: f64 = (0..d).map(|i| phi[i] * mu[i]).sum();
            let w = spec.link.deriv(z).max(0.0);
            for i in 0..d {
                for k in 0..d {
                    j[(i, k)] += w * phi[i] * phi[k];
                }
            }
        }
        let step = j
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&g))
            .ok_or_else(|| OracleError::NewtonDivergence {
                iterations: iter,
                residual: g_norm,
                last_iterate: mu.iter().copied().collect(),
            })?;
        // Damp until the score norm shrinks.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &mu + scale * &step;
            let g_new = score(rows, spec, lambda, &candidate);
            if g_new.norm() < g_norm {
                mu = candidate;
                g = g_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(OracleError::NewtonDivergence {
                iterations: iter,
                residual: g_norm,
                last_iterate: mu.iter().copied().collect(),
            });
        }
    }
    let residual = g.norm();
    if residual <= NEWTON_TOL {
        Ok(mu)
    } else {
        Err(OracleError::NewtonDivergence {
            iterations: NEWTON_MAX_ITER,
            residual,
            last_iterate: mu.iter().copied().collect(),
        })
    }
}

/// Feature-based bounds evaluated on demand from the fitted state: the
/// prediction `f(phi^T mu_hat)` widened by `radius_coeff * ||phi||_{V^-1}`.
#[derive(Debug, Clone)]
pub struct GlmBounds {
    mu_hat: Vec<f64>,
    v_inv: Vec<f64>,
    dim: usize,
    radius_coeff: f64,
    link: LinkFn,
    features: Arc<FeatureMap>,
    vacuous: bool,
    delta: f64,
}

impl GlmBounds {
    #[inline]
    pub fn pair(&self, theta: ContextId, a: ActionId) -> (f64, f64) {
        if theta.0 == 0 || a.0 == 0 {
            return (0.0, 0.0);
        }
        if self.vacuous {
            return (0.0, 1.0);
        }
        let phi = self.features.phi(theta, a);
        let mut z = 0.0;
        let mut quad = 0.0;
        for i in 0..self.dim {
            z += phi[i] * self.mu_hat[i];
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.v_inv[i * self.dim + j] * phi[j];
            }
            quad += phi[i] * row;
        }
        let p = self.link.eval(z);
        let radius = self.radius_coeff * quad.max(0.0).sqrt();
        ((p - radius).clamp(0.0, 1.0), (p + radius).clamp(0.0, 1.0))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_vacuous(&self) -> bool {
        self.vacuous
    }

    /// Midpoint estimate of the conversion probability.
    pub fn midpoint(&self, theta: ContextId, a: ActionId) -> f64 {
        let (lo, hi) = self.pair(theta, a);
        0.5 * (lo + hi)
    }
}

/// Confidence bounds for a generalized linear conversion model:
/// `f(phi^T mu_hat) +- gamma_N ||phi||_{V^-1}` clamped into `[0,1]`.
pub fn glm_cb(
    data: &LabeledDataset,
    features: Arc<FeatureMap>,
    spec: &GlmSpec,
    delta: f64,
) -> Result<ConfidenceBounds, OracleError> {
    if delta <= 0.0 || delta >= 1.0 {
        return Err(OracleError::InvalidDelta(delta));
    }
    let fit = fit_glm(data, &features, spec)?;
    let d = spec.dim as f64;
    let lambda = fit.lambda;
    let n = fit.n as f64;
    let gamma = lambda.sqrt()
        + (2.0 * (1.0 / delta).ln() + d * (1.0 + n / (d * lambda)).ln()).sqrt() / spec.kappa_f;
    Ok(ConfidenceBounds::Glm(GlmBounds {
        v_inv: flatten(&fit, spec.dim),
        mu_hat: fit.mu_hat,
        dim: spec.dim,
        radius_coeff: gamma,
        link: spec.link,
        features,
        vacuous: false,
        delta,
    }))
}

fn flatten(fit: &GlmFit, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[i * dim + j] = fit.v_inv[(i, j)];
        }
    }
    out
}

/// Confidence bounds for the logistic conversion model: a regularized
/// maximum-likelihood fit projected into the unit ball (by radial scaling),
/// with the logistic-specific radius. A non-converged fit falls back to the
/// zero coefficient vector with vacuous-width bounds.
pub fn logistic_cb(
    data: &LabeledDataset,
    features: Arc<FeatureMap>,
    spec: &GlmSpec,
    delta: f64,
    gamma_override: Option<f64>,
) -> Result<ConfidenceBounds, OracleError> {
    if delta <= 0.0 || delta >= 1.0 {
        return Err(OracleError::InvalidDelta(delta));
    }
    spec.validate()?;
    let rows = gather(data, &features)?;
    let d = spec.dim;
    let lambda = spec.lambda.unwrap_or(1.0);

    let (mu_tilde, vacuous) = match newton_logistic_mle(&rows, d, lambda) {
        Ok(mu) => (mu, false),
        Err(OracleError::NewtonDivergence { .. }) => (DVector::<f64>::zeros(d), true),
        Err(e) => return Err(e),
    };
    let norm = mu_tilde.norm();
    let mu_hat = if norm > 1.0 { mu_tilde / norm } else { mu_tilde };

    let mut v = DMatrix::<f64>::identity(d, d) * (lambda / spec.kappa_f);
    for (phi, _) in &rows {
        for i in 0..d {
            for j in 0..d {
                v[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    let v_inv = invert_spd(&v)?;
    let n = rows.len() as f64;
    let df = d as f64;
    let gamma = gamma_override.unwrap_or_else(|| {
        let log_term =
            df * 2.0_f64.ln() - delta.ln() + 0.5 * df * (1.0 + n / (4.0 * df * lambda)).ln();
        1.5 * lambda.sqrt() + 2.0 / lambda.sqrt() * log_term
    });
    let radius_coeff = gamma * (3.0 / (2.0 * spec.kappa_f)).sqrt();

    let mut v_inv_flat = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            v_inv_flat[i * d + j] = v_inv[(i, j)];
        }
    }
    Ok(ConfidenceBounds::Glm(GlmBounds {
        mu_hat: mu_hat.iter().copied().collect(),
        v_inv: v_inv_flat,
        dim: d,
        radius_coeff,
        link: LinkFn::Logistic,
        features,
        vacuous,
        delta,
    }))
}

/// Damped Newton ascent on the ridge-penalized logistic log-likelihood.
fn newton_logistic_mle(
    rows: &[(&[f64], f64)],
    d: usize,
    lambda: f64,
) -> Result<DVector<f64>, OracleError> {
    let loglik = |mu: &DVector<f64>| -> f64 {
        let mut ll = -0.5 * lambda * mu.norm_squared();
        for (phi, y) in rows {
            let z: f64 = (0..d).map(|i| phi[i] * mu[i]).sum();
            // log sigma(z) = -log(1+e^-z); log(1-sigma(z)) = -z - log(1+e^-z)
            let log1p_exp = if z > 30.0 { z } else { (1.0 + z.exp()).ln() };
            ll += y * z - log1p_exp;
        }
        ll
    };
    let grad = |mu: &DVector<f64>| -> DVector<f64> {
        let mut g = -lambda * mu;
        for (phi, y) in rows {
            let z: f64 = (0..d).map(|i| phi[i] * mu[i]).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for i in 0..d {
                g[i] += (y - p) * phi[i];
            }
        }
        g
    };

    let mut mu = DVector::<f64>::zeros(d);
    let mut ll = loglik(&mu);
    for iter in 0..NEWTON_MAX_ITER {
        let g = grad(&mu);
        if g.norm() <= NEWTON_TOL {
            return Ok(mu);
        }
        let mut h = DMatrix::<f64>::identity(d, d) * lambda;
        for (phi, _) in rows {
            let z: f64 = (0..d).map(|i| phi[i] * mu[i]).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            let w = p * (1.0 - p);
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        let step = h
            .cholesky()
            .map(|ch| ch.solve(&g))
            .ok_or_else(|| OracleError::NewtonDivergence {
                iterations: iter,
                residual: g.norm(),
                last_iterate: mu.iter().copied().collect(),
            })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &mu + scale * &step;
            let ll_new = loglik(&candidate);
            if ll_new > ll {
                mu = candidate;
                ll = ll_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No ascent direction improves the likelihood: we are at the
            // optimum up to floating-point resolution.
            return Ok(mu);
        }
    }
    let residual = grad(&mu).norm();
    if residual <= 1e-6 {
        Ok(mu)
    } else {
        Err(OracleError::NewtonDivergence {
            iterations: NEWTON_MAX_ITER,
            residual,
            last_iterate: mu.iter().copied().collect(),
        })
    }
}
