//! Closed-form divergences and evidence bounds on the conjugate Gaussian-mean
//! model `z ~ N(m0, v0)`, `x_i | z ~ N(z, σ²)`.
//!
//! Every integral of products of powered Gaussians goes through
//! [`LogQuadratic`], so the data term, the complexity term and tilted
//! marginals share one code path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraction::{Fraction, Regime};
use crate::gaussian::{Gaussian1D, LogQuadratic, ScaledGaussian};

/// Prior, observation variance and data of the Gaussian-mean model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateGaussianModel {
    pub prior: Gaussian1D,
    pub obs_variance: f64,
    pub data: Vec<f64>,
}

impl ConjugateGaussianModel {
    pub fn new(prior: Gaussian1D, obs_variance: f64, data: Vec<f64>) -> Result<Self> {
        if !(obs_variance > 0.0) || !obs_variance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "observation variance must be positive, got {obs_variance}"
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("data must be finite".into()));
        }
        Ok(Self { prior, obs_variance, data })
    }

    /// `p(D|z)` as a function of `z`.
    pub fn likelihood(&self) -> LogQuadratic {
        LogQuadratic::gaussian_likelihood(&self.data, self.obs_variance)
    }

    pub fn ln_likelihood(&self, z: f64) -> f64 {
        self.likelihood().eval_ln(z)
    }

    /// The exact Bayes posterior `p(z|D)`.
    pub fn bayes_posterior(&self) -> Gaussian1D {
        self.fractional_posterior(1.0)
            .expect("a proper prior keeps the Bayes posterior proper")
    }

    /// `p(z) p(D|z)^γ`, normalised. Always proper for `γ ≥ 0`; for negative
    /// γ it fails once the tempered likelihood outweighs the prior precision.
    pub fn fractional_posterior(&self, gamma: f64) -> Result<Gaussian1D> {
        self.prior.log_quadratic().mul(self.likelihood().pow(gamma)).normalized()
    }
}

/// A bound decomposed into its data-fit and complexity parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    /// `1/(1-γ) · log Z_d`, or the expected log-likelihood for the ELBO.
    pub data_term: f64,
    /// `γ/(1-γ) · log Z_c`, or the KL divergence to the prior for the ELBO.
    pub complexity_term: f64,
    /// The KL term of the Bayes-posterior bounds, when present.
    pub extra_kl_term: Option<f64>,
    /// `D_{1/γ}(q‖p)` when `q` is known to be normalised.
    pub divergence: Option<f64>,
    pub total: f64,
}

impl BoundValue {
    pub fn new(data_term: f64, complexity_term: f64) -> Self {
        Self {
            data_term,
            complexity_term,
            extra_kl_term: None,
            divergence: None,
            total: data_term - complexity_term,
        }
    }
}

/// `KL(q‖p)` between univariate Gaussians.
pub fn kl_gaussian(q: &Gaussian1D, p: &Gaussian1D) -> f64 {
    let ratio = q.variance() / p.variance();
    let d = q.mean() - p.mean();
    0.5 * (ratio - 1.0 - ratio.ln() + d * d / p.variance())
}

/// Rényi divergence `D_α(q‖p) = 1/(α-1) · log ∫ q^α p^{1-α}`.
///
/// Finite only when `(1-α)·var(q) + α·var(p) > 0`.
pub fn renyi_gaussian(q: &Gaussian1D, p: &Gaussian1D, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("Rényi order must be positive and ≠ 1, got {alpha}")));
    }
    let mixed = (1.0 - alpha) * q.variance() + alpha * p.variance();
    if !(mixed > 0.0) {
        return Err(Error::DivergenceInfinite(format!(
            "mixed variance (1-α)·{} + α·{} = {mixed} is not positive at α = {alpha}",
            q.variance(),
            p.variance()
        )));
    }
    let d = q.mean() - p.mean();
    let log_term = mixed.ln() - (1.0 - alpha) * q.variance().ln() - alpha * p.variance().ln();
    Ok(0.5 * alpha * d * d / mixed - log_term / (2.0 * (alpha - 1.0)))
}

/// Exact `log p(D)` under the conjugate model.
pub fn log_evidence(model: &ConjugateGaussianModel) -> f64 {
    if model.data.is_empty() {
        return 0.0;
    }
    model
        .prior
        .log_quadratic()
        .mul(model.likelihood())
        .ln_integral()
        .expect("a proper prior keeps the evidence integral finite")
}

/// `LB_γ` for a normalised `q`; see [`lb_gamma_scaled`].
pub fn lb_gamma(model: &ConjugateGaussianModel, q: &Gaussian1D, gamma: Fraction) -> Result<BoundValue> {
    let mut value = lb_gamma_scaled(model, &ScaledGaussian::from(*q), gamma)?;
    if value.divergence.is_none() && gamma.value() > 0.0 {
        value.divergence = renyi_gaussian(q, &model.prior, gamma.renyi_order()).ok();
    }
    Ok(value)
}

/// `LB_γ` for an unnormalised Gaussian `ũq`, evaluated in closed form.
///
/// γ = 1 is rejected; use [`elbo`]. The complexity term is reported as the raw
/// `γ/(1-γ)·log Z_c`, which equals the Rényi divergence only when `ũq` is
/// normalised.
pub fn lb_gamma_scaled(model: &ConjugateGaussianModel, uq: &ScaledGaussian, gamma: Fraction) -> Result<BoundValue> {
    if gamma.regime() == Regime::Elbo {
        return Err(Error::InvalidFraction(
            "γ = 1 is the ELBO; call `elbo` explicitly".into(),
        ));
    }
    let g = gamma.value();
    let uq_lq = uq.log_quadratic();
    let prior_lq = model.prior.log_quadratic();

    let ln_zd = uq_lq.mul(model.likelihood().pow(1.0 - g)).ln_integral()?;
    let ln_zc = LogQuadratic::product([(uq_lq, 1.0 / g), (prior_lq, 1.0 - 1.0 / g)])
        .ln_integral()
        .map_err(|_| {
            Error::DivergenceInfinite(format!(
                "complexity integral diverges for γ = {g}, q variance {}, prior variance {}",
                uq.dist.variance(),
                model.prior.variance()
            ))
        })?;

    let mut value = BoundValue::new(ln_zd / (1.0 - g), g / (1.0 - g) * ln_zc);
    if uq.log_scale == 0.0 && g > 0.0 {
        value.divergence = Some(value.complexity_term);
    }
    Ok(value)
}

/// The conventional ELBO, `E_q[log p(D|z)] − KL(q‖p)`.
pub fn elbo(model: &ConjugateGaussianModel, q: &Gaussian1D) -> BoundValue {
    let s2 = model.obs_variance;
    let n = model.data.len() as f64;
    let expected_ll: f64 = -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln()
        - model
            .data
            .iter()
            .map(|x| {
                let d = x - q.mean();
                (d * d + q.variance()) / (2.0 * s2)
            })
            .sum::<f64>();
    let kl = kl_gaussian(q, &model.prior);
    let mut value = BoundValue::new(expected_ll, kl);
    value.divergence = Some(kl);
    value
}

/// Variational Rényi bound `1/(1-α) · log ∫ q (p(D,z)/q)^{1-α}`.
pub fn variational_renyi(model: &ConjugateGaussianModel, q: &Gaussian1D, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("α must be positive and ≠ 1, got {alpha}")));
    }
    let joint = model.prior.log_quadratic().mul(model.likelihood());
    let ln_int = LogQuadratic::product([(q.log_quadratic(), alpha), (joint, 1.0 - alpha)]).ln_integral()?;
    Ok(ln_int / (1.0 - alpha))
}

/// The fractional divergence from `approx` to `target_fractional` relative to
/// `prior`: the gap `log p(D) − LB_γ` written without the likelihood.
pub fn frac_divergence(
    prior: &Gaussian1D,
    target_fractional: &Gaussian1D,
    approx: &Gaussian1D,
    gamma: Fraction,
) -> Result<f64> {
    let g = gamma.value();
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::InvalidFraction(format!("γ must lie in (0, 1), got {g}")));
    }
    let p0 = prior.log_quadratic();
    let p1 = target_fractional.log_quadratic();
    let p2 = approx.log_quadratic();
    let inv = 1.0 / g;
    let a = LogQuadratic::product([(p1, inv), (p0, 1.0 - inv)]).ln_integral()?;
    let b = LogQuadratic::product([(p2, 1.0), (p1, inv - 1.0), (p0, 1.0 - inv)]).ln_integral()?;
    let c = LogQuadratic::product([(p2, inv), (p0, 1.0 - inv)]).ln_integral()?;
    Ok(a - b / (1.0 - g) + g / (1.0 - g) * c)
}

/// The transformed distribution `p^{1/γ} p0^{1-1/γ}`, normalised.
pub fn transformed(p: &Gaussian1D, prior: &Gaussian1D, gamma: Fraction) -> Result<Gaussian1D> {
    let inv = 1.0 / gamma.value();
    LogQuadratic::product([(p.log_quadratic(), inv), (prior.log_quadratic(), 1.0 - inv)]).normalized()
}

/// `prior^{1-γ} · bayes^γ`, normalised; precision `(1-γ)/v0 + γ/v1`.
pub fn interpolate_posterior(prior: &Gaussian1D, bayes: &Gaussian1D, gamma: f64) -> Result<Gaussian1D> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidFraction(format!("γ must lie in [0, 1], got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(*prior);
    }
    if gamma == 1.0 {
        return Ok(*bayes);
    }
    LogQuadratic::product([(prior.log_quadratic(), 1.0 - gamma), (bayes.log_quadratic(), gamma)]).normalized()
}
