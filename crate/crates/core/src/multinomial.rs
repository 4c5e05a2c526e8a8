//! Multinomial-logit data with a standard Gaussian prior.
//!
//! With `1/γ = 1 + 1/n` and the structured approximation
//! `ũq(z) = Π_c N(z_c | μ_c, σ_c²) · (Σ_c exp z_c)^{n/(n+1)}`, both tilted
//! distributions of the bound are available in closed form:
//! `q_d` is a product of shifted Gaussians and `q_c` is a `C`-component
//! mixture of Gaussians, so the gradient needs only the unnormalised `ũq`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian1D, LogQuadratic};
use crate::numeric::log_sum_exp;
use crate::quadrature::composite_rule;

/// Class counts `n_c` of the observed data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogitModel {
    class_counts: Vec<u64>,
    n: u64,
}

impl LogitModel {
    pub fn new(class_counts: Vec<u64>) -> Result<Self> {
        if class_counts.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least two classes, got {}",
                class_counts.len()
            )));
        }
        let n = class_counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one observation".into()));
        }
        Ok(Self { class_counts, n })
    }

    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Self> {
        let mut counts = vec![0u64; classes];
        for &l in labels {
            *counts
                .get_mut(l)
                .ok_or_else(|| Error::InvalidArgument(format!("label {l} out of range for {classes} classes")))? += 1;
        }
        Self::new(counts)
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.class_counts.len()
    }

    /// The fraction fixed by the construction, `n/(n+1)`.
    pub fn gamma(&self) -> f64 {
        let n = self.n as f64;
        n / (n + 1.0)
    }

    /// `log p(D|z) = Σ_c n_c z_c − n log Σ_c exp z_c`.
    pub fn ln_likelihood(&self, z: &[f64]) -> f64 {
        let lse = log_sum_exp(z);
        self.class_counts.iter().zip(z).map(|(&nc, zc)| nc as f64 * zc).sum::<f64>() - self.n as f64 * lse
    }
}

/// `μ_c` and `σ_c²` of the Gaussian factor of `ũq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitPosteriorParams {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl LogitPosteriorParams {
    /// `μ_c = 0`, `σ_c² = 1` (matches the prior).
    pub fn prior_matched(classes: usize) -> Self {
        Self { mu: vec![0.0; classes], sigma2: vec![1.0; classes] }
    }

    fn validate(&self, n: u64) -> Result<()> {
        if self.mu.len() != self.sigma2.len() {
            return Err(Error::InvalidArgument("μ and σ² lengths differ".into()));
        }
        let limit = n as f64 + 1.0;
        for (c, &s) in self.sigma2.iter().enumerate() {
            if !(s > 0.0) || !(s < limit) {
                return Err(Error::InvalidVariance(format!(
                    "σ²[{c}] = {s} must lie in (0, n+1 = {limit})"
                )));
            }
        }
        Ok(())
    }

    /// `log ũq(z)`.
    pub fn ln_unnormalized(&self, z: &[f64], n: u64) -> f64 {
        let nf = n as f64;
        let gauss: f64 = z
            .iter()
            .zip(self.mu.iter().zip(&self.sigma2))
            .map(|(&zc, (&m, &v))| Gaussian1D::new(m, v).map(|g| g.ln_pdf(zc)).unwrap_or(f64::NEG_INFINITY))
            .sum();
        gauss + nf / (nf + 1.0) * log_sum_exp(z)
    }
}

/// Location, scale and mixing weights of `q_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QcQuantities {
    pub m: Vec<f64>,
    pub s2: Vec<f64>,
    pub rho: Vec<f64>,
}

/// First and second moments under `q_c` and `q_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub qc_z: Vec<f64>,
    pub qc_z2: Vec<f64>,
    pub qd_z: Vec<f64>,
    pub qd_z2: Vec<f64>,
}

/// Gradient of the bound with respect to `μ` and `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.mu.iter().chain(&self.sigma2).map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// `m_c = μ_c(n+1)/(n+1−σ_c²)`, `s_c² = nσ_c²/(n+1−σ_c²)` and
/// `ρ = softmax(m + s²/2)`.
pub fn qc_quantities(params: &LogitPosteriorParams, n: u64) -> Result<QcQuantities> {
    params.validate(n)?;
    let nf = n as f64;
    let (m, s2): (Vec<f64>, Vec<f64>) = params
        .mu
        .iter()
        .zip(&params.sigma2)
        .map(|(&mu, &v)| {
            let denom = nf + 1.0 - v;
            (mu * (nf + 1.0) / denom, nf * v / denom)
        })
        .unzip();
    let logits: Vec<f64> = m.iter().zip(&s2).map(|(mc, sc)| mc + 0.5 * sc).collect();
    let lse = log_sum_exp(&logits);
    let rho = logits.iter().map(|l| (l - lse).exp()).collect();
    Ok(QcQuantities { m, s2, rho })
}

pub fn moments(params: &LogitPosteriorParams, model: &LogitModel) -> Result<Moments> {
    check_dims(params, model)?;
    let QcQuantities { m, s2, rho } = qc_quantities(params, model.n)?;
    let np1 = model.n as f64 + 1.0;
    let c = model.classes();
    let mut out = Moments {
        qc_z: Vec::with_capacity(c),
        qc_z2: Vec::with_capacity(c),
        qd_z: Vec::with_capacity(c),
        qd_z2: Vec::with_capacity(c),
    };
    for k in 0..c {
        out.qc_z.push(m[k] + rho[k] * s2[k]);
        out.qc_z2.push(s2[k] + m[k] * m[k] + s2[k] * (s2[k] + 2.0 * m[k]) * rho[k]);
        let shifted = params.mu[k] + params.sigma2[k] * model.class_counts[k] as f64 / np1;
        out.qd_z.push(shifted);
        out.qd_z2.push(params.sigma2[k] + shifted * shifted);
    }
    Ok(out)
}

fn check_dims(params: &LogitPosteriorParams, model: &LogitModel) -> Result<()> {
    if params.mu.len() != model.classes() || params.sigma2.len() != model.classes() {
        return Err(Error::InvalidArgument(format!(
            "parameters have {} entries for {} classes",
            params.mu.len(),
            model.classes()
        )));
    }
    Ok(())
}

/// `∂LB/∂θ = (n+1) · (E_{q_d} − E_{q_c})[∂ log ũq/∂θ]`, expanded with
/// `∂/∂μ_c = (z_c−μ_c)/σ_c²` and `∂/∂σ_c² = −1/(2σ_c²) + (z_c−μ_c)²/(2σ_c⁴)`.
pub fn lb_gradient(params: &LogitPosteriorParams, model: &LogitModel) -> Result<Gradient> {
    let mom = moments(params, model)?;
    let scale = model.n as f64 + 1.0;
    let mut grad = Gradient { mu: Vec::new(), sigma2: Vec::new() };
    for k in 0..model.classes() {
        let (mu, v) = (params.mu[k], params.sigma2[k]);
        grad.mu.push(scale * (mom.qd_z[k] - mom.qc_z[k]) / v);
        let centered_d = mom.qd_z2[k] - 2.0 * mu * mom.qd_z[k];
        let centered_c = mom.qc_z2[k] - 2.0 * mu * mom.qc_z[k];
        grad.sigma2.push(scale * (centered_d - centered_c) / (2.0 * v * v));
    }
    Ok(grad)
}

/// The bound in closed form: `(n+1) log Z_d − n log Z_c`.
pub fn lb_value(params: &LogitPosteriorParams, model: &LogitModel) -> Result<f64> {
    check_dims(params, model)?;
    let qc = qc_quantities(params, model.n)?;
    let nf = model.n as f64;
    let np1 = nf + 1.0;
    let mut ln_zd = 0.0;
    let mut ln_gauss = 0.0;
    let std_prior = Gaussian1D::standard().log_quadratic();
    for k in 0..model.classes() {
        let (mu, v) = (params.mu[k], params.sigma2[k]);
        let w = model.class_counts[k] as f64 / np1;
        ln_zd += mu * w + 0.5 * v * w * w;
        let factor = Gaussian1D::new(mu, v)?.log_quadratic();
        ln_gauss += LogQuadratic::product([(factor, np1 / nf), (std_prior, -1.0 / nf)]).ln_integral()?;
    }
    let logits: Vec<f64> = qc.m.iter().zip(&qc.s2).map(|(m, s)| m + 0.5 * s).collect();
    let ln_zc = ln_gauss + log_sum_exp(&logits);
    Ok(np1 * ln_zd - nf * ln_zc)
}

const QUAD_PANELS: usize = 8;
const QUAD_ORDER: usize = 12;

fn tensor_ln_integral<F: Fn(&[f64]) -> f64>(axes: &[(Vec<f64>, Vec<f64>)], ln_f: F) -> f64 {
    let dims = axes.len();
    let sizes: Vec<usize> = axes.iter().map(|a| a.0.len()).collect();
    let total: usize = sizes.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims];
    let mut z = vec![0.0; dims];
    for _ in 0..total {
        let mut ln_w = 0.0;
        for d in 0..dims {
            z[d] = axes[d].0[idx[d]];
            ln_w += axes[d].1[idx[d]].ln();
        }
        values.push(ln_w + ln_f(&z));
        for d in 0..dims {
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    log_sum_exp(&values)
}

/// Tensor-product grid covering the mass of `q_d` and `q_c` along each axis.
fn oracle_axes(params: &LogitPosteriorParams, model: &LogitModel, qc: &QcQuantities) -> Vec<(Vec<f64>, Vec<f64>)> {
    let np1 = model.n as f64 + 1.0;
    (0..model.classes())
        .map(|k| {
            let (mu, v) = (params.mu[k], params.sigma2[k]);
            let centers = [
                mu,
                mu + v * model.class_counts[k] as f64 / np1,
                qc.m[k],
                qc.m[k] + qc.s2[k],
            ];
            let lo = centers.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = 12.0 * v.sqrt().max(qc.s2[k].sqrt());
            composite_rule(lo - width, hi + width, QUAD_PANELS, QUAD_ORDER)
        })
        .collect()
}

/// The bound evaluated by direct tensor-product quadrature of `Z_d` and
/// `Z_c` from the unnormalised densities (`C ≤ 3`).
pub fn lb_value_quadrature(params: &LogitPosteriorParams, model: &LogitModel) -> Result<f64> {
    if model.classes() > 3 {
        return Err(Error::DimensionTooLarge(model.classes()));
    }
    check_dims(params, model)?;
    let qc = qc_quantities(params, model.n)?;
    let axes = oracle_axes(params, model, &qc);
    let n = model.n;
    let nf = n as f64;
    let g = model.gamma();
    let std_prior = Gaussian1D::standard();
    let ln_prior = |z: &[f64]| z.iter().map(|&zc| std_prior.ln_pdf(zc)).sum::<f64>();
    let ln_zd = tensor_ln_integral(&axes, |z| params.ln_unnormalized(z, n) + (1.0 - g) * model.ln_likelihood(z));
    let ln_zc = tensor_ln_integral(&axes, |z| params.ln_unnormalized(z, n) / g + (1.0 - 1.0 / g) * ln_prior(z));
    Ok((nf + 1.0) * ln_zd - nf * ln_zc)
}

/// `log p(D)` by quadrature over the standard normal prior (`C ≤ 3`).
pub fn log_evidence_quadrature(model: &LogitModel) -> Result<f64> {
    if model.classes() > 3 {
        return Err(Error::DimensionTooLarge(model.classes()));
    }
    let axis = composite_rule(-12.0, 12.0, QUAD_PANELS, QUAD_ORDER);
    let axes = vec![axis; model.classes()];
    let std_prior = Gaussian1D::standard();
    Ok(tensor_ln_integral(&axes, |z| {
        z.iter().map(|&zc| std_prior.ln_pdf(zc)).sum::<f64>() + model.ln_likelihood(z)
    }))
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub params: LogitPosteriorParams,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Projected fixed-step gradient ascent on the bound.
///
/// Stops once the gradient norm falls below `tol` or after `max_iters`
/// steps; `σ_c²` is projected into `[1e-8, n+1−1e-8]` after every step.
pub fn fit(
    model: &LogitModel,
    init: &LogitPosteriorParams,
    step: f64,
    max_iters: usize,
    tol: f64,
) -> Result<LogitFit> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    check_dims(init, model)?;
    let upper = model.n as f64 + 1.0 - 1e-8;
    let mut params = init.clone();
    let mut iterations = 0;
    loop {
        let grad = lb_gradient(&params, model)?;
        let norm = grad.norm();
        if norm < tol || iterations >= max_iters {
            return Ok(LogitFit { params, iterations, gradient_norm: norm, converged: norm < tol });
        }
        for k in 0..model.classes() {
            params.mu[k] += step * grad.mu[k];
            params.sigma2[k] = (params.sigma2[k] + step * grad.sigma2[k]).clamp(1e-8, upper);
        }
        iterations += 1;
    }
}
