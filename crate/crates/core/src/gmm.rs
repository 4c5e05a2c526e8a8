//! Mean-field fractional inference for the one-dimensional Gaussian mixture
//! with known observation variance.
//!
//! Model: `u_k ~ N(0, σ²)`, `c_i ~ Categorical(π)`, `x_i | c_i, u ~ N(u_{c_i}, σ_obs²)`.
//! Approximation: `q(u, c) = Π_k q(u_k) Π_i q(c_i)` with `φ_ik = q(c_i = k)`.
//! The bound applies `LB_γ` to the component means and the ELBO to the
//! assignments; see [`evaluate_bound`].

use serde::{Deserialize, Serialize};

use crate::bounds::{kl_gaussian, BoundValue};
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian1D, LogQuadratic};
use crate::numeric::{log_sum_exp, two_sided_critical};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub prior_variance: f64,
    pub obs_variance: f64,
    pub assignment_prior: Vec<f64>,
    pub data: Vec<f64>,
}

impl GmmModel {
    pub fn new(k: usize, prior_variance: f64, obs_variance: f64, assignment_prior: Vec<f64>, data: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one component".into()));
        }
        if !(prior_variance > 0.0) || !(obs_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "variances must be positive (prior {prior_variance}, observation {obs_variance})"
            )));
        }
        if assignment_prior.len() != k
            || assignment_prior.iter().any(|&p| !(p >= 0.0))
            || (assignment_prior.iter().sum::<f64>() - 1.0).abs() > 1e-10
        {
            return Err(Error::InvalidArgument("assignment prior must be a probability vector of length K".into()));
        }
        Ok(Self { k, prior_variance, obs_variance, assignment_prior, data })
    }

    /// Uniform assignment prior.
    pub fn uniform(k: usize, prior_variance: f64, obs_variance: f64, data: Vec<f64>) -> Result<Self> {
        Self::new(k, prior_variance, obs_variance, vec![1.0 / k as f64; k], data)
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn component_prior(&self) -> Gaussian1D {
        Gaussian1D::new(0.0, self.prior_variance).expect("validated prior variance")
    }
}

/// Assignment probabilities (row-major `n × K`) and component posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmState {
    k: usize,
    phi: Vec<f64>,
    pub components: Vec<Gaussian1D>,
}

impl GmmState {
    pub fn new(phi_rows: Vec<Vec<f64>>, components: Vec<Gaussian1D>) -> Result<Self> {
        let k = components.len();
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one component".into()));
        }
        let mut phi = Vec::with_capacity(phi_rows.len() * k);
        for (i, row) in phi_rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidArgument(format!("row {i} has {} entries, expected {k}", row.len())));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!("row {i} is not a probability vector")));
            }
            phi.extend_from_slice(row);
        }
        Ok(Self { k, phi, components })
    }

    /// Uniform `φ` and the given component means, each with variance `n/K`.
    pub fn with_means(n: usize, means: &[f64]) -> Result<Self> {
        let k = means.len();
        let variance = (n.max(1) as f64) / k as f64;
        let components = means.iter().map(|&m| Gaussian1D::new(m, variance)).collect::<Result<Vec<_>>>()?;
        Ok(Self { k, phi: vec![1.0 / k as f64; n * k], components })
    }

    /// Means `−1, +1` for two components, `±1, ±1/4` for four, evenly spaced
    /// on `[−1, 1]` otherwise; variances `n/K`; uniform `φ`.
    pub fn standard_init(model: &GmmModel) -> Self {
        let means: Vec<f64> = match model.k {
            1 => vec![0.0],
            2 => vec![-1.0, 1.0],
            4 => vec![-1.0, -0.25, 0.25, 1.0],
            k => (0..k).map(|j| -1.0 + 2.0 * j as f64 / (k - 1) as f64).collect(),
        };
        Self::with_means(model.n(), &means).expect("finite initial means")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.phi.len() / self.k
    }

    pub fn phi(&self, i: usize) -> &[f64] {
        &self.phi[i * self.k..(i + 1) * self.k]
    }

    pub fn phi_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.phi.chunks_exact(self.k)
    }

    /// `Σ_i φ_ik`, the effective number of observations in each component.
    pub fn counts(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for row in self.phi_rows() {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    fn check(&self, model: &GmmModel) -> Result<()> {
        if self.k != model.k || self.n() != model.n() {
            return Err(Error::InvalidArgument(format!(
                "state is {}×{} but model has n = {}, K = {}",
                self.n(),
                self.k,
                model.n(),
                model.k
            )));
        }
        Ok(())
    }
}

/// Result of running coordinate ascent to convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub state: GmmState,
    pub bound: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The bound after every sweep.
    pub trace: Vec<f64>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidFraction(format!("γ must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// `q(u_k) = N(mean, var)` with `var = 1/(1/σ² + γ Σ_i φ_ik/σ_obs²)` and
/// `mean = var · γ Σ_i φ_ik x_i / σ_obs²`.
pub fn update_components(model: &GmmModel, state: &GmmState, gamma: f64) -> Result<GmmState> {
    check_gamma(gamma)?;
    state.check(model)?;
    let k = state.k;
    let mut weight = vec![0.0; k];
    let mut weighted_x = vec![0.0; k];
    for (row, &x) in state.phi_rows().zip(&model.data) {
        for j in 0..k {
            weight[j] += row[j];
            weighted_x[j] += row[j] * x;
        }
    }
    let components = (0..k)
        .map(|j| {
            let precision = 1.0 / model.prior_variance + gamma * weight[j] / model.obs_variance;
            let variance = 1.0 / precision;
            Gaussian1D::new(variance * (gamma * weighted_x[j] / model.obs_variance), variance)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GmmState { components, ..state.clone() })
}

/// `E_{q_i}[log N(x | u, 1)]` where `q_i ∝ component · N(x | u, 1)^w`.
pub fn tilted_expectation(component: &Gaussian1D, x: f64, w: f64) -> f64 {
    tilted_expectation_with(component, x, w, 1.0)
}

/// As [`tilted_expectation`] for a likelihood with variance `obs_variance`.
pub fn tilted_expectation_with(component: &Gaussian1D, x: f64, w: f64, obs_variance: f64) -> f64 {
    let (m, v) = if w == 0.0 {
        (component.mean(), component.variance())
    } else {
        let precision = 1.0 / component.variance() + w / obs_variance;
        let v = 1.0 / precision;
        (v * (component.mean() / component.variance() + w * x / obs_variance), v)
    };
    let d = x - m;
    -0.5 * (LN_2PI + obs_variance.ln()) - (d * d + v) / (2.0 * obs_variance)
}

/// `φ_ik ∝ π_k exp(E_{q_i}[log p(x_i | u_k)])`, where the tilt weight
/// `(1−γ) φ_ik` uses the previous assignment probabilities.
pub fn update_assignments(model: &GmmModel, state: &GmmState, gamma: f64) -> Result<GmmState> {
    check_gamma(gamma)?;
    state.check(model)?;
    let k = state.k;
    let ln_prior: Vec<f64> = model.assignment_prior.iter().map(|p| p.ln()).collect();
    let mut phi = Vec::with_capacity(state.phi.len());
    let mut logits = vec![0.0; k];
    for (row, &x) in state.phi_rows().zip(&model.data) {
        for j in 0..k {
            let w = (1.0 - gamma) * row[j];
            logits[j] = ln_prior[j] + tilted_expectation_with(&state.components[j], x, w, model.obs_variance);
        }
        let lse = log_sum_exp(&logits);
        phi.extend(logits.iter().map(|l| (l - lse).exp()));
    }
    Ok(GmmState { phi, ..state.clone() })
}

/// `Σ_i Σ_k φ_ik log(φ_ik / π_k)` with `0 log 0 = 0`.
fn assignment_kl(model: &GmmModel, state: &GmmState) -> f64 {
    state
        .phi_rows()
        .map(|row| {
            row.iter()
                .zip(&model.assignment_prior)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, pi)| p * (p / pi).ln())
                .sum::<f64>()
        })
        .sum()
}

/// The mixture bound.
///
/// For γ ∈ (0,1):
/// `1/(1−γ) Σ_ik log ∫ q(u_k) p(x_i|u_k)^{(1−γ)φ_ik} du_k − Σ_ik φ_ik log(φ_ik/π_k)
///  − Σ_k D_{1/γ}(q(u_k) ‖ p(u_k))`.
/// For γ = 1 the standard mixture ELBO. The assignment term is reported as
/// `extra_kl_term`.
pub fn evaluate_bound(model: &GmmModel, state: &GmmState, gamma: f64) -> Result<BoundValue> {
    check_gamma(gamma)?;
    state.check(model)?;
    let prior = model.component_prior();
    let assign = assignment_kl(model, state);
    let (data_term, complexity) = if gamma == 1.0 {
        let mut data_term = 0.0;
        for (row, &x) in state.phi_rows().zip(&model.data) {
            for (p, q) in row.iter().zip(&state.components) {
                data_term += p * tilted_expectation_with(q, x, 0.0, model.obs_variance);
            }
        }
        let kl: f64 = state.components.iter().map(|q| kl_gaussian(q, &prior)).sum();
        (data_term, kl)
    } else {
        let comps: Vec<LogQuadratic> = state.components.iter().map(Gaussian1D::log_quadratic).collect();
        let mut ln_zd = 0.0;
        for (row, &x) in state.phi_rows().zip(&model.data) {
            let lik = LogQuadratic::gaussian_likelihood(&[x], model.obs_variance);
            for (p, q) in row.iter().zip(&comps) {
                ln_zd += q.mul(lik.pow((1.0 - gamma) * p)).ln_integral()?;
            }
        }
        let prior_lq = prior.log_quadratic();
        let inv = 1.0 / gamma;
        let mut ln_zc = 0.0;
        for q in &comps {
            ln_zc += LogQuadratic::product([(*q, inv), (prior_lq, 1.0 - inv)]).ln_integral().map_err(|_| {
                Error::DivergenceInfinite(format!("component Rényi divergence of order {inv} is infinite"))
            })?;
        }
        (ln_zd / (1.0 - gamma), gamma / (1.0 - gamma) * ln_zc)
    };
    Ok(BoundValue {
        data_term,
        complexity_term: complexity,
        extra_kl_term: Some(assign),
        divergence: Some(complexity),
        total: data_term - complexity - assign,
    })
}

/// Coordinate ascent: assignments, then components, then the bound, until
/// the bound changes by less than `tol` or `max_iters` sweeps have run.
pub fn fit(model: &GmmModel, gamma: f64, init: &GmmState, tol: f64, max_iters: usize) -> Result<FitResult> {
    check_gamma(gamma)?;
    init.check(model)?;
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let mut state = init.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        state = update_assignments(model, &state, gamma)?;
        state = update_components(model, &state, gamma)?;
        let bound = evaluate_bound(model, &state, gamma)?.total;
        let previous = trace.last().copied();
        trace.push(bound);
        if let Some(prev) = previous {
            if (bound - prev).abs() < tol {
                converged = true;
                break;
            }
        }
    }
    Ok(FitResult {
        bound: *trace.last().expect("at least one sweep"),
        iterations: trace.len(),
        converged,
        state,
        trace,
    })
}

/// Default convergence settings: `tol = 1e-9`, at most 1000 sweeps.
pub fn fit_default(model: &GmmModel, gamma: f64) -> Result<FitResult> {
    fit(model, gamma, &GmmState::standard_init(model), 1e-9, 1000)
}

/// Central `1−α` credible interval `mean ± z_{1−α/2} sd`.
pub fn credible_interval(component: &Gaussian1D, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("α must lie in (0, 1), got {alpha}")));
    }
    let half = two_sided_critical(alpha) * component.sd();
    Ok((component.mean() - half, component.mean() + half))
}

/// Fractional assignment `∝ bayes^γ' · prior^{1−γ'}`.
pub fn fractional_assignment(bayes: &[f64], prior: &[f64], gamma_prime: f64) -> Result<Vec<f64>> {
    if bayes.len() != prior.len() {
        return Err(Error::InvalidArgument("probability vectors differ in length".into()));
    }
    if !(gamma_prime > 0.0 && gamma_prime <= 1.0) {
        return Err(Error::InvalidFraction(format!("γ' must lie in (0, 1], got {gamma_prime}")));
    }
    let logits: Vec<f64> = bayes
        .iter()
        .zip(prior)
        .map(|(b, p)| gamma_prime * b.ln() + (1.0 - gamma_prime) * p.ln())
        .collect();
    let lse = log_sum_exp(&logits);
    Ok(logits.iter().map(|l| (l - lse).exp()).collect())
}
