//! Fractional updates for conjugate exponential families.
//!
//! With likelihood `h(x) exp(zᵀt(x) − a(z))`, prior `exp(zᵀν − κ a(z))` and
//! approximation `ũq = exp(zᵀμ − λ a(z))`, the bound is maximised at
//! `μ = ν + γ Σ t(x_i)`, `λ = κ + γ n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::gaussian::Gaussian1D;

/// Natural location `ν` and pseudo-count `κ` of a conjugate prior (or of a
/// posterior in the same family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePriorParams {
    pub nu: Vec<f64>,
    pub kappa: f64,
}

impl ConjugatePriorParams {
    pub fn new(nu: Vec<f64>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("κ must be positive, got {kappa}")));
        }
        Ok(Self { nu, kappa })
    }

    /// For the unit-variance Gaussian-mean family (`t(x) = x`, `a(z) = z²/2`)
    /// the parameters describe `N(ν/κ, 1/κ)`.
    pub fn as_gaussian(&self) -> Result<Gaussian1D> {
        let nu = scalar(&self.nu)?;
        Gaussian1D::new(nu / self.kappa, 1.0 / self.kappa)
    }
}

/// `Σ_i t(x_i)` and `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub t_sum: Vec<f64>,
    pub n: u64,
}

impl SufficientStats {
    /// Statistics of the Gaussian-mean instance, `t(x) = x`.
    pub fn gaussian(data: &[f64]) -> Self {
        Self { t_sum: vec![data.iter().sum()], n: data.len() as u64 }
    }
}

fn scalar(v: &[f64]) -> Result<f64> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::InvalidArgument(format!(
            "the Gaussian instance needs a one-dimensional natural parameter, got {}",
            v.len()
        ))),
    }
}

/// `(ν + γ Σt, κ + γ n)`.
pub fn fractional_conjugate_update(
    prior: &ConjugatePriorParams,
    stats: &SufficientStats,
    gamma: Fraction,
) -> Result<ConjugatePriorParams> {
    let g = gamma.value();
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::InvalidFraction(format!("γ must lie in (0, 1], got {g}")));
    }
    if prior.nu.len() != stats.t_sum.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: ν has {} entries, Σt has {}",
            prior.nu.len(),
            stats.t_sum.len()
        )));
    }
    Ok(ConjugatePriorParams {
        nu: prior.nu.iter().zip(&stats.t_sum).map(|(nu, t)| nu + g * t).collect(),
        kappa: prior.kappa + g * stats.n as f64,
    })
}

/// Mean of `z` and of `−a(z) = −z²/2` under `exp(h z − λ z²/2)`, or `None`
/// when `λ ≤ 0`.
fn gaussian_moments(h: f64, lambda: f64) -> Option<(f64, f64)> {
    if !(lambda > 0.0) {
        return None;
    }
    let mean = h / lambda;
    Some((mean, -0.5 * (1.0 / lambda + mean * mean)))
}

/// Distance from stationarity of `candidate` for the Gaussian-mean instance.
///
/// Stationarity of the bound requires `E_{q_c}[z] = E_{q_d}[z]` and
/// `E_{q_c}[−a(z)] = E_{q_d}[−a(z)]`, where
/// `q_c ∝ ũq^{1/γ} p^{1−1/γ}` and `q_d ∝ ũq · p(D|z)^{1−γ}`. Returns the
/// Euclidean norm of the two differences, or `+∞` when either tilted
/// distribution is improper.
pub fn stationarity_residual(
    prior: &ConjugatePriorParams,
    stats: &SufficientStats,
    candidate: &ConjugatePriorParams,
    gamma: Fraction,
) -> Result<f64> {
    let g = gamma.value();
    let nu = scalar(&prior.nu)?;
    let mu = scalar(&candidate.nu)?;
    let t = scalar(&stats.t_sum)?;
    let inv = 1.0 / g;
    let qc = gaussian_moments(mu * inv + (1.0 - inv) * nu, candidate.kappa * inv + (1.0 - inv) * prior.kappa);
    let qd = gaussian_moments(mu + (1.0 - g) * t, candidate.kappa + (1.0 - g) * stats.n as f64);
    Ok(match (qc, qd) {
        (Some((zc, ac)), Some((zd, ad))) => (zc - zd).hypot(ac - ad),
        _ => f64::INFINITY,
    })
}
