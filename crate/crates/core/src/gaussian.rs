//! Univariate Gaussians and the log-quadratic algebra used for every
//! powered-Gaussian integral in the crate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A normal distribution `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    mean: f64,
    variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidGaussian { mean, variance });
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, variance: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (LN_2PI + self.variance.ln()) - 0.5 * d * d / self.variance
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Reparameterised draw: `mean + sd·eps` for a standard normal `eps`.
    pub fn transform(&self, eps: f64) -> f64 {
        self.mean + self.sd() * eps
    }

    /// The density as a log-quadratic in `z`.
    pub fn log_quadratic(&self) -> LogQuadratic {
        let precision = 1.0 / self.variance;
        LogQuadratic {
            constant: -0.5 * (LN_2PI + self.variance.ln()) - 0.5 * self.mean * self.mean * precision,
            linear: self.mean * precision,
            precision,
        }
    }

    pub fn scaled(self, log_scale: f64) -> ScaledGaussian {
        ScaledGaussian { dist: self, log_scale }
    }
}

/// An unnormalised Gaussian density `exp(log_scale) · N(z | mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledGaussian {
    pub dist: Gaussian1D,
    pub log_scale: f64,
}

impl ScaledGaussian {
    pub fn ln_density(&self, z: f64) -> f64 {
        self.log_scale + self.dist.ln_pdf(z)
    }

    pub fn log_quadratic(&self) -> LogQuadratic {
        self.dist.log_quadratic().shift(self.log_scale)
    }
}

impl From<Gaussian1D> for ScaledGaussian {
    fn from(dist: Gaussian1D) -> Self {
        Self { dist, log_scale: 0.0 }
    }
}

/// The function `z ↦ exp(constant + linear·z − precision·z²/2)`.
///
/// Products and real powers of Gaussians (and of Gaussian likelihoods viewed
/// as functions of their mean) stay in this family, so every integral of the
/// form `∫ Π N_j(z)^{a_j} dz` reduces to adding coefficients and one
/// log-normaliser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogQuadratic {
    pub constant: f64,
    pub linear: f64,
    pub precision: f64,
}

impl LogQuadratic {
    pub const ONE: Self = Self { constant: 0.0, linear: 0.0, precision: 0.0 };

    /// `Π_i N(x_i | z, obs_variance)` as a function of `z`.
    pub fn gaussian_likelihood(data: &[f64], obs_variance: f64) -> Self {
        let n = data.len() as f64;
        let sum: f64 = data.iter().sum();
        let sum_sq: f64 = data.iter().map(|x| x * x).sum();
        Self {
            constant: -0.5 * n * (LN_2PI + obs_variance.ln()) - 0.5 * sum_sq / obs_variance,
            linear: sum / obs_variance,
            precision: n / obs_variance,
        }
    }

    pub fn eval_ln(&self, z: f64) -> f64 {
        self.constant + self.linear * z - 0.5 * self.precision * z * z
    }

    pub fn pow(self, a: f64) -> Self {
        Self {
            constant: a * self.constant,
            linear: a * self.linear,
            precision: a * self.precision,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Self) -> Self {
        Self {
            constant: self.constant + other.constant,
            linear: self.linear + other.linear,
            precision: self.precision + other.precision,
        }
    }

    pub fn shift(self, log_factor: f64) -> Self {
        Self { constant: self.constant + log_factor, ..self }
    }

    pub fn product<I: IntoIterator<Item = (Self, f64)>>(factors: I) -> Self {
        factors.into_iter().fold(Self::ONE, |acc, (f, a)| acc.mul(f.pow(a)))
    }

    /// `log ∫ exp(constant + linear·z − precision·z²/2) dz`.
    pub fn ln_integral(&self) -> Result<f64> {
        if !(self.precision > 0.0) || !self.precision.is_finite() {
            return Err(Error::DivergenceInfinite(format!(
                "integrand has non-positive precision {}",
                self.precision
            )));
        }
        Ok(self.constant
            + 0.5 * (2.0 * PI / self.precision).ln()
            + 0.5 * self.linear * self.linear / self.precision)
    }

    /// The normalised density proportional to this function.
    pub fn normalized(&self) -> Result<Gaussian1D> {
        if !(self.precision > 0.0) || !self.precision.is_finite() {
            return Err(Error::DivergenceInfinite(format!(
                "cannot normalise a log-quadratic with precision {}",
                self.precision
            )));
        }
        Gaussian1D::new(self.linear / self.precision, 1.0 / self.precision)
    }
}
