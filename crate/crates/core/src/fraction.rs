use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the log-evidence the bound sits on for a given γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// γ ∈ (0,1) ∪ (1,∞): the bound is below the log-evidence.
    LowerBound,
    /// γ < 0: the same expression is above the log-evidence.
    UpperBound,
    /// γ = 1: the ELBO.
    Elbo,
}

/// The fraction γ weighting the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Fraction(f64);

impl Fraction {
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidFraction(format!("gamma must be finite, got {gamma}")));
        }
        if gamma == 0.0 {
            return Err(Error::InvalidFraction("gamma must be non-zero".into()));
        }
        Ok(Self(gamma))
    }

    /// Like [`Fraction::new`] but additionally requires γ ∈ (0, 1].
    pub fn unit_interval(gamma: f64) -> Result<Self> {
        let f = Self::new(gamma)?;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidFraction(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(f)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn regime(self) -> Regime {
        if self.0 == 1.0 {
            Regime::Elbo
        } else if self.0 < 0.0 {
            Regime::UpperBound
        } else {
            Regime::LowerBound
        }
    }

    pub fn is_elbo(self) -> bool {
        self.0 == 1.0
    }

    /// Order of the Rényi divergence appearing in the complexity term, 1/γ.
    pub fn renyi_order(self) -> f64 {
        1.0 / self.0
    }
}

impl TryFrom<f64> for Fraction {
    type Error = Error;

    fn try_from(gamma: f64) -> Result<Self> {
        Self::new(gamma)
    }
}
