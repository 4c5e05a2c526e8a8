//! Fractional variational inference.
//!
//! The central object is the one-parameter evidence bound
//!
//! ```text
//! LB_γ = 1/(1-γ) · log ∫ ũq(z) p(D|z)^(1-γ) dz  -  γ/(1-γ) · log ∫ ũq(z)^(1/γ) p(z)^(1-1/γ) dz
//! ```
//!
//! which lower-bounds `log p(D)` for `γ ∈ (0,1) ∪ (1,∞)`, upper-bounds it for
//! `γ < 0`, tends to the ELBO as `γ → 1`, and is tight at the fractional
//! posterior `p(D|z)^γ p(z)`. The crate provides:
//!
//! - [`bounds`]: closed-form divergences and bounds on a conjugate Gaussian model;
//! - [`expfam`]: fractional conjugate updates for exponential families;
//! - [`multinomial`]: gradient-ascent fitting for multinomial-logit data;
//! - [`gmm`]: mean-field fractional inference for the 1-D Gaussian mixture;
//! - [`calibration`]: the replica-based coverage study and γ-selection strategies;
//! - [`estimators`]: Monte Carlo estimators of the bound family and importance sampling;
//! - [`cli`]: the `fracvi` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod expfam;
pub mod fraction;
pub mod gaussian;
pub mod gmm;
pub mod multinomial;
pub mod numeric;
pub mod quadrature;

pub use bounds::{BoundValue, ConjugateGaussianModel};
pub use error::{Error, Result};
pub use fraction::{Fraction, Regime};
pub use gaussian::{Gaussian1D, LogQuadratic, ScaledGaussian};
