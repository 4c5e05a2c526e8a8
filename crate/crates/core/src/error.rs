use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An integral in a divergence or bound does not converge for these parameters.
    #[error("divergence is infinite: {0}")]
    DivergenceInfinite(String),

    #[error("invalid Gaussian: mean {mean}, variance {variance}")]
    InvalidGaussian { mean: f64, variance: f64 },

    #[error("invalid fraction: {0}")]
    InvalidFraction(String),

    #[error("invalid variance: {0}")]
    InvalidVariance(String),

    #[error("quadrature dimension {0} exceeds the supported maximum of 3")]
    DimensionTooLarge(usize),

    #[error("regression is degenerate: {0}")]
    RegressionDegenerate(String),

    #[error("invalid subset size {ui_size} for {ns_prime} mixing samples")]
    SubsetInvalid { ui_size: usize, ns_prime: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
