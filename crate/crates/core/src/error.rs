use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |m - m†| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("outcome count mismatch: expected {expected}, got {got}")]
    OutcomeCountMismatch { expected: usize, got: usize },

    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNormExceeded(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid HOVM: {0}")]
    InvalidHovm(String),

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("quasiprobability has non-negligible imaginary part {0:e}")]
    NonRealValue(f64),

    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),

    #[error("derivatives sum to {0}, not 0")]
    DerivativeNotTraceless(f64),

    #[error("operational quasiprobability is negative (negativity {0:e})")]
    NegativeOq(f64),

    #[error("quantum Fisher information is zero")]
    ZeroQfi,

    #[error("Fisher information is zero")]
    ZeroInformation,

    #[error("assembled counts are negative (min {0})")]
    NegativeCounts(f64),

    #[error("log-likelihood is flat at the estimate (observed FI {0:e})")]
    FlatLikelihood(f64),

    #[error("observable slope vanishes at the estimate ({0:e})")]
    ZeroSlope(f64),

    #[error("every trial was omitted")]
    AllTrialsOmitted,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
