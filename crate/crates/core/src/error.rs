use thiserror::Error;

pub type Result<T> = std::result::Result<T, MarketError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("service rate must be nonnegative, got {0}")]
    NegativeRate(f64),

    #[error("fairness parameter must be nonnegative, got {0}")]
    NegativeAlpha(f64),

    #[error("{operation} requires alpha >= 1, but provider {sp} uses alpha = {alpha}")]
    UnsupportedRegime {
        operation: &'static str,
        sp: usize,
        alpha: f64,
    },

    #[error("alpha = 0 best response of provider {sp} is degenerate (linear objective)")]
    DegenerateLinear { sp: usize },

    #[error("provider {sp} group {group} faces an all-zero price row")]
    ZeroPriceRow { sp: usize, group: usize },

    #[error("divergence undefined: x > 0 where y = 0 (coordinate {0})")]
    Divergence(usize),

    #[error("logarithm of a zero coordinate (provider {sp}, group {group}, entry {entry})")]
    ZeroCoordinate { sp: usize, group: usize, entry: usize },

    #[error("utility must be positive, got {0}")]
    NonPositiveUtility(f64),

    #[error("social-optimum welfare must be positive, got {0}")]
    NonPositiveWelfare(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
