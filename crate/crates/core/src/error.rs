use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("period {period} does not divide N = {n}")]
    PeriodNotDivisor { period: u64, n: String },
    #[error("N = {0} is not finite")]
    NotFinite(String),
    #[error("invalid supernatural number: {0}")]
    InvalidSupernatural(String),
    #[error("invalid divisor chain: {0}")]
    InvalidChain(String),
    #[error("invalid sequence data: {0}")]
    InvalidSequence(String),
    #[error("coefficient is unbounded (linear = {linear}) but degree {n} requires a bounded coefficient for N = {big_n}")]
    UnboundedCoefficient { n: i64, linear: String, big_n: String },
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("periodic part has nonzero mean {0}")]
    NonzeroMean(String),
    #[error("images do not define a derivation: {0}")]
    NotDerivation(String),
    #[error("window too small: size {m}, margin {margin}")]
    WindowTooSmall { m: usize, margin: usize },
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },
    #[error("level mismatch: {0}")]
    LevelMismatch(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("not representable: {0}")]
    NotRepresentable(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
