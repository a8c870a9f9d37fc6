use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, need at least {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("invalid signal: non-finite sample at index {0}")]
    InvalidSignal(usize),

    #[error("invalid analysis configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("silent input cannot be normalized")]
    SilentInput,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("entry ({i}, {j}) lies outside the cost band")]
    OutsideBand { i: usize, j: usize },

    #[error("marginal sums to {sum}, expected 1 within 1e-9")]
    NotNormalized { sum: f64 },

    #[error("banded OT infeasible; use UOT")]
    Infeasible,

    #[error("KL undefined: reference is zero at index {0} where the argument is positive")]
    KlUndefined(usize),

    #[error("invalid magnitude at index {0}: entries must be finite and nonnegative")]
    InvalidMagnitude(usize),

    #[error("instance too large for the exact oracle: I = {0} > {max}", max = crate::exact::ORACLE_MAX_POINTS)]
    TooLarge(usize),

    #[error("alpha = {0} outside [0, 1]")]
    InvalidAlpha(f64),

    #[error("zero total mass")]
    ZeroMass,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all-zero {0} marginal")]
    EmptyMarginal(&'static str),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    /// True for failures of the numerical stages rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Infeasible | Error::KlUndefined(_) | Error::ZeroMass)
    }
}
