use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid arcsine support: lo = {lo}, hi = {hi}")]
    InvalidSupport { lo: f64, hi: f64 },
    #[error("no bin center inside arcsine support [{lo}, {hi}]")]
    DegenerateSupport { lo: f64, hi: f64 },
    #[error("model mass {model} does not match histogram total {hist}")]
    MassMismatch { model: f64, hist: f64 },
    #[error("bin count mismatch: model has {model}, histogram has {hist}")]
    ShapeMismatch { model: usize, hist: usize },
    #[error("lag {lag} is not smaller than sequence length {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("sequence has zero variance")]
    ZeroVariance,
    #[error("autocorrelation coefficient {0} outside [-1, 1]")]
    InvalidCoefficient(f64),
    #[error("rate equations diverged at t = {time:e} s")]
    NumericalDivergence { time: f64 },
    #[error("trace too short: {have} samples, need {need}")]
    TraceTooShort { have: usize, need: usize },
    #[error("traces carry no modulation")]
    NoSignal,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
