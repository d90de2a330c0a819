use thiserror::Error;

/// Errors raised by the simulator and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is not normalized (norm {norm:.3e}){}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    NotNormalized {
        what: &'static str,
        index: Option<usize>,
        norm: f64,
    },

    #[error("n = {n} units exceeds the configured cap of {max}")]
    TooManyUnits { n: usize, max: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense eigen method is limited to n <= {max} (requested n = {n})")]
    DenseUnavailable { n: usize, max: usize },

    #[error("Krylov propagation did not reach tolerance {requested:.1e} (achieved residual {achieved:.3e})")]
    NonConvergence { achieved: f64, requested: f64 },

    #[error("closed-form oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("time series is empty")]
    EmptySeries,

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { got: usize, need: usize },

    #[error("limit extrapolation refused: {0}")]
    FitRefused(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
