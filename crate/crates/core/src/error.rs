use thiserror::Error;

/// Errors produced by the solver engine and its data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("line {line} is exhausted at station {station} after {waited} ticks")]
    ExhaustedLine {
        line: String,
        station: String,
        waited: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown station `{0}`")]
    UnknownStation(String),

    #[error("unknown pmf id `{0}`")]
    UnknownPmf(String),

    #[error("station `{station}` has {lines} candidate lines, more than the limit of {limit}")]
    Capacity {
        station: String,
        lines: usize,
        limit: usize,
    },

    #[error("budget of {budget} ticks exceeds the grid horizon of {horizon} ticks")]
    BudgetExceedsGrid { budget: usize, horizon: usize },

    #[error("destination `{0}` is unreachable")]
    Unreachable(String),

    #[error("missing utility entry for {0}")]
    MissingEntry(String),

    #[error("policy gap: {message}")]
    PolicyGap { message: String, trajectory: String },

    #[error("joint support of {estimate} combinations exceeds the cap of {cap}")]
    SupportExplosion { estimate: u128, cap: u128 },

    #[error("gtfs: {0}")]
    Gtfs(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI and the HTTP layer.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidDistribution(_) => "invalid-distribution",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::ExhaustedLine { .. } => "exhausted-line",
            Error::InvalidNetwork(_) => "invalid-network",
            Error::UnknownStation(_) => "unknown-station",
            Error::UnknownPmf(_) => "unknown-pmf",
            Error::Capacity { .. } => "capacity",
            Error::BudgetExceedsGrid { .. } => "budget-exceeds-grid",
            Error::Unreachable(_) => "unreachable",
            Error::MissingEntry(_) => "missing-entry",
            Error::PolicyGap { .. } => "policy-gap",
            Error::SupportExplosion { .. } => "support-explosion",
            Error::Gtfs(_) => "gtfs",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
