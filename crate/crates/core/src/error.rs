use thiserror::Error;

/// Errors raised anywhere in the distillation pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("encoding mismatch: {0}")]
    EncodingMismatch(String),
    #[error("infeasible depth: need {needed} distinct variables, domain has {available}")]
    InfeasibleDepth { needed: usize, available: usize },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("resource bound exceeded: {0}")]
    Resource(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("training diverged at step {step}: {diagnostics}")]
    TrainingDiverged { step: usize, diagnostics: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("undefined valuation: {0}; use mc_agreement instead")]
    UndefinedValuation(String),
    #[error("pool corruption: {0}")]
    PoolCorruption(String),
    #[error("empty pool: {0}")]
    EmptyPool(String),
    #[error("distractor budget exhausted: {0}")]
    DistractorBudget(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EncodingMismatch(_) => "encoding_mismatch",
            Error::InfeasibleDepth { .. } => "infeasible_depth",
            Error::Alignment(_) => "alignment",
            Error::Parse { .. } => "parse",
            Error::Resource(_) => "resource",
            Error::Dimension(_) => "dimension",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::NonFinite(_) => "non_finite",
            Error::UndefinedValuation(_) => "undefined_valuation",
            Error::PoolCorruption(_) => "pool_corruption",
            Error::EmptyPool(_) => "empty_pool",
            Error::DistractorBudget(_) => "distractor_budget",
            Error::Invalid(_) => "invalid",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
