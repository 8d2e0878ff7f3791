use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} aggregation of an empty multiset")]
    EmptyMultiset(&'static str),
    #[error("uniform polynomial aggregation applied to a non-homogeneous multiset")]
    NonHomogeneous,
    #[error("gnn has no readout")]
    MissingReadout,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("emulation infeasible: {0}")]
    Infeasible(String),
    #[error("describing set grew to {size} polynomials (cap {cap}) at {stage}")]
    SetExplosion {
        size: usize,
        cap: usize,
        stage: String,
    },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("no certificate: {0}")]
    NoCertificate(String),
    #[error("linear program {0}")]
    Lp(String),
    #[error("training diverged (non-finite loss) at learning rate {lr}")]
    Diverged { lr: f64 },
    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
