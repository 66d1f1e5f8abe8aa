use thiserror::Error;

use crate::learner::SigmoidStackParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The exact oracle refuses to approximate; it stops instead.
    #[error("resource limit: {what} needs {needed} terms, budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        needed: u128,
        budget: u64,
    },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("no joint support between the two distributions")]
    EmptyJointSupport,

    #[error("bisection bracket [{lo}, {hi}] does not contain the target {target}")]
    Bracket { lo: f64, hi: f64, target: f64 },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss {
        epoch: usize,
        snapshot: Box<SigmoidStackParams>,
    },

    #[error("parameters diverged at epoch {epoch}")]
    Divergence {
        epoch: usize,
        last_finite: Box<SigmoidStackParams>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
