use thiserror::Error;

use crate::model::GridSpec;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("fields live on different grids ({left:?} vs {right:?})")]
    GridMismatch { left: GridSpec, right: GridSpec },

    /// The jump location law G(f, .) needs a field with positive alpha-norm.
    #[error("jump location law is undefined for a field with zero alpha-norm")]
    ZeroField,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("worker pool: {0}")]
    Pool(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
