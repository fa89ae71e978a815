use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical integration failed: {0}")]
    Integration(String),

    #[error("floating-point overflow: {0}")]
    Overflow(String),

    #[error("Laplace exponent diverges at alpha = {alpha}")]
    Divergent { alpha: f64 },

    #[error(
        "near-confluent exponent values (min gap {gap:e} against scale {scale:e}); \
         fall back to {fallback}"
    )]
    NearConfluent {
        gap: f64,
        scale: f64,
        fallback: &'static str,
    },

    #[error("condition {condition} is {verdict}: {detail}")]
    Condition {
        condition: &'static str,
        verdict: &'static str,
        detail: String,
    },

    #[error("pole at k = {k}: q + Phi(k) = {value}")]
    Pole { k: i64, value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("expression error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("jump measure cannot be simulated: {0}")]
    NotSimulable(String),

    #[error("process specification: {0}")]
    Spec(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors that stem from a refused mathematical precondition
    /// rather than malformed input.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::Divergent { .. }
                | Error::NearConfluent { .. }
                | Error::Condition { .. }
                | Error::Pole { .. }
                | Error::Precondition(_)
                | Error::NotSimulable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
