use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Validation failures carry the violated constraint verbatim (for example
/// `"p>5d"`), so callers can surface it unchanged.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {constraint} violated ({detail})")]
    InvalidParameter {
        constraint: &'static str,
        detail: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bisection bracket does not straddle a sign change: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("numerical refusal: {0}")]
    NumericalRefusal(String),

    #[error("dense storage limit exceeded: {sites} sites > {limit}")]
    TooLarge { sites: usize, limit: usize },
}

impl Error {
    pub(crate) fn invalid(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            constraint,
            detail: detail.into(),
        }
    }

    /// `true` for failures that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Bracket { .. } | Error::NumericalRefusal(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
