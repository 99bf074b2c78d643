use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain of a function.
    #[error("{func}: argument {value} outside domain ({reason})")]
    Domain {
        func: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid parameters: {0}")]
    Parameter(String),

    /// An adaptive integral or iteration ran out of budget. `partial` is the
    /// best estimate available when it stopped.
    #[error("numeric evaluation did not converge: {what} (partial estimate {partial:e}, error {error:e})")]
    Convergence {
        what: String,
        partial: f64,
        error: f64,
    },

    #[error("degenerate density: {0}")]
    Degenerate(String),

    #[error("singular point at x = {0}")]
    Singular(f64),

    #[error("no closed form for {0}")]
    NoClosedForm(String),

    #[error("reference density is not normalised (mass {mass})")]
    InvalidReference { mass: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn domain(func: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain {
        func,
        value,
        reason,
    }
}
