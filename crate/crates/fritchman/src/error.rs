//! Crate-wide error type.

use crate::model::Violation;

/// Errors produced by model construction, estimation, statistics, the
/// channel simulator and the file-format layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model failed structural validation. Each violation names the
    /// offending entry and its value.
    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    /// An operation that needs a nonempty sequence was given an empty one.
    #[error("empty sequence")]
    EmptySequence,

    /// The sequence contains only one symbol value, so state re-estimation
    /// is undefined (one of the state classes receives no posterior mass).
    #[error("degenerate sequence: contains only the symbol {symbol}")]
    DegenerateSequence { symbol: u8 },

    /// The observation at step `t` (1-based) has probability zero under the
    /// model, e.g. an error symbol fed to a model with no reachable bad state.
    #[error("observation impossible under the model at t = {t}")]
    ImpossibleObservation { t: usize },

    /// Companion inputs disagree in length.
    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    /// Power iteration did not reach the residual tolerance within the
    /// iteration budget; the chain is likely reducible or periodic.
    #[error(
        "stationary distribution did not converge after {iterations} iterations \
         (residual {residual:.3e})"
    )]
    NonConvergent { iterations: usize, residual: f64 },

    /// Fewer than two errors in the sequence: no completed error-free run,
    /// so the run distribution is undefined.
    #[error("error-free run distribution undefined: sequence has {errors} error(s), need at least 2")]
    UndefinedEfrd { errors: usize },

    /// The two curves share no comparable index range.
    #[error("no overlapping index range to compare")]
    EmptyRange,

    /// A variance-based quality measurement degenerated (zero or negative
    /// denominator), typically because the configured noise level is zero.
    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),

    /// A configuration value is structurally invalid.
    #[error("invalid config: {key}: {message}")]
    InvalidConfig { key: String, message: String },

    /// A text document failed to parse. `key` names the offending field
    /// when one can be identified.
    #[error("parse error{}: {message}", .key.as_ref().map(|k| format!(" at `{k}`")).unwrap_or_default())]
    Parse { key: Option<String>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub(crate) fn parse_anon(message: impl Into<String>) -> Self {
        Error::Parse {
            key: None,
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            message: message.into(),
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
