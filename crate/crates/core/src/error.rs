//! Crate-wide error type.
//!
//! Variants are grouped so callers (the CLI and the C API) can map them to
//! coarse categories: input/validation problems versus numerical failures.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong size for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Too few samples to determine the requested fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A matrix that must be positive definite could not be factorized.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The regression design does not constrain every direction.
    #[error(
        "rank-deficient design: tick inputs do not excite direction [{}]; \
         collect motions that vary along it",
        format_direction(null_direction)
    )]
    RankDeficient { null_direction: Vec<f64> },

    /// Config file problem, with the offending line when known.
    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    /// Data file problem, with the offending record when known.
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable process exit code for the CLI: validation and I/O problems
    /// exit 2, numerical failures exit 3.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

fn format_direction(direction: &[f64]) -> String {
    direction
        .iter()
        .map(|v| format!("{v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_distinguish_validation_from_numerical() {
        assert_eq!(Error::InvalidArgument("x".into()).exit_code(), 2);
        assert_eq!(
            Error::Config {
                path: "a.ini".into(),
                line: 3,
                message: "bad".into()
            }
            .exit_code(),
            2
        );
        assert_eq!(Error::Numerical("chol".into()).exit_code(), 3);
    }

    #[test]
    fn rank_deficient_message_names_the_direction() {
        let err = Error::RankDeficient {
            null_direction: vec![0.7071, -0.7071],
        };
        let text = err.to_string();
        assert!(text.contains("0.7071"), "message was: {text}");
        assert!(text.contains("-0.7071"), "message was: {text}");
    }
}
