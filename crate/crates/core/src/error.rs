use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A trellis, code or channel was asked for with unsupported parameters.
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    Input(&'static str),
    /// Every path through the trellis has zero probability at time `t`.
    #[error("observation at t={t} is impossible under the model")]
    Inference { t: usize },
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
