use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// A spectral diagonal entry fell below the positivity floor.
    #[error("degenerate scaling: spectral diagonal entry {index} = {value:e} is below floor {floor:e}")]
    DegenerateScaling { index: usize, value: f64, floor: f64 },

    /// Imaginary residue after an inverse transform, or a singular middle matrix.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("direction is not a descent direction (directional derivative {0:e})")]
    NotDescent(f64),

    #[error("quadratic model is unbounded below along the projected path")]
    UnboundedModel,

    #[error("invalid operator file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
