use thiserror::Error;

pub type Result<T> = std::result::Result<T, KernelError>;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },

    #[error("attention mask must be square, got {rows}x{cols}")]
    NonSquareMask { rows: usize, cols: usize },

    #[error("attention mask diagonal must be 0 (node {node} has {value})")]
    MaskDiagonal { node: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("integration interval must be non-negative, got {0}")]
    NegativeInterval(f64),

    #[error("unknown zone `{0}`")]
    UnknownZone(String),

    #[error("missing tensor `{0}` in weights archive")]
    MissingTensor(String),

    #[error("malformed weights archive: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(KernelError::ShapeMismatch {
            what,
            expected: expected.to_string(),
            got: got.to_string(),
        })
    }
}

pub(crate) fn check_shape(what: &'static str, expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(KernelError::ShapeMismatch {
            what,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        })
    }
}
