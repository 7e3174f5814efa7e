use thiserror::Error;

/// Errors produced by the cubature library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubatureError {
    #[error("invalid word: letter {letter} outside 0..={d}")]
    InvalidWord { letter: usize, d: usize },

    #[error("invalid algebra parameters: {0}")]
    InvalidContext(String),

    #[error("algebra context mismatch: ({left_d},{left_m}) vs ({right_d},{right_m})")]
    ContextMismatch {
        left_d: usize,
        left_m: usize,
        right_d: usize,
        right_m: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        what: &'static str,
    },

    #[error("unsupported degree {m}: {reason}")]
    UnsupportedDegree { m: usize, reason: String },

    #[error("no cubature formula found: best residual {residual:.3e}")]
    NoFormulaFound { residual: f64 },

    #[error("formula failed moment verification: residual {residual:.3e} > {tolerance:.1e}")]
    Verification { residual: f64, tolerance: f64 },

    #[error("non-finite state while integrating segment {segment}")]
    BlowUp { segment: usize },

    #[error("vector field {field} has no Jacobian and finite differences are disabled")]
    MissingJacobian { field: usize },

    #[error("direction not attainable from brackets: residual {residual:.3e} (|v| = {norm:.3e})")]
    DirectionNotAttainable { residual: f64, norm: f64 },

    #[error("tree needs {required} leaves, cap is {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("diffusion matrix singular at step {step}")]
    Ellipticity { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for CubatureError {
    fn from(e: serde_json::Error) -> Self {
        CubatureError::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CubatureError>;
