use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerics(String),

    /// `|ds/dx . b|` fell below the singularity threshold, so the surface gain cannot be inverted.
    #[error("surface gain {gain:e} is below the singularity threshold {tol:e}")]
    SingularSurfaceGain { gain: f64, tol: f64 },

    #[error("state diverged at t = {t}: max-norm {norm:e}")]
    Divergence { t: f64, norm: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("sliding surface was never reached")]
    NotReached,

    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigValidation(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl SmcError {
    /// Short machine-readable tag used in reports and sweep tables.
    pub fn kind(&self) -> &'static str {
        match self {
            SmcError::Dimension { .. } => "dimension",
            SmcError::Parameter(_) => "parameter",
            SmcError::Numerics(_) => "numerics",
            SmcError::SingularSurfaceGain { .. } => "singular-surface-gain",
            SmcError::Divergence { .. } => "divergence",
            SmcError::Data(_) => "data",
            SmcError::NotReached => "not-reached",
            SmcError::ConfigSyntax(_) => "config-syntax",
            SmcError::ConfigValidation(_) => "config-validation",
            SmcError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for SmcError {
    fn from(e: std::io::Error) -> Self {
        SmcError::Io(e.to_string())
    }
}

impl From<csv::Error> for SmcError {
    fn from(e: csv::Error) -> Self {
        SmcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SmcError>;
