use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("weight overflow: Λ({s}) exceeds the representable range")]
    WeightOverflow { s: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("margin violation at t = {t}: {detail}")]
    Margin { t: f64, detail: String },

    #[error("corrector did not converge at t = {t}, cell {cell} (last change {change:e})")]
    StepFailure { t: f64, cell: usize, change: f64 },

    #[error("numerical failure at t = {t}: {detail}")]
    NumericalFailure { t: f64, detail: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("weighted norm diverges: {0}")]
    HypothesisViolation(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("config syntax error at line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigInvalid(Vec<String>),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Failures of the time integrator itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepFailure { .. } | Error::NumericalFailure { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::ConfigSyntax { .. } | Error::ConfigInvalid(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
