use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mass matrix is singular (|det| = {det:e})")]
    SingularMassMatrix { det: f64 },

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("kinematic domain error: {0}")]
    DomainError(String),

    #[error("constraint Jacobian is rank deficient (pivot {pivot:e})")]
    RankDeficientConstraint { pivot: f64 },

    #[error("transformation does not annihilate the constraint Jacobian (|T^T Cq^T| = {norm:e})")]
    IdentityViolation { norm: f64 },

    #[error("reduced mass matrix is singular")]
    SingularReducedMass,

    #[error("parameter range `{0}` has no points")]
    EmptyRange(String),

    #[error("simulation failed at design point {point:?}: {source}")]
    Simulation {
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("labels have zero variance")]
    ZeroVariance,

    #[error("series needs at least {min} points, got {len}")]
    TooShort { len: usize, min: usize },

    #[error("no model for time instant t = {0}")]
    MissingModel(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Whether the failure is a numerical one (as opposed to configuration or IO).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularMassMatrix { .. }
                | Error::NonFiniteState { .. }
                | Error::DomainError(_)
                | Error::RankDeficientConstraint { .. }
                | Error::IdentityViolation { .. }
                | Error::SingularReducedMass
                | Error::Simulation { .. }
                | Error::DivergedLoss { .. }
                | Error::ZeroVariance
        )
    }
}
