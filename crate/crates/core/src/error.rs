//! Error type shared by every module of the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (|M + M^T| = {asymmetry:.3e})")]
    NonSkewInput { asymmetry: f64 },

    #[error("rotation lies outside the invertibility domain of the retraction ({reason})")]
    OutOfDomain { reason: &'static str },

    #[error("index {index} out of range (limit {limit}) for {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("constraint multiplier system is rank deficient (condition estimate {condition:.3e})")]
    RankDeficientConstraint { condition: f64 },

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("state norm {norm:.3e} exceeded blow-up threshold at step {step}{}", seed.map(|s| format!(" (seed {s})")).unwrap_or_default())]
    Blowup { step: usize, norm: f64, seed: Option<u64> },

    #[error("system does not declare the symmetry `{0}`")]
    SymmetryNotDeclared(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("step {step} of the path with seed {seed}: {source}")]
    AtStep { step: usize, seed: u64, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Attach a path seed to a blow-up raised deep inside a stepper.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Error::Blowup { step, norm, .. } => Error::Blowup {
                step,
                norm,
                seed: Some(seed),
            },
            other => other,
        }
    }

    /// Locate a stepper failure on its path. Blow-ups already carry the step
    /// and only gain the seed.
    pub fn at_step(self, step: usize, seed: u64) -> Self {
        match self {
            Error::Blowup { .. } => self.with_seed(seed),
            Error::AtStep { .. } => self,
            other => Error::AtStep {
                step,
                seed,
                source: Box::new(other),
            },
        }
    }

    /// The underlying error with any step location removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
