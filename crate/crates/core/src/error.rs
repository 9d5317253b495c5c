use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("not enough {class} samples: need {needed}, have {available}")]
    Shortfall {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("k-nearest-neighbor search needs at least k+1 = {} points, got {points}", k + 1)]
    TooFewPoints { points: usize, k: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("Burr scores must be nonnegative, got {0}")]
    NegativeScore(f64),

    #[error("Burr density diverges at s = 0 when c = {c} < 1")]
    DivergentDensity { c: f64 },

    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("sample {index} is not strictly positive ({value})")]
    NonPositiveSample { index: usize, value: f64 },

    #[error(
        "Burr fit did not converge after {iterations} iterations \
         (c = {c}, k = {k}, gradient norm = {grad_norm:e})"
    )]
    FitNonConvergence {
        c: f64,
        k: f64,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("quadrature did not reach tolerance {requested:e} (estimated error {achieved:e})")]
    QuadratureNonConvergence { requested: f64, achieved: f64 },

    #[error("detection probability must exceed 1/2, got {0}")]
    DetectionProbabilityTooLow(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged ({what} is not finite) at epoch {epoch}")]
    Diverged { what: &'static str, epoch: usize },

    #[error("no labeled-normal samples")]
    NoLabeledNormal,

    #[error("sample {index} is unlabeled and has not been assigned a label yet")]
    UnsetLabel { index: usize },

    #[error("ROC analysis needs both classes present")]
    SingleClass,

    #[error("decision boundary grids need a two-dimensional input space, model takes {0}")]
    NotTwoDimensional(usize),

    #[error("iteration {t}: {source}")]
    AtIteration { t: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_iteration(self, t: usize) -> Self {
        Error::AtIteration {
            t,
            source: Box::new(self),
        }
    }

    /// Unwraps iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}
