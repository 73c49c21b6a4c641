use alloc::string::String;

use crate::ad::OpKind;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A primitive was evaluated outside its domain while recording.
    #[error("domain violation in `{op:?}` at tape node {node}")]
    Domain { op: OpKind, node: usize },

    /// Invalid configuration or parameter value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Array shapes disagree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// The squeeze-film journal reached the housing (eccentricity ratio >= 1).
    #[error("film rupture: eccentricity ratio {ratio} >= 1")]
    FilmRupture { ratio: f64 },

    /// A model force failed at one sample of the time grid.
    #[error("model failure at time sample {sample}: {source}")]
    AtSample {
        sample: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    /// LU factorization hit a zero pivot.
    #[error("singular matrix (pivot {pivot})")]
    Singular { pivot: usize },

    /// The bordered continuation matrix lost rank.
    #[error("rank-deficient bordered matrix: tangent undefined")]
    RankDeficient,

    /// NaN or infinity appeared during time integration.
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    /// The time integrator's inner Newton loop failed even at the minimum step.
    #[error("implicit step failed at t = {time}: {reason}")]
    StepFailure { time: f64, reason: String },

    /// No point of a branch converged.
    #[error("empty branch: no point converged")]
    EmptyBranch,

    /// A Newton solve did not converge.
    #[error("Newton did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = core::result::Result<T, Error>;
