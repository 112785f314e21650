use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The polynomial is not strictly positive on the unit sphere, so its
    /// unit sublevel set has no finite (numerically usable) volume.
    #[error("polynomial is not in the cone: sphere minimum {sphere_min:.3e} <= floor {floor:.3e}")]
    NotInCone { sphere_min: f64, floor: f64 },

    #[error("constraint set is empty: {0}")]
    EmptySet(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("certificate failure: {0}")]
    CertificateFailure(String),

    #[error("reduction failure: {0}")]
    ReductionFailure(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
