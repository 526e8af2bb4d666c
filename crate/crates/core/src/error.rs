use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("derivative order exceeds degree (requested {requested}, degree {degree})")]
    DerivativeOrder { requested: usize, degree: usize },

    #[error("cannot truncate degree-0 space")]
    TruncateDegreeZero,

    #[error("evaluation point {0} outside [0, 1]")]
    OutOfDomain(f64),

    #[error("map not invertible at point {point:?} (det = {det:e})")]
    NotInvertible { point: Vec<f64>, det: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid discretization: {0}")]
    Discretization(String),

    #[error("mass matrix not positive definite")]
    MassNotPositiveDefinite,

    #[error("cluster not spectrally isolated (gap {gap:e} at eigenvalue {lambda})")]
    ClusterNotIsolated { lambda: f64, gap: f64 },

    #[error("singular bordered system at pivot {0}")]
    SingularBordered(usize),

    #[error("cluster tracking failed: {0}")]
    Tracking(String),

    #[error("deformation not uniformly invertible (|t| = {0} >= 1)")]
    DeformationNotInvertible(f64),

    #[error("too many failed samples: {failed} of {total}")]
    TooManyFailedSamples { failed: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
