use core::fmt;

/// Failure modes surfaced by estimator construction, solvers, and predictors.
///
/// Every fallible operation in this crate returns `Result<T, Error>`; panics
/// are reserved for internal index arithmetic bugs.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector lengths disagree.
    DimensionMismatch { expected: usize, found: usize },
    /// Matrix shapes are incompatible for the requested operation.
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A square matrix was required.
    NotSquare { rows: usize, cols: usize },
    /// Symmetry deviation exceeded the caller's tolerance.
    NotSymmetric { max_deviation: f64 },
    /// Cholesky pivot was not strictly positive.
    NotPositiveDefinite,
    /// Condition estimate exceeded the supported range.
    IllConditioned { estimate: f64 },
    /// Iterative eigensolver failed to reach its stopping rule.
    NoConvergence { sweeps: usize },
    /// Columns were linearly dependent where a full-rank basis was required.
    RankDeficient,
    /// A scalar or structural argument violated its documented precondition.
    InvalidParameter { what: &'static str },
    /// A covariate fell outside the support of the sampling family.
    OutOfSupport { index: usize, value: f64 },
    /// The operation needs at least one observation.
    EmptyInstance,
    /// A vector or matrix with near-zero norm cannot be normalized.
    ZeroNorm,
    /// An iterate exceeded the divergence guard; the trajectory is partial.
    Diverged { step: usize },
    /// The supplied direction was not normalized to unit length.
    NotNormalized { norm: f64 },
    /// The link has no derivative available for derivative-based routines.
    MissingDerivative,
    /// The model family does not support the requested operation.
    UnsupportedModel { what: &'static str },
    /// A support or candidate index exceeded its bound.
    IndexOutOfRange { index: usize, bound: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ShapeMismatch { left, right } => write!(
                f,
                "shape mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NotSquare { rows, cols } => {
                write!(f, "matrix must be square, got {rows}x{cols}")
            }
            Error::NotSymmetric { max_deviation } => {
                write!(f, "matrix not symmetric, max deviation {max_deviation:e}")
            }
            Error::NotPositiveDefinite => write!(f, "matrix not positive definite"),
            Error::IllConditioned { estimate } => {
                write!(f, "condition estimate {estimate:e} exceeds 1e12")
            }
            Error::NoConvergence { sweeps } => {
                write!(f, "eigensolver did not converge in {sweeps} sweeps")
            }
            Error::RankDeficient => write!(f, "columns are rank deficient"),
            Error::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            Error::OutOfSupport { index, value } => {
                write!(f, "covariate {value} at index {index} outside family support")
            }
            Error::EmptyInstance => write!(f, "instance has no observations"),
            Error::ZeroNorm => write!(f, "cannot normalize near-zero norm input"),
            Error::Diverged { step } => write!(f, "iterate diverged at step {step}"),
            Error::NotNormalized { norm } => {
                write!(f, "direction must have unit norm, got {norm}")
            }
            Error::MissingDerivative => write!(f, "link derivative unavailable"),
            Error::UnsupportedModel { what } => write!(f, "unsupported model family: {what}"),
            Error::IndexOutOfRange { index, bound } => {
                write!(f, "index {index} out of range for bound {bound}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
