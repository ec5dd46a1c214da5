use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("spectrum is empty")]
    EmptySpectrum,
    #[error("eigenvalue {index} is not finite")]
    NonFiniteEigenvalue { index: usize },
    #[error("invalid order m={0}, need m >= 1")]
    InvalidOrder(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {0} is too close to the spectrum of L")]
    SpectralCollision(C64),
    #[error("point {0} coincides with a regular point z_j")]
    RegularPointCollision(C64),
    #[error("regular points {0} and {1} coincide")]
    DuplicateRegularPoint(usize, usize),
    #[error("expected {expected} regular points, got {got}")]
    RegularSetSize { expected: usize, got: usize },
    #[error("partial-fraction weights do not sum to zero (|sum| = {0:e})")]
    PartialFractionDefect(f64),
    #[error("tilde scaling needs real regular points")]
    TildeNeedsRealPoints,
    #[error("tilde scaling needs P~(lambda_{index}) > 0")]
    TildeNotPositive { index: usize },
    #[error("functionals are linearly dependent (sigma_min/sigma_max = {0:e})")]
    DependentFunctionals(f64),
    #[error("need N >= m*d, got N={n}, m*d={md}")]
    InsufficientHeadroom { n: usize, md: usize },
    #[error("index {index} out of range (< {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("renormalized admissible matrix is inconsistent: {0}")]
    InvalidAdmissible(String),
    #[error("deficiency vectors g_(sigma,j) are linearly dependent (cond = {0:e})")]
    DependentDeficiencyVectors(f64),
    #[error("operation needs m > 1")]
    OrderTooSmall,
    #[error("point {0} lies in the spectrum of the reduced matrix Delta-hat")]
    DeltaHatCollision(C64),
    #[error("D - M C is singular at z = {0}")]
    NotInResolventSet(C64),
    #[error("linear relation is invalid: {0}")]
    InvalidRelation(String),
    #[error("point {0} is not in the resolvent set of iota A_0")]
    NotInSigmaIota(C64),
    #[error("deformation is not positive (min eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("G_Z is not Hermitian; {0} needs the Hermitian regime")]
    NonHermitian(&'static str),
}

impl Error {
    /// Stable machine-readable code used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySpectrum => "EMPTY_SPECTRUM",
            Error::NonFiniteEigenvalue { .. } => "NON_FINITE_EIGENVALUE",
            Error::InvalidOrder(_) => "INVALID_ORDER",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::SpectralCollision(_) => "SPECTRAL_COLLISION",
            Error::RegularPointCollision(_) => "REGULAR_POINT_COLLISION",
            Error::DuplicateRegularPoint(..) => "DUPLICATE_REGULAR_POINT",
            Error::RegularSetSize { .. } => "REGULAR_SET_SIZE",
            Error::PartialFractionDefect(_) => "PARTIAL_FRACTION_DEFECT",
            Error::TildeNeedsRealPoints => "TILDE_NEEDS_REAL_POINTS",
            Error::TildeNotPositive { .. } => "TILDE_NOT_POSITIVE",
            Error::DependentFunctionals(_) => "DEPENDENT_FUNCTIONALS",
            Error::InsufficientHeadroom { .. } => "INSUFFICIENT_HEADROOM",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::InvalidAdmissible(_) => "INVALID_ADMISSIBLE",
            Error::DependentDeficiencyVectors(_) => "DEPENDENT_DEFICIENCY_VECTORS",
            Error::OrderTooSmall => "ORDER_TOO_SMALL",
            Error::DeltaHatCollision(_) => "DELTA_HAT_COLLISION",
            Error::NotInResolventSet(_) => "NOT_IN_RESOLVENT_SET",
            Error::InvalidRelation(_) => "INVALID_RELATION",
            Error::NotInSigmaIota(_) => "NOT_IN_SIGMA_IOTA",
            Error::NotPositive(_) => "NOT_POSITIVE",
            Error::NonHermitian(_) => "NON_HERMITIAN",
        }
    }
}
