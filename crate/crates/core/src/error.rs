use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by drivers to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed rows, empty sets, wrong shapes.
    Input,
    /// A modelling assumption (irreducibility, drift) does not hold.
    Assumption,
    /// A numerical guard tripped (residual, breakdown, non-convergence).
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("state enumeration exceeded the cap of {cap} states")]
    EnumerationCap { cap: usize },

    #[error("return set K is empty")]
    EmptyReturnSet,

    #[error("seed state does not satisfy the truncation predicate")]
    SeedOutsideTruncation,

    #[error("invalid transition row at {state}: {reason}")]
    InvalidRow { state: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value is not finite at {0}")]
    NonFinite(String),

    #[error("matrix is singular to working precision (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },

    #[error("residual {residual:e} exceeds tolerance {tolerance:e} in {context}")]
    Residual {
        context: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("matrix is reducible: {0}")]
    Reducible(String),

    #[error("G is not irreducible ({classes} communicating classes); choose K and A so that G is irreducible")]
    GReducible { classes: usize },

    #[error("G has a zero row sum at K-index {0}: K is unreachable within A from that state")]
    ZeroRowSum(usize),

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("numerical breakdown: {context} denominator is {value:e}")]
    Breakdown { context: &'static str, value: f64 },

    #[error("drift condition violated at {count} state(s); first at {first}")]
    DriftViolated { count: usize, first: String },

    #[error("reward is below the exit rate at {0}; pass the expert flag to skip this check")]
    RewardBelowRate(String),

    #[error("certificate has not been verified")]
    Unverified,

    #[error("operation requires a singleton return set, got |K| = {0}")]
    NotSingleton(usize),

    #[error("bound {0} is not valid for the Perron-Frobenius stochasticization")]
    NotCertified(&'static str),

    #[error("unstable parameters: {0}")]
    Unstable(String),

    #[error("no closed communicating class found in the conditioned chain")]
    NoClosedClass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EnumerationCap { .. }
            | Error::EmptyReturnSet
            | Error::SeedOutsideTruncation
            | Error::InvalidRow { .. }
            | Error::Dimension(_)
            | Error::NotSingleton(_)
            | Error::NotCertified(_)
            | Error::InvalidArgument(_)
            | Error::Unverified => ErrorKind::Input,
            Error::Reducible(_)
            | Error::GReducible { .. }
            | Error::ZeroRowSum(_)
            | Error::DriftViolated { .. }
            | Error::Unstable(_)
            | Error::NoClosedClass
            | Error::RewardBelowRate(_) => ErrorKind::Assumption,
            Error::NonFinite(_)
            | Error::Singular { .. }
            | Error::Residual { .. }
            | Error::NoConvergence(_)
            | Error::Breakdown { .. } => ErrorKind::Numerical,
        }
    }
}
