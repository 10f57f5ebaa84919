use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library. Every variant maps to a stable
/// machine-readable kind (see [`Error::kind`]) and an exit-code class.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{quantity} must be positive, got {value}")]
    Domain { quantity: &'static str, value: f64 },

    #[error("far field is not supersonic (Mach {mach})")]
    SubsonicFarField { mach: f64 },

    #[error("boundary strength {delta} exceeds admissible maximum {max}")]
    BoundaryTooStrong { delta: f64, max: f64 },

    #[error("singular state: {0}")]
    Singular(String),

    #[error("profile left the admissible region at x1 = {x1}")]
    ProfileDiverged { x1: f64 },

    #[error("profile tail {tail:e} at x1 = {length} is above tolerance {tol:e}; domain too short")]
    DomainTooShort { length: f64, tail: f64, tol: f64 },

    #[error("tail fit failed: {0}")]
    FitFailed(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("outflow condition violated at tangential node {node} (y2 = {y2}): u_b.n = {flux}")]
    OutflowViolated { node: usize, y2: f64, flux: f64 },

    #[error("positivity lost: {field} = {value} at node ({i1}, {i2}), t = {t}")]
    Positivity {
        field: &'static str,
        value: f64,
        i1: usize,
        i2: usize,
        t: f64,
    },

    #[error("time marching did not reach steady tolerance by t = {t} (last rate {rate:e})")]
    NotConverged { t: f64, rate: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

/// Exit-code class of an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Domain,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Domain { .. } => "domain",
            Error::SubsonicFarField { .. } => "subsonic_far_field",
            Error::BoundaryTooStrong { .. } => "boundary_too_strong",
            Error::Singular(_) => "singular",
            Error::ProfileDiverged { .. } => "profile_diverged",
            Error::DomainTooShort { .. } => "domain_too_short",
            Error::FitFailed(_) => "fit_failed",
            Error::GridTooSmall(_) => "grid_too_small",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::OutflowViolated { .. } => "outflow_violated",
            Error::Positivity { .. } => "positivity",
            Error::NotConverged { .. } => "not_converged",
            Error::Invariant(_) => "invariant",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::Io(_) => ErrorClass::Config,
            Error::Positivity { .. } | Error::NotConverged { .. } => ErrorClass::Runtime,
            _ => ErrorClass::Domain,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
