use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("user has {got} (angle, gain) pairs but the realization uses {expected} paths")]
    PathCount { expected: usize, got: usize },

    #[error("log-sum-exp of an empty set")]
    EmptyInput,

    #[error("every LU/EVE pair has a zero channel vector; correlation undefined")]
    UndefinedCorrelation,

    #[error("legitimate-user smoothing term is not positive ({0:e})")]
    Degenerate(f64),

    #[error("weight {0} has zero modulus and cannot be normalized")]
    ZeroModulus(usize),

    #[error("not a descent direction (directional derivative {0:e})")]
    NotDescent(f64),

    #[error("Armijo condition not met after {0} backtracks")]
    LineSearchFailed(usize),

    #[error("infeasible geometry: aperture {aperture} m cannot hold {antennas} antennas at half-wavelength spacing {half_wavelength} m")]
    InfeasibleGeometry {
        aperture: f64,
        antennas: usize,
        half_wavelength: f64,
    },

    #[error("search space of {size} points exceeds the limit of {limit}")]
    SearchSpace { size: u128, limit: u128 },
}
