use thiserror::Error;

/// Errors raised by the lattice, spectral and dynamics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("period must be at least 2, got {0}")]
    PeriodTooSmall(usize),

    #[error("degenerate potential: V_{first} = V_{second} = {value}")]
    DegeneratePotential {
        first: usize,
        second: usize,
        value: f64,
    },

    #[error("contour radius must exceed 1, got {0}")]
    InvalidRadius(f64),

    #[error("sublattice index {m} outside 1..={p}")]
    SublatticeOutOfRange { m: usize, p: usize },

    #[error("hopping amplitude must be nonzero")]
    ZeroHopping,

    #[error("corner parameter z must be nonzero")]
    ZeroCornerParameter,

    #[error("coupling lambda = {lambda} exceeds lambda0 = {lambda0}; band labeling undefined")]
    CouplingAboveThreshold { lambda: f64, lambda0: f64 },

    #[error("mu = {mu} is below mu0 = {mu0}")]
    CouplingBelowThreshold { mu: f64, mu0: f64 },

    #[error("bands too close: min gap {gap:e} below tolerance {tolerance:e}")]
    DegenerateBands { gap: f64, tolerance: f64 },

    #[error(
        "root finding did not converge after {iterations} iterations (backward error {residual:e})"
    )]
    RootFindingDivergence { iterations: usize, residual: f64 },

    #[error("root {re}{im:+}i is not within gamma/4 of exactly one potential value")]
    AmbiguousLabeling { re: f64, im: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("determinant formula limited to p <= {limit}, got {p}")]
    FormulaTooLarge { p: usize, limit: usize },

    #[error("zeta = {re}{im:+}i lies outside every disk |zeta - V_j| <= gamma/2")]
    DomainViolation { re: f64, im: f64 },

    #[error("quadrature unresolved: doubling the node count changed an entry by {change:e} (tolerance {tolerance:e})")]
    QuadratureUnresolved { change: f64, tolerance: f64 },

    #[error("boundary spill: amplitude {amplitude:e} within {edge} sites of the lattice edge")]
    BoundarySpill { amplitude: f64, edge: usize },

    #[error("method unavailable: {sites} sites exceeds the limit {limit}")]
    MethodUnavailable { sites: usize, limit: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("kernel norm never reaches the threshold at t = {t}")]
    ThresholdNeverCrossed { t: f64 },

    #[error("velocity estimate {value:e} not converged: relative drift {drift:.3e} over the last quarter")]
    NotConverged { value: f64, drift: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
