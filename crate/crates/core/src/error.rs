use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radial table `{0}` has not been built")]
    TableNotBuilt(&'static str),
    #[error("C1 extrapolation did not settle: last rung change {change:.3e} exceeds {tol:.1e}")]
    ExtrapolationDiverged { change: f64, tol: f64 },
    #[error("order out of range: {0}")]
    OrderOutOfRange(String),
    #[error("exhaustive sum needs {needed} terms, budget is {budget}")]
    CombinatorialBlowup { needed: u128, budget: u128 },
    #[error("lattice under-resolved: dx = {dx} exceeds epsilon/4 = {limit}")]
    LatticeUnderResolved { dx: f64, limit: f64 },
    #[error("parameter gate violated: {0}")]
    ParameterGateViolated(String),
    #[error("dimension {0} unsupported for this operation")]
    DimensionUnsupported(usize),
    #[error("integrability gate violated: {0}")]
    IntegrabilityGateViolated(String),
    #[error("target accuracy unreached: {0}")]
    TargetAccuracyUnreached(String),
    #[error("quadrature near singularity: {0}")]
    QuadratureNearSingularity(String),
    #[error("family/order mismatch: {0}")]
    FamilyOrderMismatch(String),
    #[error("gate violated: {0}")]
    GateViolated(String),
    #[error("lag {0} is not a lattice multiple")]
    LagUnresolvable(f64),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("profile sign structure violated: {0}")]
    ProfileSignStructureViolated(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
