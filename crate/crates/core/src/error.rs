use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("norm index p = {0} is not in [1, inf]")]
    InvalidNormIndex(f64),

    #[error("expected a field of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field must have zero sum (membership in U), got sum {sum:e}")]
    NonzeroMean { sum: f64 },

    #[error("chain needs at least 4 atoms, got N = {0}")]
    TooFewAtoms(usize),

    #[error("macroscopic gradient must be positive and finite, got F = {0}")]
    InvalidGradient(f64),

    #[error("deformation is not admissible: bond {bond} has strain {strain}")]
    Inadmissible { bond: usize, strain: f64 },

    #[error("atomistic index {index} is outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("continuum component {component:?} contains a single atom (left and right interfaces intersect)")]
    SingleAtomContinuum { component: Vec<usize> },

    #[error("invalid potential parameter: {0}")]
    InvalidPotential(String),

    #[error("derivative order {0} is not supported")]
    DerivativeOrder(usize),

    #[error("displacement has zero strain norm")]
    ZeroDisplacement,

    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("Hessian is singular on U (smallest eigenvalue {smallest_eigenvalue:e})")]
    SingularHessian { smallest_eigenvalue: f64 },

    #[error(
        "line search could not keep strains above the floor {floor} (min strain {min_strain})"
    )]
    StrainFloor { floor: f64, min_strain: f64 },

    #[error("state is not an equilibrium: residual {residual:e} exceeds {tolerance:e}")]
    NotEquilibrium { residual: f64, tolerance: f64 },

    #[error("ball of radius {radius:e} leaves the admissible set: l^inf strain perturbation {linf:e} exceeds {allowed:e}")]
    BallInadmissible {
        radius: f64,
        linf: f64,
        allowed: f64,
    },

    #[error("crack preconditions unmet: {reason}; smallest admissible N is {min_n}")]
    CrackPrecondition { reason: String, min_n: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
