use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("energy {energy} is outside the open positive band ({lower}, {upper})")]
    EnergyOutOfBand { energy: f64, lower: f64, upper: f64 },

    #[error("energy {energy} is too close to a band edge: sin 2k = {sin2k:e}")]
    NearBandEdge { energy: f64, sin2k: f64 },

    #[error("disorder path has {available} sites but {required} are required")]
    PathTooShort { required: usize, available: usize },

    #[error("site {site} is outside the admissible range {lo}..={hi}")]
    SiteOutOfRange { site: usize, lo: usize, hi: usize },

    #[error("Prüfer multiplier degenerate at site {site}: |m| = {modulus:e}")]
    DegenerateMultiplier { site: usize, modulus: f64 },

    #[error("k = {k} lies within {guard} of the excluded value {excluded}")]
    ExcludedK { k: f64, excluded: f64, guard: f64 },

    #[error("estimator is not available at alpha = {alpha}")]
    SubcriticalOnly { alpha: f64 },

    #[error("pivot {pivot:e} at row {row}: energy is too close to a box eigenvalue")]
    NearSingular { row: usize, pivot: f64 },

    #[error("slope confidence interval [{lo}, {hi}] contains zero; more replicas needed")]
    InsufficientReplicas { lo: f64, hi: f64 },

    #[error("no eigenvalues in window [{lo}, {hi}]")]
    WindowEmpty { lo: f64, hi: f64 },

    #[error("eigenvalue iteration failed to converge at index {index}")]
    ConvergenceFailure { index: usize },

    #[error("box dimension {dim} exceeds the dense cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("initial state is not supported on the box: {0}")]
    UnsupportedInitialState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io: {0}")]
    Io(String),
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

pub type Result<T> = std::result::Result<T, Error>;
