use thiserror::Error;

/// Errors raised by the solver, the particle simulator and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KsError {
    #[error("kernel evaluated at the origin (|x| = {norm:e})")]
    SingularOrigin { norm: f64 },

    #[error("resolution too coarse: spacing {spacing} exceeds limit {limit}")]
    ResolutionTooCoarse { spacing: f64, limit: f64 },

    #[error("unsupported dimension {0} (supported: 2 and 3)")]
    UnsupportedDimension(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("time step {dt:e} exceeds the stability bound {dt_max:e}")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("non-finite value in the solution at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("trajectory blew up at t = {t}; A_T is undefined")]
    BlowupTrajectory { t: f64 },

    #[error("population exploded: {alive} alive particles exceed the limit {limit}")]
    PopulationExplosion { alive: usize, limit: usize },

    #[error("grids do not match")]
    GridMismatch,

    #[error("{mass:e} of atom mass lies outside the box")]
    UnboundedSupport { mass: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("cutoff A = {a} is below A_T = {a_t}")]
    CutoffBelowThreshold { a: f64, a_t: f64 },

    #[error("cell N = {n}, replica = {replica}, seed = {seed}: {source}")]
    Cell {
        n: usize,
        replica: usize,
        seed: u64,
        #[source]
        source: Box<KsError>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for KsError {
    fn from(e: std::io::Error) -> Self {
        KsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KsError>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> KsError {
    KsError::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
