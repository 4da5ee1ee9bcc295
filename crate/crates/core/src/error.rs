use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: operators need dim >= 2")]
    InvalidDimension { dim: usize },

    #[error("truncation insufficient: dim {dim} < required {required} for mean occupation {nbar}")]
    TruncationInsufficient { dim: usize, required: usize, nbar: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not Hermitian (max |H - H^dag| = {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("density matrix invariant violated: {0}")]
    InvalidDensity(String),

    #[error("step size underflow at t = {t:e} s (h = {h:e} s); problem is too stiff for the explicit integrator")]
    Stiffness { t: f64, h: f64 },

    #[error("integration accuracy: {0}")]
    IntegrationAccuracy(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("resonance singularity: qubit-mode detuning is zero")]
    ResonanceSingularity,

    #[error("straddling singularity: detuning equals the anharmonicity")]
    StraddlingSingularity,

    #[error("no pure dephasing: T2 = {t2:e} s >= 2*T1 = {two_t1:e} s")]
    NoPureDephasing { t2: f64, two_t1: f64 },

    #[error("dispersive shift is zero; occupation cannot be extracted")]
    ZeroShift,

    #[error("non-identifiable: {0}")]
    NonIdentifiable(String),

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fit verification failed: {0}")]
    Verification(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
