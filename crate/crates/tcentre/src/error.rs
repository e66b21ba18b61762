use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: parse/input errors exit 3,
/// numerical or regime-guard errors exit 4, underdetermined fits exit 5.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperfine tensor: {0}")]
    InvalidTensor(String),

    #[error("matrix is not Hermitian (|H - H^dag| = {deviation:.3e}, tolerance {tolerance:.3e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("zero-magnitude field direction")]
    ZeroField,

    #[error(
        "field below the secular regime guard: |gamma_e B| = {zeeman_rad_s:.3e} rad/s \
         must exceed 10 x max|A| = {limit_rad_s:.3e} rad/s"
    )]
    SecularRegime { zeeman_rad_s: f64, limit_rad_s: f64 },

    #[error("cannot assign electron branches: eigenvector spin character is ambiguous ({0})")]
    AmbiguousBranch(String),

    #[error("evolution time t = {t_s:.3e} s is below the {factor} tau = {limit_s:.3e} s guard; pass the override to proceed")]
    ShortEvolution { t_s: f64, limit_s: f64, factor: f64 },

    #[error("initial state has no overlap with the optically coupled electron branch")]
    ZeroNormProjection,

    #[error("average evolution operator is singular: the memory qubit has completely dephased")]
    SingularAverageUnitary,

    #[error("master-equation integrator failed to reach tolerance {tolerance:.1e} (residual {residual:.3e})")]
    IntegratorTolerance { tolerance: f64, residual: f64 },

    #[error("fit is underdetermined; unconstrained parameter directions: {}", directions.join(", "))]
    Underdetermined { directions: Vec<String> },

    #[error("fit did not converge after {iterations} iterations (best cost {best_cost:.6e})")]
    NoConvergence { iterations: usize, best_cost: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 3 parse, 4 numerical/regime, 5 underdetermined.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Dataset(_) | Error::Csv(_) | Error::Json(_) | Error::Io(_) => 3,
            Error::Underdetermined { .. } => 5,
            _ => 4,
        }
    }
}
