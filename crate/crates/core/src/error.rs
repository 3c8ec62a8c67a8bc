use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid breather parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("boundary conditions violated: {0}")]
    BoundaryConditions(String),

    #[error("non-homogeneous boundary data is not supported (u(0) = {value}, u_x(0) = {slope})")]
    NonHomogeneousBoundary { value: f64, slope: f64 },

    #[error("time step {dt} exceeds stability budget {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("singular modulation Jacobian (det = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("modulation fit did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shift rho2 = {rho2} left the admissible window (-{half}, {half})")]
    ShiftOutOfRange { rho2: f64, half: f64 },

    #[error("under-resolved grid: {0}")]
    UnderResolved(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("numerical blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
