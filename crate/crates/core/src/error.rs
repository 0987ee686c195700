use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid dimension {0}: need n >= {1}")]
    InvalidDimension(usize, usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("lambda = {lambda} lies on the discrete Dirac spectrum (eigenvalue {eigenvalue})")]
    OnSpectrum { lambda: f64, eigenvalue: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("calibration failed: fit deviation {deviation:.3e} exceeds {limit:.1e} (d = {d:.6})")]
    Calibration { deviation: f64, limit: f64, d: f64 },
    #[error("{stage} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { stage: &'static str, iterations: usize, residual: f64 },
    #[error("no sign change of the Nehari function in [{t_min}, {t_max}]")]
    Bracket { t_min: f64, t_max: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
