use std::path::PathBuf;

/// Errors raised anywhere in the simulator and estimators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("endpoint lies behind panel {panel} (outside its reflecting half-space)")]
    BehindPanel { panel: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("channel configuration error: {0}")]
    Configuration(String),

    #[error("dimension mismatch: expected {expected} atoms, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("phase index {index} out of range for atom {atom} with {levels} levels")]
    PhaseIndexOutOfRange {
        atom: usize,
        index: u16,
        levels: usize,
    },

    #[error("exhaustive schedule would need {needed} configurations, above the cap of {cap}")]
    CapExceeded { needed: f64, cap: u64 },

    #[error("empty schedule")]
    EmptySchedule,

    #[error("insufficient sampling: no samples with panel {panel}, atom ({u}, {v}) at level {k}")]
    EmptyBin {
        panel: usize,
        u: usize,
        v: usize,
        k: usize,
    },

    #[error("panel {panel} has {n_row}x{n_col} atoms; sensing needs at least 2x2")]
    UnsupportedPanel {
        panel: usize,
        n_row: usize,
        n_col: usize,
    },

    #[error("elevation estimate {phi_hat} rad is too close to the pole for azimuth recovery")]
    NearPolar { phi_hat: f64 },

    #[error("bearing lines are parallel (denominator {denominator:e})")]
    DegenerateTriangulation { denominator: f64 },

    #[error("bearing of panel {panel} is perpendicular to the x axis (tangent singular)")]
    TangentSingularity { panel: usize },

    #[error("direct channel mean is zero; no reference phase for rotation")]
    UndefinedReference,

    #[error("SNR without panels is zero; boost undefined")]
    ZeroDenominator,

    #[error("experiment configuration error: {0}")]
    Experiment(String),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
