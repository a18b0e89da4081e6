use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Robot/terrain/dataset description failed schema or invariant checks.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    /// A file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A JSON document could not be parsed.
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    /// A spatial query fell outside the grid.
    #[error("query ({x:.3}, {y:.3}) outside map bounds x:[{x_min:.3}, {x_max:.3}] y:[{y_min:.3}, {y_max:.3}]")]
    OutOfBounds {
        x: f64,
        y: f64,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },

    /// A workspace bin holds no poses.
    #[error("workspace bin {bin} is empty")]
    EmptyBin { bin: usize },

    /// The collision-free sweep produced fewer poses than requested.
    #[error("requested {requested} poses but only {available} collision-free configurations are available")]
    InsufficientPoses { requested: usize, available: usize },

    /// Command resampling hit the attempt bound without a terrain-feasible candidate.
    #[error("no terrain-feasible command after {attempts} attempts; last candidate at ({:.3}, {:.3}, {:.3}) needed z>={required_z:.3}{context}", last_candidate[0], last_candidate[1], last_candidate[2])]
    ResampleExhausted {
        attempts: usize,
        /// Position of the last rejected candidate.
        last_candidate: [f64; 3],
        required_z: f64,
        context: String,
    },

    /// Stance generation hit the attempt bound.
    #[error("no stable initial configuration after {attempts} attempts on {terrain}")]
    StanceExhausted { attempts: usize, terrain: String },

    /// Keypoint triple does not match the canonical cube geometry.
    #[error("keypoint rigidity violated: max pairwise-distance deviation {max_deviation:.3e} m exceeds {tolerance:.1e} m")]
    Rigidity { max_deviation: f64, tolerance: f64 },

    /// A solver produced NaN or infinite values.
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// A scalar argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Shorthand for a [`Error::Validation`] with a field path.
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
