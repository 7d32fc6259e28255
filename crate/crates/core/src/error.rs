use std::path::PathBuf;

/// Errors raised by the numerical core and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e})")]
    NotSkew { asymmetry: f64 },

    #[error("matrix is not in the tangent space at the base rotation (asymmetry {asymmetry:.3e})")]
    NotTangent { asymmetry: f64 },

    #[error("diffusion time {t} is below the series floor t_min = {t_min}")]
    TimeBelowFloor { t: f64, t_min: f64 },

    /// The truncated heat-kernel series produced a non-positive density
    /// where one was required.
    #[error("non-positive IGSO3 density {value:.3e} at omega = {omega}, t = {t}")]
    NonPositiveDensity { omega: f64, t: f64, value: f64 },

    #[error("IGSO3 table for t = {t} lost {clamped:.3e} of its mass to negative lobes")]
    BadTable { t: f64, clamped: f64 },

    #[error("simulation produced a non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that come from the numerical domain rather than from
    /// malformed input or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TimeBelowFloor { .. }
                | Error::NonPositiveDensity { .. }
                | Error::BadTable { .. }
                | Error::NonFinite { .. }
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
