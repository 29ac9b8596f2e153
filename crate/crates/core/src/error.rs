use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("extinguished trajectory: surviving amplitude {amplitude:e} leaves the phase undefined")]
    ExtinguishedTrajectory { amplitude: f64 },

    #[error("no closed loop found within search budget (best residual {residual:e})")]
    NoClosure { residual: f64 },

    #[error("ill-conditioned discretization: consecutive states {index} and {next} are orthogonal")]
    IllConditioned { index: usize, next: usize },

    #[error("fit window exhausted: minimum sits on the window edge at {at}")]
    FitWindowExhausted { at: f64 },

    #[error("unfittable contrast {contrast:.4} (below {threshold})")]
    UnfittableContrast { contrast: f64, threshold: f64 },

    #[error("flat model at fitted value {at}: probe step does not change the model")]
    FlatModel { at: f64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
