use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters (grid shape, mass, step size, coefficients).
    #[error("configuration error: {0}")]
    Config(String),

    /// A wave touches or wraps across the periodic grid boundary.
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("waves live on different grids")]
    GridMismatch,

    #[error("unknown branch label {0}")]
    UnknownLabel(u32),

    #[error("numerical instability: {0}")]
    Instability(String),

    /// A quantity is undefined because a magnitude or norm vanishes.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("at t = {t}: {inner}")]
    AtTime {
        t: f64,
        #[source]
        inner: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_time(self, t: f64) -> Self {
        Error::AtTime { t, inner: Box::new(self) }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Geometry(_) => "geometry",
            Error::GridMismatch => "grid_mismatch",
            Error::UnknownLabel(_) => "unknown_label",
            Error::Instability(_) => "instability",
            Error::Degenerate(_) => "degenerate",
            Error::Precondition(_) => "precondition",
            Error::AtTime { inner, .. } => inner.kind(),
        }
    }
}
