use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the requested object.
    #[error("{quantity} out of domain: {reason}")]
    Domain {
        quantity: &'static str,
        reason: String,
    },

    /// A truncated series hit its support cap before the tail bound fell
    /// below the requested tolerance.
    #[error(
        "{family} did not converge within {cap} support points \
         (tail bound {tail_bound:e}, partial absolute mass {partial_abs_mass:e})"
    )]
    NonConvergence {
        family: &'static str,
        cap: usize,
        tail_bound: f64,
        partial_abs_mass: f64,
    },

    /// Inverting a characteristic function on too coarse a grid.
    #[error("grid of {grid_size} points is too small: {boundary_mass:e} mass near the wrap-around boundary")]
    GridTooSmall {
        grid_size: usize,
        boundary_mass: f64,
    },

    #[error("total masses differ ({left} vs {right}); the Wasserstein sum diverges")]
    MassMismatch { left: f64, right: f64 },

    /// Computation would exceed a state or enumeration budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(quantity: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            quantity,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. } | Error::MassMismatch { .. } => 2,
            Error::NonConvergence { .. } | Error::GridTooSmall { .. } | Error::Resource(_) => 3,
            Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        }
    }
}
