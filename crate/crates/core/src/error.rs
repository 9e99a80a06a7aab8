use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// Probability reached the lattice boundary; the lattice half-width is too small.
    #[error(
        "boundary leak of {leaked:.3e} probability{} (n_max = {n_max}); increase n_max",
        .traj_index.map(|i| format!(" in trajectory {i}")).unwrap_or_default()
    )]
    BoundaryLeak {
        leaked: f64,
        n_max: usize,
        traj_index: Option<u64>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Attaches a trajectory index to a boundary-leak error.
    pub fn with_trajectory(self, index: u64) -> Self {
        match self {
            Error::BoundaryLeak { leaked, n_max, .. } => Error::BoundaryLeak {
                leaked,
                n_max,
                traj_index: Some(index),
            },
            other => other,
        }
    }
}
