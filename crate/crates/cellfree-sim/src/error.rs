use thiserror::Error;

/// Errors raised while building or running a network scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("distance {0} m below the 1 m pathloss model validity limit")]
    InvalidDistance(f64),

    #[error("correlation matrix has eigenvalue {eigenvalue} below tolerance {tolerance}")]
    InvalidCorrelation { eigenvalue: f64, tolerance: f64 },

    #[error("{0} UEs exceed the {1} orthogonal pilot sequences (pilot contamination unsupported)")]
    UnsupportedPilotLoad(usize, usize),

    #[error("singular linear system in {0}")]
    SingularSystem(&'static str),

    #[error(transparent)]
    Fbl(#[from] fbl_core::FblError),
}
