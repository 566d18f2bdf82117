use thiserror::Error;

/// Errors produced by the finite-blocklength numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FblError {
    /// An input was non-finite or violated a precondition such as `s > 0`.
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// A CGF evaluation point fell outside the open domain `(lo, hi)`.
    #[error("zeta = {zeta} outside the CGF domain ({lo}, {hi})")]
    OutsideCgfDomain { zeta: f64, lo: f64, hi: f64 },

    /// The problem degenerated numerically (e.g. collapsed CGF domain).
    #[error("numerical degeneracy: {0}")]
    Degenerate(&'static str),
}
