//! Finite-blocklength error-probability numerics for a scalar link with
//! mismatched scaled-nearest-neighbor decoding.
//!
//! The channel model is `v[k] = g q[k] + z[k]` for `k = 1..n`, with Gaussian
//! codebook entries `q[k] ~ CN(0, rho)`, noise `z[k] ~ CN(0, sigma2)`, and a
//! receiver that decodes with a channel estimate `g_hat` treated as perfect.
//! The random-coding union bound with parameter `s` (RCUs) upper-bounds the
//! packet error probability of this decoder; this crate evaluates it three
//! ways:
//!
//! * [`saddlepoint_eps`] — closed-form saddlepoint approximation of the
//!   conditional tail probability, accurate down to URLLC error rates,
//!   evaluated entirely in the log domain,
//! * [`normal_approx_eps`] — the Gaussian (Berry–Esseen style) approximation,
//!   accurate only near the generalized mutual information,
//! * [`rcus_mc_oracle`] — a brute-force Monte-Carlo estimate of the RCUs tail
//!   probability, used as an independent oracle in tests.
//!
//! [`optimize_s`] tightens the bound over the free decoding-metric parameter
//! `s > 0`. All routines are pure functions of their inputs; the Monte-Carlo
//! oracle is deterministic given its seed.

mod cgf;
mod error;
mod logq;
mod normal;
mod optimize;
mod oracle;
mod params;
mod saddlepoint;

pub use cgf::{cgf, cgf_domain, CgfEval};
pub use error::FblError;
pub use logq::{log1m_exp, log_q, log_sum_exp};
pub use normal::normal_approx_eps;
pub use optimize::{golden_section_min, optimize_s};
pub use oracle::{rcus_mc_oracle, wilson_ci_95, McEstimate};
pub use params::{betas, LinkCoeffs, SaddlepointParams};
pub use saddlepoint::{saddlepoint_eps, solve_zeta, ErrorProbResult, Regime, ZetaSolution};
