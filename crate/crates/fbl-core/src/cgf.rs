//! Cumulant generating function of the negated generalized information
//! density, in the closed form valid for Gaussian codebooks.
//!
//! With `b = beta_B - beta_A` and `c = beta_A beta_B (1 - nu)` the CGF is
//!
//! ```text
//! kappa(z)  = -z log(1 + s rho |g_hat|^2) - log D(z),   D(z) = 1 + b z - c z^2
//! kappa'(z) = -log(1 + s rho |g_hat|^2) - D'(z) / D(z)
//! kappa''(z) = (D'(z)/D(z))^2 + 2 c / D(z)
//! ```
//!
//! and is defined on the open interval where `D > 0`.

use crate::error::FblError;
use crate::params::{LinkCoeffs, SaddlepointParams};

/// A CGF evaluation: value, first two derivatives, and the domain endpoints.
#[derive(Debug, Clone, Copy)]
pub struct CgfEval {
    pub kappa: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub zeta: f64,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

/// Endpoints of the open interval on which the CGF is defined.
///
/// These are the real roots of `1 + b z - c z^2 = 0`; a side without a real
/// root is reported as the corresponding infinity.
pub fn cgf_domain(coeffs: &LinkCoeffs) -> (f64, f64) {
    let b = coeffs.beta_b - coeffs.beta_a;
    let c = coeffs.beta_a * coeffs.beta_b * (1.0 - coeffs.nu);
    if c > 0.0 {
        let disc = (b * b + 4.0 * c).sqrt();
        ((b - disc) / (2.0 * c), (b + disc) / (2.0 * c))
    } else if b > 0.0 {
        (-1.0 / b, f64::INFINITY)
    } else if b < 0.0 {
        (f64::NEG_INFINITY, -1.0 / b)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

pub(crate) fn cgf_at(coeffs: &LinkCoeffs, zeta: f64) -> Result<CgfEval, FblError> {
    let (lo, hi) = cgf_domain(coeffs);
    let b = coeffs.beta_b - coeffs.beta_a;
    let c = coeffs.beta_a * coeffs.beta_b * (1.0 - coeffs.nu);
    let d = 1.0 + b * zeta - c * zeta * zeta;
    if !(zeta > lo && zeta < hi) || d <= 0.0 {
        return Err(FblError::OutsideCgfDomain { zeta, lo, hi });
    }
    let dp = b - 2.0 * c * zeta;
    let ratio = dp / d;
    Ok(CgfEval {
        kappa: -zeta * coeffs.log_metric_gain - d.ln(),
        kappa1: -coeffs.log_metric_gain - ratio,
        kappa2: ratio * ratio + 2.0 * c / d,
        zeta,
        domain_lo: lo,
        domain_hi: hi,
    })
}

/// Evaluates `kappa`, `kappa'`, `kappa''` at `zeta`.
///
/// The generalized mutual information and dispersion of the link are
/// `I_s = -kappa'(0)` and `V_s = kappa''(0)`. Returns a domain error carrying
/// the endpoints when `zeta` lies outside the open domain.
pub fn cgf(params: &SaddlepointParams, zeta: f64) -> Result<CgfEval, FblError> {
    cgf_at(&params.coeffs()?, zeta)
}
