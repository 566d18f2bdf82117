//! Gaussian (normal) approximation of the RCUs tail probability.

use crate::cgf::cgf;
use crate::error::FblError;
use crate::logq::{log1m_exp, log_q};
use crate::params::SaddlepointParams;

/// `log Q((n I_s - ln(m - 1)) / sqrt(n V_s))` with `I_s = -kappa'(0)` and
/// `V_s = kappa''(0)`.
///
/// Accurate only when the rate is close to `I_s`; kept as the comparison
/// baseline. `ln(m - 1)` is evaluated as `nR + ln(1 - exp(-nR))` so small
/// `nR` stays exact.
pub fn normal_approx_eps(params: &SaddlepointParams) -> Result<f64, FblError> {
    let at_zero = cgf(params, 0.0)?;
    let i_s = -at_zero.kappa1;
    let v_s = at_zero.kappa2;
    if v_s <= 0.0 {
        return Err(FblError::Degenerate("non-positive dispersion V_s"));
    }
    let n = params.n() as f64;
    let nr = n * params.rate_nats();
    let ln_m1 = nr + log1m_exp(-nr);
    let x = (n * i_s - ln_m1) / (n * v_s).sqrt();
    Ok(log_q(x).min(0.0))
}
