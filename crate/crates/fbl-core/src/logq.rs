//! Numerically stable log-domain helpers built around the Gaussian
//! Q-function. Everything downstream exponentiates quantities of the form
//! `n*kappa + log Q(x)` with `n` in the hundreds, so these must stay finite
//! and accurate far beyond the range where `Q(x)` itself underflows.

use std::f64::consts::{LN_2, PI, SQRT_2};

/// Natural log of the Gaussian tail `Q(x) = P[N(0,1) > x]`.
///
/// For `x <= 8` the complementary error function is evaluated directly.
/// Beyond that the asymptotic expansion
/// `log Q(x) = -x^2/2 - log(x sqrt(2 pi)) + log(1 - 1/x^2 + 3/x^4)`
/// is used, which stays finite for arbitrarily large `x`.
pub fn log_q(x: f64) -> f64 {
    if x > 8.0 {
        let x2 = x * x;
        -0.5 * x2 - (x * (2.0 * PI).sqrt()).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    } else {
        (0.5 * libm::erfc(x / SQRT_2)).ln()
    }
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 - exp(x))` for `x < 0`.
pub fn log1m_exp(x: f64) -> f64 {
    debug_assert!(x < 0.0);
    if x > -LN_2 {
        (-libm::expm1(x)).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}
