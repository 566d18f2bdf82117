//! Saddlepoint solver and the three-regime tail-probability evaluation.
//!
//! The saddlepoint `zeta` solves `R = -kappa'(zeta)`; `kappa'' > 0` makes
//! `kappa'` strictly increasing, so the root is unique when it exists. The
//! tail probability is then assembled from one of three regime branches
//! (`zeta in [0,1]`, `zeta > 1`, `zeta < 0`), each evaluated entirely in the
//! log domain: every factor of the shape `exp(n a) Q(x)` is carried as
//! `n a + log Q(x)` because `exp(n kappa)` overflows long before URLLC
//! operating points are reached.

use crate::cgf::{cgf_at, cgf_domain};
use crate::error::FblError;
use crate::logq::{log1m_exp, log_q, log_sum_exp};
use crate::params::{LinkCoeffs, SaddlepointParams};

/// Which branch of the saddlepoint expansion produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ZetaIn01,
    ZetaGt1,
    ZetaLt0,
    /// Degenerate or out-of-range solve; the bound is clamped to 1.
    ClampedOne,
}

/// Saddlepoint evaluation result. `log_eps` is `ln` of the error-probability
/// approximation, always `<= 0`.
#[derive(Debug, Clone, Copy)]
pub struct ErrorProbResult {
    pub log_eps: f64,
    pub regime: Regime,
    pub zeta: f64,
    pub s_used: f64,
    /// Critical rate `-kappa'(1)`, when `zeta = 1` lies inside the domain.
    pub crit_rate: Option<f64>,
}

/// Which guarded endpoint a clamped solve stopped at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampedEnd {
    Lower,
    Upper,
}

/// Output of [`solve_zeta`].
#[derive(Debug, Clone, Copy)]
pub struct ZetaSolution {
    pub zeta: f64,
    /// Set when the rate fell outside the range attainable on the guarded
    /// interval and the endpoint was returned instead of a root.
    pub clamped: Option<ClampedEnd>,
}

const ZETA_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 200;
const EDGE_GUARD: f64 = 1e-8;
const EXPAND_LIMIT: f64 = 1e12;

fn solve_zeta_coeffs(coeffs: &LinkCoeffs, rate: f64) -> Result<ZetaSolution, FblError> {
    let (lo, hi) = cgf_domain(coeffs);
    if lo.is_finite() && hi.is_finite() {
        if hi - lo < 1e-12 {
            return Err(FblError::Degenerate("CGF domain width below 1e-12"));
        }
    } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
        let b = coeffs.beta_b - coeffs.beta_a;
        let c = coeffs.beta_a * coeffs.beta_b * (1.0 - coeffs.nu);
        if b == 0.0 && c == 0.0 {
            // Flat CGF: the information density is deterministic.
            return Err(FblError::Degenerate("flat CGF (zero tilted variance)"));
        }
    }

    // f(z) = kappa'(z) + R is strictly increasing from -inf to +inf on the
    // guarded interval (or approaches a finite limit on an unbounded side).
    let f = |z: f64| cgf_at(coeffs, z).map(|e| e.kappa1 + rate);

    let span_guard = if lo.is_finite() && hi.is_finite() { EDGE_GUARD * (hi - lo) } else { 0.0 };
    let mut a = if lo.is_finite() { lo + span_guard } else { -1.0 };
    let mut b = if hi.is_finite() { hi - span_guard } else { 1.0 };
    if !lo.is_finite() {
        // Expand downward until the sign flips or the limit is hit.
        while f(a)? > 0.0 {
            a *= 2.0;
            if a < -EXPAND_LIMIT {
                return Ok(ZetaSolution { zeta: a, clamped: Some(ClampedEnd::Lower) });
            }
        }
    }
    if !hi.is_finite() {
        while f(b)? < 0.0 {
            b *= 2.0;
            if b > EXPAND_LIMIT {
                return Ok(ZetaSolution { zeta: b, clamped: Some(ClampedEnd::Upper) });
            }
        }
    }
    if f(a)? > 0.0 {
        return Ok(ZetaSolution { zeta: a, clamped: Some(ClampedEnd::Lower) });
    }
    if f(b)? < 0.0 {
        return Ok(ZetaSolution { zeta: b, clamped: Some(ClampedEnd::Upper) });
    }

    // Safeguarded Newton: keep a bracket [a, b] with f(a) <= 0 <= f(b) and
    // fall back to bisection whenever the Newton step leaves it.
    let mut x = if a < 0.0 && b > 0.0 { 0.0 } else { 0.5 * (a + b) };
    for _ in 0..MAX_ITERS {
        let eval = cgf_at(coeffs, x)?;
        let fx = eval.kappa1 + rate;
        if fx.abs() <= ZETA_TOL {
            return Ok(ZetaSolution { zeta: x, clamped: None });
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / eval.kappa2;
        x = if eval.kappa2 > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    Ok(ZetaSolution { zeta: x, clamped: None })
}

/// Solves `R = -kappa'(zeta)` for the saddlepoint.
///
/// Converges to `|kappa'(zeta) + R| <= 1e-9` with safeguarded Newton inside
/// the guarded domain. When the rate lies outside the range attainable on the
/// guarded interval the corresponding endpoint is returned with
/// [`ZetaSolution::clamped`] set.
pub fn solve_zeta(params: &SaddlepointParams) -> Result<ZetaSolution, FblError> {
    solve_zeta_coeffs(&params.coeffs()?, params.rate_nats())
}

/// `log Psi_{n,zeta}(u) = n u^2 kappa''/2 + log Q(u sqrt(n kappa''))`.
fn log_psi(n: f64, kappa2: f64, u: f64) -> f64 {
    n * u * u * kappa2 / 2.0 + log_q(u * (n * kappa2).sqrt())
}

fn clamped_one(params: &SaddlepointParams) -> ErrorProbResult {
    ErrorProbResult {
        log_eps: 0.0,
        regime: Regime::ClampedOne,
        zeta: 0.0,
        s_used: params.s(),
        crit_rate: None,
    }
}

/// Evaluates the saddlepoint approximation of the RCUs conditional error
/// probability for one link.
///
/// The vanishing remainder terms of the expansion are dropped; the result is
/// the approximation the bound is evaluated with in practice, clamped to
/// `log_eps <= 0`. Degenerate links (e.g. zero received power) clamp to 1
/// instead of propagating a solver failure.
pub fn saddlepoint_eps(params: &SaddlepointParams) -> Result<ErrorProbResult, FblError> {
    let coeffs = params.coeffs()?;
    let sol = match solve_zeta_coeffs(&coeffs, params.rate_nats()) {
        Ok(sol) => sol,
        Err(FblError::Degenerate(_)) => return Ok(clamped_one(params)),
        Err(e) => return Err(e),
    };
    if sol.clamped == Some(ClampedEnd::Lower) {
        // Rate above everything attainable: the tail probability is 1.
        return Ok(clamped_one(params));
    }

    let n = params.n() as f64;
    let rate = params.rate_nats();
    let zeta = sol.zeta;
    let eval = cgf_at(&coeffs, zeta)?;
    let crit_rate = if eval.domain_hi > 1.0 {
        cgf_at(&coeffs, 1.0).ok().map(|e| -e.kappa1)
    } else {
        None
    };

    let (log_eps, regime) = if zeta > 1.0 {
        let at_one = cgf_at(&coeffs, 1.0)?;
        let rcr = -at_one.kappa1;
        let sq = (n * at_one.kappa2).sqrt();
        let shift = n * (rcr - rate);
        let t1 = n * (rcr - rate + at_one.kappa2 / 2.0) + log_q(sq + shift / sq);
        let t2 = log_q(-shift / sq);
        (n * (at_one.kappa + rate) + log_sum_exp(t1, t2), Regime::ZetaGt1)
    } else if zeta >= 0.0 {
        let lp = n * (eval.kappa + zeta * rate);
        let t1 = log_psi(n, eval.kappa2, zeta);
        let t2 = log_psi(n, eval.kappa2, 1.0 - zeta);
        (lp + log_sum_exp(t1, t2), Regime::ZetaIn01)
    } else {
        // eps = 1 - exp(n(kappa + zeta R)) [Psi(-zeta) - Psi(1 - zeta)]
        let la = log_psi(n, eval.kappa2, -zeta);
        let lb = log_psi(n, eval.kappa2, 1.0 - zeta);
        if lb >= la {
            (0.0, Regime::ZetaLt0)
        } else {
            let ln_term = n * (eval.kappa + zeta * rate) + la + log1m_exp(lb - la);
            // The subtracted mass lies in (0, 1); cap it against fp overshoot.
            (log1m_exp(ln_term.min(-1e-16)), Regime::ZetaLt0)
        }
    };

    Ok(ErrorProbResult {
        log_eps: log_eps.min(0.0),
        regime,
        zeta,
        s_used: params.s(),
        crit_rate,
    })
}
