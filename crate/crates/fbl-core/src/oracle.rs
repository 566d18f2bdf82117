//! Brute-force Monte-Carlo evaluation of the RCUs tail probability.
//!
//! This is the independent oracle the saddlepoint approximation is checked
//! against: it samples the generalized information density directly and
//! counts threshold crossings. Samples are drawn in fixed-size chunks, one
//! counter-derived RNG stream per chunk, so the estimate is bit-identical for
//! a given seed regardless of how many worker threads run the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::logq::log1m_exp;
use crate::params::SaddlepointParams;

/// Monte-Carlo estimate with a 95% Wilson confidence interval.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub eps: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub num_samples: u64,
    pub num_hits: u64,
}

const CHUNK: u64 = 1 << 14;

/// 95% Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson_ci_95(hits: u64, n: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let total = n as f64;
    let p = hits as f64 / total;
    let z2 = z * z;
    let denom = 1.0 + z2 / total;
    let center = (p + z2 / (2.0 * total)) / denom;
    let half = z * (p * (1.0 - p) / total + z2 / (4.0 * total * total)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Estimates the RCUs error probability by sampling the sum of generalized
/// information densities against the random threshold `ln((m-1)/u)`.
///
/// `num_samples >= 1e4` is required. Deterministic given `rng_seed`; used
/// only as a test oracle.
pub fn rcus_mc_oracle(params: &SaddlepointParams, num_samples: u64, rng_seed: u64) -> McEstimate {
    assert!(num_samples >= 10_000, "oracle needs at least 1e4 samples");
    let n = params.n() as usize;
    let g = params.g();
    let g_hat = params.g_hat();
    let rho = params.rho();
    let s = params.s();
    let metric_gain = 1.0 + s * rho * g_hat.norm_sqr();
    let log_metric_gain = metric_gain.ln();
    let amp_q = (rho / 2.0).sqrt();
    let amp_z = (params.sigma2() / 2.0).sqrt();
    let nr = params.n() as f64 * params.rate_nats();
    let ln_m1 = nr + log1m_exp(-nr);

    let num_chunks = num_samples.div_ceil(CHUNK);
    let hits: u64 = (0..num_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(chunk);
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(num_samples);
            let mut hits = 0u64;
            for _ in lo..hi {
                let mut sum = 0.0;
                for _ in 0..n {
                    let q = num_complex::Complex64::new(
                        amp_q * rng.sample::<f64, _>(StandardNormal),
                        amp_q * rng.sample::<f64, _>(StandardNormal),
                    );
                    let z = num_complex::Complex64::new(
                        amp_z * rng.sample::<f64, _>(StandardNormal),
                        amp_z * rng.sample::<f64, _>(StandardNormal),
                    );
                    let v = g * q + z;
                    let mismatch = v - g_hat * q;
                    sum += -s * mismatch.norm_sqr() + s * v.norm_sqr() / metric_gain
                        + log_metric_gain;
                }
                let u: f64 = rng.random();
                if sum <= ln_m1 - u.ln() {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let eps = hits as f64 / num_samples as f64;
    let (ci_lo, ci_hi) = wilson_ci_95(hits, num_samples);
    McEstimate { eps, ci_lo, ci_hi, num_samples, num_hits: hits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_signal_power_always_fails() {
        let p = SaddlepointParams::new(c(1.0), c(1.0), 0.0, 1.0, 1.0, 50, 0.3).unwrap();
        let est = rcus_mc_oracle(&p, 10_000, 1);
        assert_eq!(est.eps, 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SaddlepointParams::new(c(1.0), c(0.95), 1.0, 1.0, 1.0, 60, 0.4).unwrap();
        let a = rcus_mc_oracle(&p, 20_000, 42);
        let b = rcus_mc_oracle(&p, 20_000, 42);
        assert_eq!(a.num_hits, b.num_hits);
    }

    #[test]
    fn ci_width_shrinks_like_inverse_sqrt() {
        let p = SaddlepointParams::new(c(1.0), c(1.0), 1.0, 1.0, 1.0, 40, 0.55).unwrap();
        let small = rcus_mc_oracle(&p, 40_000, 3);
        let large = rcus_mc_oracle(&p, 160_000, 3);
        let w_small = small.ci_hi - small.ci_lo;
        let w_large = large.ci_hi - large.ci_lo;
        let ratio = w_small / w_large;
        // Quadrupling the samples should halve the width, up to sampling noise.
        assert!((ratio - 2.0).abs() < 0.35, "ratio {ratio}");
    }

    #[test]
    fn wilson_interval_sane() {
        let (lo, hi) = wilson_ci_95(50, 100);
        assert!(lo > 0.39 && lo < 0.5);
        assert!(hi > 0.5 && hi < 0.61);
        let (lo, hi) = wilson_ci_95(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }
}
