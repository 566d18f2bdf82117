use num_complex::Complex64;

use crate::error::FblError;

/// One effective scalar link after linear processing: everything the RCUs
/// evaluation needs.
///
/// * `g` — effective channel seen by the decoder,
/// * `g_hat` — the estimate the decoder treats as perfect,
/// * `rho` — codebook symbol power (Watt),
/// * `sigma2` — noise-plus-interference variance (Watt),
/// * `s` — decoding-metric parameter (1/Watt),
/// * `n` — blocklength in channel uses,
/// * `rate_nats` — coding rate `ln(m)/n` in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlepointParams {
    g: Complex64,
    g_hat: Complex64,
    rho: f64,
    sigma2: f64,
    s: f64,
    n: u32,
    rate_nats: f64,
}

impl SaddlepointParams {
    pub fn new(
        g: Complex64,
        g_hat: Complex64,
        rho: f64,
        sigma2: f64,
        s: f64,
        n: u32,
        rate_nats: f64,
    ) -> Result<Self, FblError> {
        let finite = |name: &'static str, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(FblError::InvalidParameter { name, value })
            }
        };
        finite("g.re", g.re)?;
        finite("g.im", g.im)?;
        finite("g_hat.re", g_hat.re)?;
        finite("g_hat.im", g_hat.im)?;
        finite("rho", rho)?;
        finite("sigma2", sigma2)?;
        finite("s", s)?;
        finite("rate_nats", rate_nats)?;
        if rho < 0.0 {
            return Err(FblError::InvalidParameter { name: "rho", value: rho });
        }
        if sigma2 <= 0.0 {
            return Err(FblError::InvalidParameter { name: "sigma2", value: sigma2 });
        }
        if s <= 0.0 {
            return Err(FblError::InvalidParameter { name: "s", value: s });
        }
        if n == 0 {
            return Err(FblError::InvalidParameter { name: "n", value: 0.0 });
        }
        if rate_nats <= 0.0 {
            return Err(FblError::InvalidParameter { name: "rate_nats", value: rate_nats });
        }
        Ok(Self { g, g_hat, rho, sigma2, s, n, rate_nats })
    }

    /// Same link with a different decoding-metric parameter.
    pub fn with_s(&self, s: f64) -> Result<Self, FblError> {
        Self::new(self.g, self.g_hat, self.rho, self.sigma2, s, self.n, self.rate_nats)
    }

    pub fn g(&self) -> Complex64 {
        self.g
    }

    pub fn g_hat(&self) -> Complex64 {
        self.g_hat
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rate_nats(&self) -> f64 {
        self.rate_nats
    }

    pub(crate) fn coeffs(&self) -> Result<LinkCoeffs, FblError> {
        LinkCoeffs::from_link(self.g, self.g_hat, self.rho, self.sigma2, self.s)
    }
}

/// The scalar coefficients of the tilted-distribution CGF.
///
/// `log_metric_gain` is `ln(1 + s rho |g_hat|^2)`, the additive term that the
/// CGF and its derivative share.
#[derive(Debug, Clone, Copy)]
pub struct LinkCoeffs {
    pub beta_a: f64,
    pub beta_b: f64,
    pub nu: f64,
    pub log_metric_gain: f64,
}

const NU_TOL: f64 = 1e-9;

impl LinkCoeffs {
    pub fn from_link(
        g: Complex64,
        g_hat: Complex64,
        rho: f64,
        sigma2: f64,
        s: f64,
    ) -> Result<Self, FblError> {
        for (name, value) in [
            ("g.re", g.re),
            ("g.im", g.im),
            ("g_hat.re", g_hat.re),
            ("g_hat.im", g_hat.im),
            ("rho", rho),
            ("sigma2", sigma2),
            ("s", s),
        ] {
            if !value.is_finite() {
                return Err(FblError::InvalidParameter { name, value });
            }
        }
        if s <= 0.0 {
            return Err(FblError::InvalidParameter { name: "s", value: s });
        }
        if sigma2 <= 0.0 {
            return Err(FblError::InvalidParameter { name: "sigma2", value: sigma2 });
        }
        if rho < 0.0 {
            return Err(FblError::InvalidParameter { name: "rho", value: rho });
        }

        let one_plus = 1.0 + s * rho * g_hat.norm_sqr();
        let beta_a = s * (rho * (g - g_hat).norm_sqr() + sigma2);
        let beta_b = s * (rho * g.norm_sqr() + sigma2) / one_plus;
        // nu is the squared correlation coefficient of the two quadratic
        // forms entering the information density; in exact arithmetic it
        // lies in [0, 1].
        let cross = Complex64::new(rho * g.norm_sqr() + sigma2, 0.0) - g.conj() * g_hat * rho;
        let mut nu = s * s * cross.norm_sqr() / (beta_a * beta_b * one_plus);
        if !nu.is_finite() || nu < -NU_TOL || nu > 1.0 + NU_TOL {
            return Err(FblError::InvalidParameter { name: "nu", value: nu });
        }
        nu = nu.clamp(0.0, 1.0);
        Ok(Self { beta_a, beta_b, nu, log_metric_gain: one_plus.ln() })
    }
}

/// Computes `(beta_A, beta_B, nu)` for one link.
///
/// `beta_A = s (rho |g - g_hat|^2 + sigma2)`,
/// `beta_B = s (rho |g|^2 + sigma2) / (1 + s rho |g_hat|^2)`, and `nu` is
/// clipped to `[0, 1]` when within `1e-9` outside.
pub fn betas(
    g: Complex64,
    g_hat: Complex64,
    rho: f64,
    sigma2: f64,
    s: f64,
) -> Result<(f64, f64, f64), FblError> {
    let c = LinkCoeffs::from_link(g, g_hat, rho, sigma2, s)?;
    Ok((c.beta_a, c.beta_b, c.nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn matched_unit_link() {
        let (ba, bb, nu) = betas(c(1.0), c(1.0), 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(ba, 1.0, epsilon = 1e-15);
        assert_relative_eq!(bb, 1.0, epsilon = 1e-15);
        assert_relative_eq!(nu, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn matched_estimate_removes_mismatch_term() {
        for &s in &[0.3, 1.0, 7.5] {
            let g = Complex64::new(0.4, -1.1);
            let (ba, _, _) = betas(g, g, 2.0, 0.7, s).unwrap();
            assert_relative_eq!(ba, s * 0.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn mismatched_link_matches_high_precision_reference() {
        // Frozen from a 50-digit re-evaluation of the three closed forms.
        let (ba, bb, nu) = betas(c(1.0), c(0.9), 1.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(ba, 1.02, epsilon = 1e-14);
        assert_relative_eq!(bb, 1.145_038_167_938_931_3, epsilon = 1e-14);
        assert_relative_eq!(nu, 0.470_588_235_294_117_65, epsilon = 1e-14);
    }

    #[test]
    fn complex_link_matches_high_precision_reference() {
        let g = Complex64::new(0.8, 0.3);
        let gh = Complex64::new(0.7, 0.35);
        let (ba, bb, nu) = betas(g, gh, 2.0, 0.4, 1.7).unwrap();
        assert_relative_eq!(ba, 0.7225, epsilon = 1e-14);
        assert_relative_eq!(bb, 1.025_790_754_257_907_5, epsilon = 1e-14);
        assert_relative_eq!(nu, 0.380_139_152_435_167_6, epsilon = 1e-13);
    }

    #[test]
    fn rejects_non_finite_inputs() {
        assert!(betas(c(f64::NAN), c(1.0), 1.0, 1.0, 1.0).is_err());
        assert!(betas(c(1.0), c(1.0), f64::INFINITY, 1.0, 1.0).is_err());
        assert!(betas(c(1.0), c(1.0), 1.0, 0.0, 1.0).is_err());
        assert!(betas(c(1.0), c(1.0), 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn params_validation() {
        let ok = SaddlepointParams::new(c(1.0), c(1.0), 1.0, 1.0, 1.0, 100, 0.5);
        assert!(ok.is_ok());
        assert!(SaddlepointParams::new(c(1.0), c(1.0), 1.0, 1.0, 1.0, 0, 0.5).is_err());
        assert!(SaddlepointParams::new(c(1.0), c(1.0), 1.0, 1.0, 1.0, 100, 0.0).is_err());
        assert!(SaddlepointParams::new(c(1.0), c(1.0), -0.1, 1.0, 1.0, 100, 0.5).is_err());
    }
}
