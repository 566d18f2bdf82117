//! Combiner and precoder construction plus effective-link extraction.
//!
//! Combining reduces each UE's reception to the scalar link
//! `v[k] = g q[k] + z[k]`: `g` is the combined channel, the noise variance
//! collects thermal noise through the combiner plus residual multiuser
//! interference, and `g_hat` is whatever the decoder will treat as perfect
//! (instantaneous estimate, statistics-based mean, a downlink pilot
//! estimate, or the genie value).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;

use crate::error::SimError;
use crate::estimation::{
    dl_despread_one, dl_lmmse_estimate, dl_ls_estimate, DlPilotStats,
};

/// Linear combining/precoding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerScheme {
    Mmse,
    Mr,
}

/// Link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// How the UE acquires its downlink channel estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlPilotMode {
    /// No DL pilots: decode against the statistical mean of the precoded
    /// channel (channel hardening).
    None,
    /// Precoded DL pilots with least-squares estimation.
    Ls,
    /// Precoded DL pilots with LMMSE estimation.
    Lmmse,
    /// Perfect knowledge of the precoded channel (benchmark).
    Genie,
}

/// Precoder power normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlPowerNorm {
    /// `w = sqrt(rho) u / sqrt(E[||u||^2])` (duality rule; power holds on
    /// average).
    Average,
    /// `w = sqrt(rho) u / ||u||` (power holds per realization).
    Instantaneous,
}

/// One effective scalar link, ready for the error-probability evaluation.
///
/// Uplink links carry `rho = rho_ul` (the UE transmit power scales the unit
/// codebook); downlink precoders already carry their power, so `rho = 1`.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveLink {
    pub g: Complex64,
    pub g_hat: Complex64,
    pub sigma2_eff: f64,
    pub rho: f64,
    pub direction: Direction,
}

/// Per-AP Cholesky factors of `B_l = rho sum_i C_il + sigma2 I_M`, the
/// estimate-independent part of the MMSE combining matrix. Built once per
/// placement.
#[derive(Clone)]
pub struct CombinerBase {
    chols: Vec<Cholesky<Complex64, Dyn>>,
    dense: Vec<DMatrix<Complex64>>,
    m: usize,
}

impl CombinerBase {
    /// `err_covs` is the flat (UE-major) `C_il` list; an empty slice means
    /// perfect CSI (no estimation error).
    pub fn new(
        err_covs: &[DMatrix<Complex64>],
        num_ues: usize,
        num_aps: usize,
        m: usize,
        rho: f64,
        sigma2: f64,
    ) -> Result<Self, SimError> {
        let mut chols = Vec::with_capacity(num_aps);
        let mut dense = Vec::with_capacity(num_aps);
        for l in 0..num_aps {
            let mut b = DMatrix::<Complex64>::identity(m, m) * Complex64::new(sigma2, 0.0);
            if !err_covs.is_empty() {
                for i in 0..num_ues {
                    b += &err_covs[i * num_aps + l] * Complex64::new(rho, 0.0);
                }
            }
            let chol = Cholesky::new(b.clone())
                .or_else(|| {
                    // sigma2 > 0 keeps this positive definite; the ridge only
                    // matters for degenerate covariance inputs.
                    let ridged = &b + DMatrix::<Complex64>::identity(m, m)
                        * Complex64::new(1e-12 * sigma2.max(1e-300), 0.0);
                    Cholesky::new(ridged)
                })
                .ok_or(SimError::SingularSystem("combiner base matrix"))?;
            chols.push(chol);
            dense.push(b);
        }
        Ok(Self { chols, dense, m })
    }

    pub fn antennas(&self) -> usize {
        self.m
    }

    pub fn dense_block(&self, ap: usize) -> &DMatrix<Complex64> {
        &self.dense[ap]
    }

    /// Solves `B X = RHS` in place, block row by block row.
    pub fn solve_in_place(&self, x: &mut DMatrix<Complex64>) {
        for (l, chol) in self.chols.iter().enumerate() {
            let mut block = x.view_mut((l * self.m, 0), (self.m, x.ncols()));
            chol.solve_mut(&mut block);
        }
    }
}

/// `sum_j conj(a[.,j_col]) b[.,col]` for full columns: Hermitian inner
/// product of two columns of (possibly different) matrices.
#[inline]
pub fn col_dotc(a: &DMatrix<Complex64>, ca: usize, b: &DMatrix<Complex64>, cb: usize) -> Complex64 {
    let rows = a.nrows();
    let sa = &a.as_slice()[ca * rows..(ca + 1) * rows];
    let sb = &b.as_slice()[cb * rows..(cb + 1) * rows];
    cdot(sa, sb)
}

/// `sum conj(a) b` over two slices.
#[inline]
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Centralized MMSE combiners for all UEs, written into the columns of `u`.
///
/// Solves `u_i = rho (B + rho H H^H)^{-1} h_hat_i` through the matrix
/// inversion lemma: with `T = B^{-1} H` and `G = H^H T`,
/// `U = rho T (I + rho G)^{-1}`. This touches only per-AP factors of `B`
/// plus a `K x K` Hermitian solve, and is algebraically identical to the
/// dense solve (see `mmse_combiner_centralized_dense`).
pub fn mmse_combiner_centralized_into(
    base: &CombinerBase,
    h_hat: &DMatrix<Complex64>,
    rho: f64,
    t: &mut DMatrix<Complex64>,
    gram: &mut DMatrix<Complex64>,
    u: &mut DMatrix<Complex64>,
) -> Result<(), SimError> {
    let k = h_hat.ncols();
    t.copy_from(h_hat);
    base.solve_in_place(t);
    // gram = I + rho H^H T (Hermitian; fill the lower triangle and mirror)
    for a in 0..k {
        for b in 0..=a {
            let v = col_dotc(h_hat, a, t, b) * rho;
            gram[(a, b)] = if a == b { Complex64::new(1.0 + v.re, 0.0) } else { v };
            if a != b {
                gram[(b, a)] = v.conj();
            }
        }
    }
    let chol = Cholesky::new(gram.clone())
        .ok_or(SimError::SingularSystem("MMSE capacitance matrix"))?;
    let s_inv = chol.inverse();
    u.gemm(Complex64::new(rho, 0.0), t, &s_inv, Complex64::new(0.0, 0.0));
    Ok(())
}

/// Allocating form of the centralized MMSE combiner.
pub fn mmse_combiner_centralized(
    h_hat: &DMatrix<Complex64>,
    err_covs: &[DMatrix<Complex64>],
    num_aps: usize,
    rho: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>, SimError> {
    let k = h_hat.ncols();
    let m = h_hat.nrows() / num_aps;
    let base = CombinerBase::new(err_covs, k, num_aps, m, rho, sigma2)?;
    let mut t = DMatrix::zeros(h_hat.nrows(), k);
    let mut gram = DMatrix::zeros(k, k);
    let mut u = DMatrix::zeros(h_hat.nrows(), k);
    mmse_combiner_centralized_into(&base, h_hat, rho, &mut t, &mut gram, &mut u)?;
    Ok(u)
}

/// Direct dense-solve evaluation of the centralized MMSE combiner; the
/// reference the factored route is tested against.
pub fn mmse_combiner_centralized_dense(
    h_hat: &DMatrix<Complex64>,
    err_covs: &[DMatrix<Complex64>],
    num_aps: usize,
    rho: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>, SimError> {
    let n = h_hat.nrows();
    let k = h_hat.ncols();
    let m = n / num_aps;
    let mut a = DMatrix::<Complex64>::identity(n, n) * Complex64::new(sigma2, 0.0);
    if !err_covs.is_empty() {
        for i in 0..k {
            for l in 0..num_aps {
                let c = &err_covs[i * num_aps + l];
                for r in 0..m {
                    for cc in 0..m {
                        a[(l * m + r, l * m + cc)] += c[(r, cc)] * Complex64::new(rho, 0.0);
                    }
                }
            }
        }
    }
    for i in 0..k {
        let col = h_hat.column(i);
        a.gerc(Complex64::new(rho, 0.0), &col, &col, Complex64::new(1.0, 0.0));
    }
    let chol = Cholesky::new(a).ok_or(SimError::SingularSystem("dense MMSE matrix"))?;
    let mut u = h_hat.clone_owned();
    chol.solve_mut(&mut u);
    Ok(u * Complex64::new(rho, 0.0))
}

/// Local MMSE combiners at one AP for all UEs
/// (`u_il = rho (sum_i' rho (h_hat h_hat^H + C_i'l) + sigma2 I_M)^{-1}
/// h_hat_il`), from AP-local estimates and covariances only.
pub fn mmse_combiner_local(
    h_hat_l: &DMatrix<Complex64>,
    err_covs_l: &[&DMatrix<Complex64>],
    rho: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>, SimError> {
    let m = h_hat_l.nrows();
    let k = h_hat_l.ncols();
    let mut a = DMatrix::<Complex64>::identity(m, m) * Complex64::new(sigma2, 0.0);
    for c in err_covs_l {
        a += *c * Complex64::new(rho, 0.0);
    }
    for i in 0..k {
        let col = h_hat_l.column(i);
        a.gerc(Complex64::new(rho, 0.0), &col, &col, Complex64::new(1.0, 0.0));
    }
    let chol = Cholesky::new(a).ok_or(SimError::SingularSystem("local MMSE matrix"))?;
    let mut u = h_hat_l.clone_owned();
    chol.solve_mut(&mut u);
    Ok(u * Complex64::new(rho, 0.0))
}

/// Maximum-ratio combining: the combiner is the estimate itself.
pub fn mr_combiner(h_hat: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    h_hat.clone_owned()
}

/// Scales a combiner into a power-carrying precoder.
///
/// `Average` divides by the placement-level mean energy (UL-DL duality;
/// transmit power holds in expectation), `Instantaneous` by the realized
/// norm. A zero combiner yields a zero precoder.
pub fn precoder_from_combiner(
    u: &DVector<Complex64>,
    mean_energy: f64,
    rho_dl: f64,
    norm: DlPowerNorm,
) -> DVector<Complex64> {
    let denom = match norm {
        DlPowerNorm::Average => mean_energy,
        DlPowerNorm::Instantaneous => u.norm_squared(),
    };
    if denom <= 0.0 {
        return DVector::zeros(u.len());
    }
    u * Complex64::new((rho_dl / denom).sqrt(), 0.0)
}

/// What the uplink decoder treats as the channel.
#[derive(Debug, Clone, Copy)]
pub enum UlChannelKnowledge {
    /// `u^H h_hat` with the instantaneous estimate (centralized / cellular).
    Estimate(Complex64),
    /// `E[u^H h]` from placement statistics (distributed operation).
    Mean(Complex64),
}

/// Extracts the effective uplink link for `ue` given its combiner column.
pub fn effective_link_ul(
    u: &[Complex64],
    channels: &DMatrix<Complex64>,
    ue: usize,
    knowledge: UlChannelKnowledge,
    rho_ul: f64,
    sigma2_ul: f64,
) -> EffectiveLink {
    let rows = channels.nrows();
    let k = channels.ncols();
    let data = channels.as_slice();
    let mut interference = 0.0;
    let mut g = Complex64::new(0.0, 0.0);
    for j in 0..k {
        let dot = cdot(u, &data[j * rows..(j + 1) * rows]);
        if j == ue {
            g = dot;
        } else {
            interference += dot.norm_sqr();
        }
    }
    let energy: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let g_hat = match knowledge {
        UlChannelKnowledge::Estimate(v) | UlChannelKnowledge::Mean(v) => v,
    };
    EffectiveLink {
        g,
        g_hat,
        sigma2_eff: sigma2_ul * energy + rho_ul * interference,
        rho: rho_ul,
        direction: Direction::Uplink,
    }
}

/// Statistics of the normalized precoded channel `h^H u / sqrt(E||u||^2)`
/// used by the no-pilot and LMMSE downlink estimates.
#[derive(Debug, Clone, Copy)]
pub struct DlChannelStats {
    pub mean: Complex64,
    pub var: f64,
}

/// Extracts the effective downlink link for `ue`.
///
/// `xi_row[j] = h_ue^H w_j` with power-carrying precoders. The decoder-side
/// estimate follows `mode`: statistics, a simulated precoded-pilot phase
/// with LS/LMMSE, or the genie value. Estimation operates on the normalized
/// precoded channel (`xi / sqrt(rho_dl)`) and the estimate is scaled back.
#[allow(clippy::too_many_arguments)]
pub fn effective_link_dl(
    xi_row: &[Complex64],
    ue: usize,
    mode: DlPilotMode,
    dl_pilots: &DMatrix<Complex64>,
    rho_dl: f64,
    sigma2_dl: f64,
    stats: Option<&DlChannelStats>,
    rng: &mut impl Rng,
) -> Result<EffectiveLink, SimError> {
    let g = xi_row[ue];
    let interference: f64 =
        xi_row.iter().enumerate().filter(|&(j, _)| j != ue).map(|(_, z)| z.norm_sqr()).sum();
    let sigma2_eff = sigma2_dl + interference;
    let sqrt_rho = rho_dl.sqrt();

    let g_hat = match mode {
        DlPilotMode::Genie => g,
        DlPilotMode::None => {
            let s = stats.ok_or_else(|| {
                SimError::InvalidConfig("statistics-based DL decoding needs link statistics".into())
            })?;
            Complex64::new(sqrt_rho, 0.0) * s.mean
        }
        DlPilotMode::Ls | DlPilotMode::Lmmse => {
            let np_dl = dl_pilots.nrows();
            if np_dl == 0 {
                return Err(SimError::InvalidConfig(
                    "DL pilot estimation requested but np_dl = 0".into(),
                ));
            }
            let xi_norm: Vec<Complex64> =
                xi_row.iter().map(|z| z / Complex64::new(sqrt_rho, 0.0)).collect();
            let y = dl_despread_one(&xi_norm, ue, dl_pilots, rho_dl, sigma2_dl, rng);
            let est = match mode {
                DlPilotMode::Ls => dl_ls_estimate(y, rho_dl, np_dl)?,
                _ => {
                    let s = stats.ok_or_else(|| {
                        SimError::InvalidConfig("LMMSE DL estimation needs link statistics".into())
                    })?;
                    let pilot_stats = DlPilotStats {
                        xi_mean: s.mean,
                        xi_var: s.var,
                        noise_mean: Complex64::new(0.0, 0.0),
                        noise_var: sigma2_dl * np_dl as f64,
                    };
                    dl_lmmse_estimate(y, &pilot_stats, rho_dl, np_dl)
                }
            };
            Complex64::new(sqrt_rho, 0.0) * est
        }
    };

    Ok(EffectiveLink { g, g_hat, sigma2_eff, rho: 1.0, direction: Direction::Downlink })
}

/// Serving-AP assignment for cellular operation: the AP with the largest
/// statistical channel gain wins; ties break to the lowest AP index.
pub fn assign_serving_ap(betas: &nalgebra::DMatrix<f64>) -> Vec<usize> {
    (0..betas.nrows())
        .map(|i| {
            let mut best = 0usize;
            for l in 1..betas.ncols() {
                if betas[(i, l)] > betas[(i, best)] {
                    best = l;
                }
            }
            best
        })
        .collect()
}

/// Placement-level Monte-Carlo link statistics.
///
/// Block quantities are per (UE, AP) pair (flat UE-major): each AP carries
/// its own power budget, so precoder normalization and the statistics-based
/// decoder estimates are built from per-AP means.
#[derive(Debug, Clone)]
pub struct LinkStatistics {
    /// `E[u_i^H h_i]` per UE (collective).
    pub mean_eff_channel: Vec<Complex64>,
    /// `E[||u_i||^2]` per UE (collective).
    pub mean_combiner_energy: Vec<f64>,
    /// `E[u_il^H h_il]` per (UE, AP).
    pub block_eff: Vec<Complex64>,
    /// `E[||u_il||^2]` per (UE, AP).
    pub block_energy: Vec<f64>,
    /// Statistics of the normalized precoded channel `h_i^H w_i / sqrt(rho)`
    /// under the per-AP average power normalization.
    pub precoded: Vec<DlChannelStats>,
    pub n_stat: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_perfect_csi_mmse_is_matched_filter_direction() {
        let h = DMatrix::from_vec(3, 1, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, -0.5)]);
        let u = mmse_combiner_centralized(&h, &[], 1, 2.0, 0.7).unwrap();
        // u must be collinear with h
        let scale = u[(0, 0)] / h[(0, 0)];
        for r in 0..3 {
            assert!((u[(r, 0)] - h[(r, 0)] * scale).norm() < 1e-12);
        }
        assert!(scale.im.abs() < 1e-12 && scale.re > 0.0);
    }

    #[test]
    fn high_noise_limit_is_scaled_mr() {
        let h = DMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(0.2, 0.1), c(-0.3, 0.4), c(0.9, 0.0)]);
        let sigma2 = 1e9;
        let u = mmse_combiner_centralized(&h, &[], 1, 1.0, sigma2).unwrap();
        // the first-order correction is O(rho ||h||^2 / sigma2) ~ 1e-9
        for i in 0..2 {
            for r in 0..2 {
                let expected = h[(r, i)] / Complex64::new(sigma2, 0.0);
                assert!((u[(r, i)] - expected).norm() < 1e-8 * expected.norm().max(1e-30));
            }
        }
    }

    #[test]
    fn factored_route_matches_dense_solve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (num_aps, m, k) = (3usize, 2usize, 4usize);
        let n = num_aps * m;
        let h = DMatrix::from_fn(n, k, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        // random PSD error covariances
        let covs: Vec<DMatrix<Complex64>> = (0..k * num_aps)
            .map(|_| {
                let a = DMatrix::from_fn(m, m, |_, _| {
                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                &a * a.adjoint() * Complex64::new(0.1, 0.0)
            })
            .collect();
        let dense = mmse_combiner_centralized_dense(&h, &covs, num_aps, 1.7, 0.3).unwrap();
        let fast = mmse_combiner_centralized(&h, &covs, num_aps, 1.7, 0.3).unwrap();
        assert!((dense - fast).norm() < 1e-10);
    }

    #[test]
    fn local_with_one_ap_equals_centralized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let (m, k) = (3usize, 2usize);
        let h = DMatrix::from_fn(m, k, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let covs: Vec<DMatrix<Complex64>> = (0..k)
            .map(|_| {
                let a = DMatrix::from_fn(m, m, |_, _| {
                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                &a * a.adjoint() * Complex64::new(0.05, 0.0)
            })
            .collect();
        let cov_refs: Vec<&DMatrix<Complex64>> = covs.iter().collect();
        let local = mmse_combiner_local(&h, &cov_refs, 0.8, 0.4).unwrap();
        let central = mmse_combiner_centralized(&h, &covs, 1, 0.8, 0.4).unwrap();
        assert!((local - central).norm() < 1e-11);
    }

    #[test]
    fn scalar_local_combiner_closed_form() {
        let h = DMatrix::from_vec(1, 2, vec![c(0.6, 0.2), c(-0.3, 0.1)]);
        let c0 = DMatrix::from_element(1, 1, c(0.05, 0.0));
        let c1 = DMatrix::from_element(1, 1, c(0.02, 0.0));
        let (rho, sigma2) = (1.3, 0.6);
        let u = mmse_combiner_local(&h, &[&c0, &c1], rho, sigma2).unwrap();
        let denom = rho * (h[(0, 0)].norm_sqr() + 0.05 + h[(0, 1)].norm_sqr() + 0.02) + sigma2;
        for i in 0..2 {
            let expected = h[(0, i)] * Complex64::new(rho / denom, 0.0);
            assert!((u[(0, i)] - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn stacked_local_combiners_differ_from_centralized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (num_aps, m, k) = (2usize, 2usize, 2usize);
        let h = DMatrix::from_fn(num_aps * m, k, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let central = mmse_combiner_centralized(&h, &[], num_aps, 1.0, 0.2).unwrap();
        let mut stacked = DMatrix::zeros(num_aps * m, k);
        for l in 0..num_aps {
            let h_l = h.view((l * m, 0), (m, k)).clone_owned();
            let local = mmse_combiner_local(&h_l, &[], 1.0, 0.2).unwrap();
            stacked.view_mut((l * m, 0), (m, k)).copy_from(&local);
        }
        assert!((central - stacked).norm() > 1e-3);
    }

    #[test]
    fn mr_is_identity_on_estimates() {
        let h = DMatrix::from_vec(2, 1, vec![c(1.0, 2.0), c(-0.5, 0.1)]);
        assert_eq!(mr_combiner(&h), h);
    }

    #[test]
    fn precoder_power_normalizations() {
        let u = DVector::from_vec(vec![c(3.0, 0.0), c(0.0, 4.0)]);
        let w = precoder_from_combiner(&u, 1.0, 2.0, DlPowerNorm::Instantaneous);
        assert_relative_eq!(w.norm_squared(), 2.0, epsilon = 1e-12);
        let w = precoder_from_combiner(&u, 50.0, 2.0, DlPowerNorm::Average);
        assert_relative_eq!(w.norm_squared(), 2.0 * 25.0 / 50.0, epsilon = 1e-12);
        let zero = precoder_from_combiner(&DVector::zeros(2), 0.0, 2.0, DlPowerNorm::Instantaneous);
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn uplink_link_extraction() {
        // K = 1: no interference term.
        let h = DMatrix::from_vec(2, 1, vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let u = [c(0.5, 0.0), c(0.0, 0.5)];
        let link = effective_link_ul(
            &u,
            &h,
            0,
            UlChannelKnowledge::Estimate(c(1.0, 0.0)),
            2.0,
            0.3,
        );
        assert_relative_eq!(link.sigma2_eff, 0.3 * 0.5, epsilon = 1e-14);
        assert!((link.g - c(1.0, 0.0)).norm() < 1e-14);

        // Interference equals a direct re-evaluation.
        let h2 = DMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.3, 0.2), c(-0.1, 0.6)]);
        let link = effective_link_ul(
            &u,
            &h2,
            0,
            UlChannelKnowledge::Estimate(c(1.0, 0.0)),
            2.0,
            0.3,
        );
        let cross = u[0].conj() * h2[(0, 1)] + u[1].conj() * h2[(1, 1)];
        assert_relative_eq!(link.sigma2_eff, 0.3 * 0.5 + 2.0 * cross.norm_sqr(), epsilon = 1e-14);
    }

    #[test]
    fn downlink_genie_and_noiseless_ls_recover_g() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let pilots = crate::estimation::PilotBook::orthogonal(1, 8, 8, 1.0, 2.0).unwrap();
        let xi = [c(0.7, -0.2)];
        let link = effective_link_dl(
            &xi,
            0,
            DlPilotMode::Genie,
            pilots.dl_pilots(),
            2.0,
            0.4,
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(link.g, link.g_hat);
        assert_relative_eq!(link.sigma2_eff, 0.4, epsilon = 1e-15);
        assert_relative_eq!(link.rho, 1.0);

        // noiseless pilots: LS recovers the precoded channel exactly
        let link = effective_link_dl(
            &xi,
            0,
            DlPilotMode::Ls,
            pilots.dl_pilots(),
            2.0,
            0.0,
            None,
            &mut rng,
        )
        .unwrap();
        assert!((link.g_hat - link.g).norm() < 1e-12);
    }

    #[test]
    fn serving_assignment_nearest_with_low_index_ties() {
        let betas = nalgebra::DMatrix::from_row_slice(2, 3, &[0.1, 0.5, 0.3, 0.4, 0.4, 0.2]);
        assert_eq!(assign_serving_ap(&betas), vec![1, 0]);
    }
}
