//! Pilot transmission and channel estimation.
//!
//! Uplink: UEs transmit orthogonal pilot signatures; each AP correlates its
//! received pilot block with a signature and applies the MMSE filter derived
//! from the spatial correlation matrices. Downlink: APs transmit precoded
//! pilots; each UE despreads with its own signature and estimates its scalar
//! precoded channel with LS (default) or LMMSE.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::channel::CorrelationSet;
use crate::error::SimError;

/// Orthogonal pilot signatures for UL and DL phases plus the pilot powers.
///
/// Signatures are DFT columns scaled so that `||phi_i||^2 = n_p`; with
/// `K <= n_p` they are exactly orthogonal and pilot contamination is absent.
#[derive(Debug, Clone)]
pub struct PilotBook {
    ul: DMatrix<Complex64>,
    dl: DMatrix<Complex64>,
    pub rho_ul: f64,
    pub rho_dl: f64,
}

fn dft_pilots(num_ues: usize, n_p: usize) -> Result<DMatrix<Complex64>, SimError> {
    if n_p == 0 {
        return Ok(DMatrix::zeros(0, num_ues));
    }
    if num_ues > n_p {
        return Err(SimError::UnsupportedPilotLoad(num_ues, n_p));
    }
    Ok(DMatrix::from_fn(n_p, num_ues, |t, i| {
        let arg = -2.0 * PI * (t * i) as f64 / n_p as f64;
        Complex64::new(arg.cos(), arg.sin())
    }))
}

impl PilotBook {
    pub fn orthogonal(
        num_ues: usize,
        np_ul: usize,
        np_dl: usize,
        rho_ul: f64,
        rho_dl: f64,
    ) -> Result<Self, SimError> {
        Ok(Self {
            ul: dft_pilots(num_ues, np_ul)?,
            dl: dft_pilots(num_ues, np_dl)?,
            rho_ul,
            rho_dl,
        })
    }

    pub fn np_ul(&self) -> usize {
        self.ul.nrows()
    }

    pub fn np_dl(&self) -> usize {
        self.dl.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.ul.ncols()
    }

    /// UL signature matrix (`n_p x K`, one column per UE).
    pub fn ul_pilots(&self) -> &DMatrix<Complex64> {
        &self.ul
    }

    /// DL signature matrix (`n_p x K`).
    pub fn dl_pilots(&self) -> &DMatrix<Complex64> {
        &self.dl
    }
}

/// Received UL pilot blocks `Y_l = sqrt(rho_ul) sum_i h_il phi_i^H + Z_l`,
/// written into `out` (one `M x n_p` matrix per AP). `channels` holds the
/// collective channels as columns (`ML x K`).
pub fn ul_pilot_rx_into(
    channels: &DMatrix<Complex64>,
    book: &PilotBook,
    sigma2_ul: f64,
    rng: &mut impl Rng,
    out: &mut [DMatrix<Complex64>],
) {
    let num_aps = out.len();
    let m = channels.nrows() / num_aps;
    let k = channels.ncols();
    let amp = (sigma2_ul / 2.0).sqrt();
    let sqrt_rho = Complex64::new(book.rho_ul.sqrt(), 0.0);
    for (l, y) in out.iter_mut().enumerate() {
        for z in y.iter_mut() {
            *z = Complex64::new(
                amp * rng.sample::<f64, _>(StandardNormal),
                amp * rng.sample::<f64, _>(StandardNormal),
            );
        }
        for i in 0..k {
            let h_block = channels.view((l * m, i), (m, 1));
            let phi = book.ul.column(i);
            // Y += sqrt(rho) h phi^H
            y.gerc(sqrt_rho, &h_block.column(0), &phi, Complex64::new(1.0, 0.0));
        }
    }
}

/// Allocating wrapper over [`ul_pilot_rx_into`].
pub fn ul_pilot_rx(
    channels: &DMatrix<Complex64>,
    num_aps: usize,
    book: &PilotBook,
    sigma2_ul: f64,
    rng: &mut impl Rng,
) -> Vec<DMatrix<Complex64>> {
    let m = channels.nrows() / num_aps;
    let mut out = vec![DMatrix::zeros(m, book.np_ul()); num_aps];
    ul_pilot_rx_into(channels, book, sigma2_ul, rng, &mut out);
    out
}

/// Per-placement MMSE estimation filters and error statistics.
///
/// With orthogonal pilots the despreading matrix is
/// `Q_il = rho_ul n_p R_il + sigma2 I`, the filter applied to the despread
/// observation is `W_il = sqrt(rho_ul) R_il Q_il^{-1}`, the estimate
/// covariance is `Phi_il = rho_ul n_p R_il Q_il^{-1} R_il`, and the error
/// covariance is `C_il = R_il - Phi_il`.
#[derive(Debug, Clone)]
pub struct UlMmseEstimator {
    filters: Vec<DMatrix<Complex64>>,
    phi: Vec<DMatrix<Complex64>>,
    err_cov: Vec<DMatrix<Complex64>>,
    num_ues: usize,
    num_aps: usize,
    antennas: usize,
    /// True when a singular despreading matrix needed a ridge to factor.
    pub ridge_applied: bool,
}

impl UlMmseEstimator {
    pub fn new(
        corr: &CorrelationSet,
        np_ul: usize,
        rho_ul: f64,
        sigma2_ul: f64,
    ) -> Result<Self, SimError> {
        let (k, l, m) = (corr.num_ues(), corr.num_aps(), corr.antennas());
        let mut filters = Vec::with_capacity(k * l);
        let mut phi = Vec::with_capacity(k * l);
        let mut err_cov = Vec::with_capacity(k * l);
        let mut ridge_applied = false;
        let eye = DMatrix::<Complex64>::identity(m, m);
        for i in 0..k {
            for j in 0..l {
                let r = corr.get(i, j);
                let mut q = r * Complex64::new(rho_ul * np_ul as f64, 0.0);
                q += &eye * Complex64::new(sigma2_ul, 0.0);
                let chol = match nalgebra::Cholesky::new(q.clone()) {
                    Some(c) => c,
                    None => {
                        ridge_applied = true;
                        let trace: f64 = r.diagonal().iter().map(|z| z.re).sum();
                        let ridge = 1e-12 * trace / m as f64;
                        q += &eye * Complex64::new(ridge, 0.0);
                        nalgebra::Cholesky::new(q)
                            .ok_or(SimError::SingularSystem("UL MMSE despreading matrix"))?
                    }
                };
                // W = sqrt(rho) R Q^{-1} = sqrt(rho) (Q^{-1} R)^H
                let qinv_r = chol.solve(r);
                let w = qinv_r.adjoint() * Complex64::new(rho_ul.sqrt(), 0.0);
                let mut p = &w * r * Complex64::new(rho_ul.sqrt() * np_ul as f64, 0.0);
                // enforce exact Hermitian symmetry against fp drift
                let pa = p.adjoint();
                p = (&p + &pa) * Complex64::new(0.5, 0.0);
                let c = r - &p;
                filters.push(w);
                phi.push(p);
                err_cov.push(c);
            }
        }
        Ok(Self {
            filters,
            phi,
            err_cov,
            num_ues: k,
            num_aps: l,
            antennas: m,
            ridge_applied,
        })
    }

    pub fn phi(&self, ue: usize, ap: usize) -> &DMatrix<Complex64> {
        &self.phi[ue * self.num_aps + ap]
    }

    pub fn error_cov(&self, ue: usize, ap: usize) -> &DMatrix<Complex64> {
        &self.err_cov[ue * self.num_aps + ap]
    }

    /// Flat (UE-major) list of error covariances `C_il`.
    pub fn err_covs(&self) -> &[DMatrix<Complex64>] {
        &self.err_cov
    }

    /// Applies the filters to received pilot blocks; estimates land in the
    /// columns of `h_hat` (`ML x K`). `scratch` must have length `M`.
    pub fn estimate_into(
        &self,
        rx: &[DMatrix<Complex64>],
        book: &PilotBook,
        scratch: &mut DVector<Complex64>,
        h_hat: &mut DMatrix<Complex64>,
    ) {
        let m = self.antennas;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        for i in 0..self.num_ues {
            let phi = book.ul.column(i);
            for (l, y) in rx.iter().enumerate() {
                scratch.gemv(one, y, &phi, zero);
                let mut col = h_hat.column_mut(i);
                let mut block = col.rows_mut(l * m, m);
                block.gemv(one, &self.filters[i * self.num_aps + l], &*scratch, zero);
            }
        }
    }
}

/// Channel estimates plus the second-order model behind them.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    /// Collective estimates, one `ML` column per UE.
    pub h_hat: DMatrix<Complex64>,
    /// `Phi_il` per (UE, AP), flat row-major.
    pub phi: Vec<DMatrix<Complex64>>,
    /// `C_il = R_il - Phi_il` per (UE, AP), flat row-major.
    pub err_cov: Vec<DMatrix<Complex64>>,
}

/// One-shot MMSE estimation from received pilot blocks.
pub fn ul_mmse_estimate(
    rx: &[DMatrix<Complex64>],
    book: &PilotBook,
    corr: &CorrelationSet,
    sigma2_ul: f64,
) -> Result<EstimateSet, SimError> {
    let est = UlMmseEstimator::new(corr, book.np_ul(), book.rho_ul, sigma2_ul)?;
    let mut h_hat = DMatrix::zeros(corr.antennas() * corr.num_aps(), corr.num_ues());
    let mut scratch = DVector::zeros(corr.antennas());
    est.estimate_into(rx, book, &mut scratch, &mut h_hat);
    Ok(EstimateSet { h_hat, phi: est.phi, err_cov: est.err_cov })
}

/// Despread DL pilot observation for UE `ue`:
/// `y~ = sqrt(rho_dl) n_p xi_{ii} + z~` with
/// `z~ = sqrt(rho_dl) sum_{j != i} xi_{ij} phi_j^H phi_i + z phi_i`.
///
/// `xi_row` holds the normalized precoded channels `xi_{ij} = h_i^H w_j` for
/// all `j`. The cross terms are computed from the actual pilot inner
/// products, so non-orthogonal books are handled by the same expression.
pub fn dl_despread_one(
    xi_row: &[Complex64],
    ue: usize,
    dl_pilots: &DMatrix<Complex64>,
    rho_dl: f64,
    sigma2_dl: f64,
    rng: &mut impl Rng,
) -> Complex64 {
    let n_p = dl_pilots.nrows();
    let phi_i = dl_pilots.column(ue);
    let sqrt_rho = rho_dl.sqrt();
    let mut acc = Complex64::new(sqrt_rho * n_p as f64, 0.0) * xi_row[ue];
    for (j, &xi) in xi_row.iter().enumerate() {
        if j == ue {
            continue;
        }
        let inner = dl_pilots.column(j).dotc(&phi_i); // phi_j^H phi_i
        acc += Complex64::new(sqrt_rho, 0.0) * xi * inner;
    }
    let amp = (sigma2_dl / 2.0).sqrt();
    let mut noise = Complex64::new(0.0, 0.0);
    for t in 0..n_p {
        let z = Complex64::new(
            amp * rng.sample::<f64, _>(StandardNormal),
            amp * rng.sample::<f64, _>(StandardNormal),
        );
        noise += z * phi_i[t];
    }
    acc + noise
}

/// Despread DL pilot observations for every UE. `xi[(i, j)] = h_i^H w_j`.
pub fn dl_pilot_rx_and_despread(
    xi: &DMatrix<Complex64>,
    dl_pilots: &DMatrix<Complex64>,
    rho_dl: f64,
    sigma2_dl: f64,
    rng: &mut impl Rng,
) -> Vec<Complex64> {
    let k = xi.nrows();
    (0..k)
        .map(|i| {
            let row: Vec<Complex64> = xi.row(i).iter().cloned().collect();
            dl_despread_one(&row, i, dl_pilots, rho_dl, sigma2_dl, rng)
        })
        .collect()
}

/// Least-squares estimate of the precoded channel from the despread
/// observation: `xi_hat = y~ / (sqrt(rho_dl) n_p)`.
pub fn dl_ls_estimate(
    y_tilde: Complex64,
    rho_dl: f64,
    np_dl: usize,
) -> Result<Complex64, SimError> {
    if np_dl == 0 {
        return Err(SimError::InvalidConfig(
            "LS downlink estimation needs np_dl >= 1 (use the statistics-based estimate instead)"
                .into(),
        ));
    }
    if rho_dl <= 0.0 {
        return Err(SimError::InvalidConfig("LS downlink estimation needs rho_dl > 0".into()));
    }
    Ok(y_tilde / Complex64::new(rho_dl.sqrt() * np_dl as f64, 0.0))
}

/// First- and second-order statistics feeding the LMMSE estimator.
#[derive(Debug, Clone, Copy)]
pub struct DlPilotStats {
    pub xi_mean: Complex64,
    pub xi_var: f64,
    pub noise_mean: Complex64,
    pub noise_var: f64,
}

/// LMMSE estimate of the precoded channel from the despread observation and
/// its statistics. Falls back to the prior mean when the observation carries
/// no information (`xi_var` and the gain denominator vanish).
pub fn dl_lmmse_estimate(
    y_tilde: Complex64,
    stats: &DlPilotStats,
    rho_dl: f64,
    np_dl: usize,
) -> Complex64 {
    let np = np_dl as f64;
    let denom = rho_dl * np * np * stats.xi_var + stats.noise_var;
    if denom <= 0.0 || stats.xi_var <= 0.0 {
        return stats.xi_mean;
    }
    let gain = rho_dl.sqrt() * np * stats.xi_var / denom;
    let centered =
        y_tilde - Complex64::new(rho_dl.sqrt() * np, 0.0) * stats.xi_mean - stats.noise_mean;
    stats.xi_mean + Complex64::new(gain, 0.0) * centered
}
