//! Network geometry, large-scale fading, spatial correlation, and channel
//! realizations.
//!
//! APs sit on a cell-centered square grid at a fixed height above the UE
//! plane; UEs are dropped uniformly in the square. Small-scale fading is
//! correlated Rayleigh with the local scattering model: a per-(UE, AP)
//! Hermitian Toeplitz matrix whose entries integrate a uniform scattering
//! cluster around the nominal angle. Nonfading scenarios get deterministic
//! channel vectors instead.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::SimError;
use crate::quad::gauss_legendre;

/// Log-distance pathloss exponent variants (model value in dB at distance d:
/// `-30.5 - slope * log10(d)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathlossModel {
    /// Slope 36.7 (used by the nonfading comparison scenario).
    Exp367,
    /// Slope 37.6 (the running-example network parameter set).
    Exp376,
}

impl PathlossModel {
    fn slope(self) -> f64 {
        match self {
            PathlossModel::Exp367 => 36.7,
            PathlossModel::Exp376 => 37.6,
        }
    }
}

/// Large-scale channel gain in dB at distance `d_m` meters.
pub fn pathloss_db(d_m: f64, model: PathlossModel) -> Result<f64, SimError> {
    if !(d_m >= 1.0) {
        return Err(SimError::InvalidDistance(d_m));
    }
    Ok(-30.5 - model.slope() * d_m.log10())
}

/// AP and UE geometry with precomputed distances and nominal angles.
#[derive(Debug, Clone)]
pub struct Topology {
    pub ap_positions: Vec<[f64; 3]>,
    pub ue_positions: Vec<[f64; 3]>,
    /// `distances[(i, l)]`: 3-D distance between UE `i` and AP `l` (meters).
    pub distances: DMatrix<f64>,
    /// `nominal_angles[(i, l)]`: horizontal azimuth from AP `l` towards UE
    /// `i` (radians).
    pub nominal_angles: DMatrix<f64>,
}

/// Geometry inputs: a square coverage area with APs on a cell-centered
/// `sqrt(L) x sqrt(L)` grid mounted `ap_height_m` above the UE plane.
#[derive(Debug, Clone, Copy)]
pub struct TopologyConfig {
    pub area_m: f64,
    pub num_aps: usize,
    pub ap_height_m: f64,
}

/// Cell-centered grid positions for `L` APs; errors unless `sqrt(L)` is an
/// integer.
pub fn grid_ap_positions(cfg: &TopologyConfig) -> Result<Vec<[f64; 3]>, SimError> {
    let side = (cfg.num_aps as f64).sqrt().round() as usize;
    if side * side != cfg.num_aps || cfg.num_aps == 0 {
        return Err(SimError::InvalidConfig(format!(
            "grid placement needs a square AP count, got L = {}",
            cfg.num_aps
        )));
    }
    let cell = cfg.area_m / side as f64;
    let mut positions = Vec::with_capacity(cfg.num_aps);
    for iy in 0..side {
        for ix in 0..side {
            positions.push([
                (ix as f64 + 0.5) * cell,
                (iy as f64 + 0.5) * cell,
                cfg.ap_height_m,
            ]);
        }
    }
    Ok(positions)
}

/// Uniform i.i.d. UE drop over the square area.
pub fn drop_ues_uniform(area_m: f64, num_ues: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..num_ues)
        .map(|_| [rng.random::<f64>() * area_m, rng.random::<f64>() * area_m])
        .collect()
}

/// Builds the topology for the given UE drop.
pub fn build_topology(cfg: &TopologyConfig, ue_xy: &[[f64; 2]]) -> Result<Topology, SimError> {
    let ap_positions = grid_ap_positions(cfg)?;
    let k = ue_xy.len();
    let l = ap_positions.len();
    let mut distances = DMatrix::zeros(k, l);
    let mut angles = DMatrix::zeros(k, l);
    let ue_positions: Vec<[f64; 3]> = ue_xy.iter().map(|&[x, y]| [x, y, 0.0]).collect();
    for (i, ue) in ue_positions.iter().enumerate() {
        for (j, ap) in ap_positions.iter().enumerate() {
            let dx = ue[0] - ap[0];
            let dy = ue[1] - ap[1];
            let dz = ue[2] - ap[2];
            distances[(i, j)] = (dx * dx + dy * dy + dz * dz).sqrt();
            angles[(i, j)] = dy.atan2(dx);
        }
    }
    Ok(Topology { ap_positions, ue_positions, distances, nominal_angles: angles })
}

fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(64))
}

/// Local-scattering spatial correlation matrix for an `m`-antenna
/// half-wavelength ULA.
///
/// Entry `(m1, m2)` is `beta/(2 delta) * integral over [-delta, delta] of
/// exp(j pi (m1 - m2) sin(phi + x)) dx`, evaluated with the 64-node
/// Gauss–Legendre rule. The matrix is Hermitian Toeplitz by construction:
/// only the first column is integrated, the rest is mirrored by conjugation.
pub fn local_scattering_corr(
    beta: f64,
    phi: f64,
    delta: f64,
    m: usize,
) -> DMatrix<Complex64> {
    assert!(m >= 1 && delta > 0.0);
    let (nodes, weights) = gl64();
    let mut first_col = vec![Complex64::new(0.0, 0.0); m];
    for (&t, &w) in nodes.iter().zip(weights) {
        // Map [-1, 1] -> [-delta, delta]; the Jacobian cancels half of the
        // 1/(2 delta) normalization, leaving beta/2 * sum(w f).
        let sin_angle = (phi + delta * t).sin();
        for (d, entry) in first_col.iter_mut().enumerate() {
            let arg = PI * d as f64 * sin_angle;
            *entry += Complex64::new(w * arg.cos(), w * arg.sin());
        }
    }
    for entry in &mut first_col {
        *entry *= 0.5 * beta;
    }
    first_col[0] = Complex64::new(beta, 0.0); // integrand is exactly 1 on the diagonal

    DMatrix::from_fn(m, m, |m1, m2| {
        if m1 >= m2 {
            first_col[m1 - m2]
        } else {
            first_col[m2 - m1].conj()
        }
    })
}

/// Spatial correlation matrices `R_il` for every (UE, AP) pair, plus the
/// normalized traces `beta_il`.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    mats: Vec<DMatrix<Complex64>>,
    betas: DMatrix<f64>,
    num_ues: usize,
    num_aps: usize,
    antennas: usize,
}

impl CorrelationSet {
    /// Builds the set from geometry: pathloss fixes the normalized trace,
    /// local scattering around the nominal angle fixes the eigenstructure.
    pub fn build(
        topology: &Topology,
        model: PathlossModel,
        delta: f64,
        antennas: usize,
    ) -> Result<Self, SimError> {
        let k = topology.ue_positions.len();
        let l = topology.ap_positions.len();
        let mut mats = Vec::with_capacity(k * l);
        let mut betas = DMatrix::zeros(k, l);
        for i in 0..k {
            for j in 0..l {
                let beta_db = pathloss_db(topology.distances[(i, j)], model)?;
                let beta = 10f64.powf(beta_db / 10.0);
                betas[(i, j)] = beta;
                mats.push(local_scattering_corr(
                    beta,
                    topology.nominal_angles[(i, j)],
                    delta,
                    antennas,
                ));
            }
        }
        Ok(Self { mats, betas, num_ues: k, num_aps: l, antennas })
    }

    /// Direct construction from explicit matrices (row-major over (UE, AP)).
    pub fn from_matrices(
        mats: Vec<DMatrix<Complex64>>,
        num_ues: usize,
        num_aps: usize,
    ) -> Result<Self, SimError> {
        if mats.len() != num_ues * num_aps || mats.is_empty() {
            return Err(SimError::InvalidConfig("correlation set shape mismatch".into()));
        }
        let antennas = mats[0].nrows();
        let mut betas = DMatrix::zeros(num_ues, num_aps);
        for i in 0..num_ues {
            for j in 0..num_aps {
                let m = &mats[i * num_aps + j];
                if m.nrows() != antennas || m.ncols() != antennas {
                    return Err(SimError::InvalidConfig("non-square correlation matrix".into()));
                }
                betas[(i, j)] = m.diagonal().iter().map(|z| z.re).sum::<f64>() / antennas as f64;
            }
        }
        Ok(Self { mats, betas, num_ues, num_aps, antennas })
    }

    pub fn get(&self, ue: usize, ap: usize) -> &DMatrix<Complex64> {
        &self.mats[ue * self.num_aps + ap]
    }

    /// Normalized trace `tr(R_il) / M`.
    pub fn beta(&self, ue: usize, ap: usize) -> f64 {
        self.betas[(ue, ap)]
    }

    pub fn betas(&self) -> &DMatrix<f64> {
        &self.betas
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Eigen-factorizes every matrix for repeated sampling.
    pub fn sampler(&self) -> Result<ChannelSampler, SimError> {
        let mut factors = Vec::with_capacity(self.mats.len());
        for mat in &self.mats {
            factors.push(sampling_factor(mat)?);
        }
        Ok(ChannelSampler {
            factors,
            num_ues: self.num_ues,
            num_aps: self.num_aps,
            antennas: self.antennas,
        })
    }
}

const PSD_TOL: f64 = 1e-10;

/// `F` with `F F^H = R`, from the Hermitian eigendecomposition with
/// tolerance-clipped eigenvalues.
fn sampling_factor(r: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, SimError> {
    if r.nrows() == 1 {
        let beta = r[(0, 0)].re;
        if beta < 0.0 {
            return Err(SimError::InvalidCorrelation { eigenvalue: beta, tolerance: 0.0 });
        }
        return Ok(DMatrix::from_element(1, 1, Complex64::new(beta.sqrt(), 0.0)));
    }
    let eig = nalgebra::SymmetricEigen::new(r.clone());
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = -PSD_TOL * max_ev;
    let mut factor = eig.eigenvectors;
    for (c, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < tol {
            return Err(SimError::InvalidCorrelation { eigenvalue: ev, tolerance: tol });
        }
        let scale = Complex64::new(ev.max(0.0).sqrt(), 0.0);
        for v in factor.column_mut(c).iter_mut() {
            *v *= scale;
        }
    }
    Ok(factor)
}

/// One joint small-scale fading draw: a collective `ML`-vector per UE.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: Vec<DVector<Complex64>>,
}

/// Pre-factorized sampler for correlated Rayleigh draws.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factors: Vec<DMatrix<Complex64>>,
    num_ues: usize,
    num_aps: usize,
    antennas: usize,
}

impl ChannelSampler {
    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Draws all UEs' collective channels into the columns of `out`
    /// (`ML x K`), using `scratch` (length `M`) for the white seed vector.
    pub fn sample_into(
        &self,
        rng: &mut impl Rng,
        scratch: &mut DVector<Complex64>,
        out: &mut DMatrix<Complex64>,
    ) {
        let m = self.antennas;
        debug_assert_eq!(out.nrows(), m * self.num_aps);
        debug_assert_eq!(out.ncols(), self.num_ues);
        debug_assert_eq!(scratch.len(), m);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for ue in 0..self.num_ues {
            for ap in 0..self.num_aps {
                for x in scratch.iter_mut() {
                    *x = Complex64::new(
                        rng.sample::<f64, _>(StandardNormal) * inv_sqrt2,
                        rng.sample::<f64, _>(StandardNormal) * inv_sqrt2,
                    );
                }
                let factor = &self.factors[ue * self.num_aps + ap];
                let mut col = out.column_mut(ue);
                let mut block = col.rows_mut(ap * m, m);
                block.gemv(Complex64::new(1.0, 0.0), factor, scratch, Complex64::new(0.0, 0.0));
            }
        }
    }

    /// Allocating convenience wrapper around [`ChannelSampler::sample_into`].
    pub fn sample(&self, rng: &mut impl Rng) -> ChannelRealization {
        let m = self.antennas;
        let mut scratch = DVector::zeros(m);
        let mut out = DMatrix::zeros(m * self.num_aps, self.num_ues);
        self.sample_into(rng, &mut scratch, &mut out);
        let h = (0..self.num_ues).map(|i| out.column(i).clone_owned()).collect();
        ChannelRealization { h }
    }
}

/// Draws one correlated Rayleigh realization per UE.
pub fn sample_channels(
    corr: &CorrelationSet,
    rng: &mut impl Rng,
) -> Result<ChannelRealization, SimError> {
    Ok(corr.sampler()?.sample(rng))
}

/// Carrier wavelength of the deterministic line-of-sight model (2 GHz).
pub const NONFADING_CARRIER_WAVELENGTH_M: f64 = 0.15;

/// Deterministic (nonfading) channel vectors: per AP block,
/// `sqrt(beta(d)) * exp(-j 2 pi d / lambda) * a(phi)` with the
/// half-wavelength ULA steering vector `a_m = exp(j pi m sin(phi))`.
///
/// The propagation phase is what makes different UEs' collective vectors
/// linearly well-separated across distributed APs; without it all vectors
/// collapse into the positive orthant and spatial interference suppression
/// degrades far below what physical line-of-sight channels support.
/// Single-antenna APs reduce to `sqrt(beta) exp(-j 2 pi d / lambda)`
/// entries.
pub fn nonfading_channels(
    topology: &Topology,
    model: PathlossModel,
    antennas_per_ap: usize,
) -> Result<Vec<DVector<Complex64>>, SimError> {
    let k = topology.ue_positions.len();
    let l = topology.ap_positions.len();
    let m = antennas_per_ap;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut h = DVector::zeros(l * m);
        for j in 0..l {
            let d = topology.distances[(i, j)];
            let beta_db = pathloss_db(d, model)?;
            let amp = 10f64.powf(beta_db / 20.0);
            let prop_phase = -2.0 * PI * d / NONFADING_CARRIER_WAVELENGTH_M;
            let sin_phi = topology.nominal_angles[(i, j)].sin();
            for a in 0..m {
                let arg = prop_phase + PI * a as f64 * sin_phi;
                h[j * m + a] = Complex64::new(amp * arg.cos(), amp * arg.sin());
            }
        }
        out.push(h);
    }
    Ok(out)
}
