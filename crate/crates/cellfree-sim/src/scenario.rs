//! Scenario configuration and the per-placement simulation pipeline.
//!
//! A [`Placement`] freezes everything that depends only on UE positions:
//! geometry, correlation matrices, estimation filters, combiner base
//! factors, serving assignment, and (when the architecture or direction
//! needs them) Monte-Carlo link statistics. A fading realization then runs
//! pilots -> estimates -> combiners -> effective link on preallocated
//! workspace buffers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    build_topology, drop_ues_uniform, nonfading_channels, ChannelSampler, CorrelationSet,
    PathlossModel, Topology, TopologyConfig,
};
use crate::error::SimError;
use crate::estimation::{ul_pilot_rx_into, PilotBook, UlMmseEstimator};
use crate::processing::{
    assign_serving_ap, cdot, effective_link_dl, effective_link_ul, mmse_combiner_centralized_into,
    CombinerBase, CombinerScheme, Direction, DlChannelStats, DlPilotMode, DlPowerNorm,
    EffectiveLink, LinkStatistics, UlChannelKnowledge,
};
use crate::sim::{rng_stream, task};

/// Network processing architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// All APs forward to the CPU, which combines over all `L*M` antennas.
    CellFreeCentralized,
    /// Each AP combines locally from its own estimates; the CPU adds the
    /// filtered signals and decodes against statistical channel knowledge.
    CellFreeDistributed,
    /// Each UE is served by one AP/BS only (small cells when `M = 1`);
    /// other cells interfere.
    Cellular,
}

/// Small-scale channel model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    CorrelatedRayleigh,
    /// Deterministic channels, perfect CSI, no pilot overhead.
    Nonfading,
}

/// UE drop rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UePlacement {
    Uniform,
    /// Single UE pinned to the area center (hardening studies).
    Center,
}

/// Full scenario description; all powers in Watt, angles in radians.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub architecture: Architecture,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    pub area_m: f64,
    pub ap_height_m: f64,
    pub pathloss: PathlossModel,
    pub delta_rad: f64,
    pub rho_ul: f64,
    pub rho_dl: f64,
    pub sigma2_ul: f64,
    pub sigma2_dl: f64,
    pub n_total: usize,
    pub np_ul: usize,
    pub np_dl: usize,
    pub bits: f64,
    pub combiner: CombinerScheme,
    pub direction: Direction,
    pub dl_pilot_mode: DlPilotMode,
    pub dl_power_norm: DlPowerNorm,
    pub channel_model: ChannelModel,
    pub ue_placement: UePlacement,
    pub n_stat: usize,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.num_ues == 0 {
            return fail("K must be >= 1".into());
        }
        if self.antennas_per_ap == 0 {
            return fail("M must be >= 1".into());
        }
        let side = (self.num_aps as f64).sqrt().round() as usize;
        if self.num_aps == 0 || side * side != self.num_aps {
            return fail(format!("grid AP count L = {} is not a perfect square", self.num_aps));
        }
        for (name, v) in [
            ("area_m", self.area_m),
            ("ap_height_m", self.ap_height_m),
            ("rho_ul", self.rho_ul),
            ("rho_dl", self.rho_dl),
            ("sigma2_ul", self.sigma2_ul),
            ("sigma2_dl", self.sigma2_dl),
            ("bits", self.bits),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return fail(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        match self.channel_model {
            ChannelModel::Nonfading => {
                if self.np_ul != 0 || self.np_dl != 0 {
                    return fail("nonfading scenarios use no pilots (np_ul = np_dl = 0)".into());
                }
                if self.n_total == 0 {
                    return fail("n_total must be >= 1".into());
                }
            }
            ChannelModel::CorrelatedRayleigh => {
                if self.delta_rad <= 0.0 {
                    return fail("angular spread delta must be > 0".into());
                }
                if self.n_total % 2 != 0 {
                    return fail(format!(
                        "n_total = {} cannot split into equal UL/DL halves",
                        self.n_total
                    ));
                }
                let half = self.n_total / 2;
                if self.np_ul == 0 {
                    return fail("fading scenarios need UL pilots (np_ul >= 1)".into());
                }
                if self.num_ues > self.np_ul {
                    return Err(SimError::UnsupportedPilotLoad(self.num_ues, self.np_ul));
                }
                if self.np_ul >= half {
                    return fail(format!("np_ul = {} leaves no UL data symbols", self.np_ul));
                }
                if self.direction == Direction::Downlink {
                    if self.np_dl >= half {
                        return fail(format!("np_dl = {} leaves no DL data symbols", self.np_dl));
                    }
                    let wants_pilots =
                        matches!(self.dl_pilot_mode, DlPilotMode::Ls | DlPilotMode::Lmmse);
                    if wants_pilots && self.np_dl == 0 {
                        return fail("DL pilot estimation requested but np_dl = 0".into());
                    }
                    if self.np_dl > 0 && self.num_ues > self.np_dl {
                        return Err(SimError::UnsupportedPilotLoad(self.num_ues, self.np_dl));
                    }
                }
                if self.needs_stats() && self.n_stat < 100 {
                    return fail(format!("n_stat = {} too small (>= 100)", self.n_stat));
                }
            }
        }
        if self.ue_placement == UePlacement::Center && self.num_ues != 1 {
            return fail("center UE placement is defined for K = 1".into());
        }
        Ok(())
    }

    /// Data symbols available to the configured direction.
    pub fn data_len(&self) -> usize {
        match self.channel_model {
            ChannelModel::Nonfading => self.n_total,
            ChannelModel::CorrelatedRayleigh => match self.direction {
                Direction::Uplink => self.n_total / 2 - self.np_ul,
                Direction::Downlink => self.n_total / 2 - self.np_dl,
            },
        }
    }

    /// Coding rate in nats per channel use: `bits * ln 2 / n_data`.
    pub fn rate_nats(&self) -> f64 {
        self.bits * std::f64::consts::LN_2 / self.data_len() as f64
    }

    /// Whether the configuration decodes against Monte-Carlo statistics
    /// (distributed UL; average-normalized or statistics-based DL).
    pub fn needs_stats(&self) -> bool {
        if self.channel_model == ChannelModel::Nonfading {
            return false;
        }
        match self.direction {
            Direction::Uplink => self.architecture == Architecture::CellFreeDistributed,
            Direction::Downlink => {
                self.dl_power_norm == DlPowerNorm::Average
                    || matches!(self.dl_pilot_mode, DlPilotMode::None | DlPilotMode::Lmmse)
            }
        }
    }
}

/// Reusable per-worker buffers for one placement's realizations.
pub struct Workspace {
    h: DMatrix<Complex64>,
    h_hat: DMatrix<Complex64>,
    y: Vec<DMatrix<Complex64>>,
    u: DMatrix<Complex64>,
    w: DMatrix<Complex64>,
    t: DMatrix<Complex64>,
    gram: DMatrix<Complex64>,
    a_local: DMatrix<Complex64>,
    x_local: DMatrix<Complex64>,
    scratch_m: DVector<Complex64>,
    xi_row: Vec<Complex64>,
}

impl Workspace {
    fn new(cfg: &ScenarioConfig) -> Self {
        let (k, l, m) = (cfg.num_ues, cfg.num_aps, cfg.antennas_per_ap);
        let n = l * m;
        Workspace {
            h: DMatrix::zeros(n, k),
            h_hat: DMatrix::zeros(n, k),
            y: vec![DMatrix::zeros(m, cfg.np_ul); l],
            u: DMatrix::zeros(n, k),
            w: DMatrix::zeros(n, k),
            t: DMatrix::zeros(n, k),
            gram: DMatrix::zeros(k, k),
            a_local: DMatrix::zeros(m, m),
            x_local: DMatrix::zeros(m, k),
            scratch_m: DVector::zeros(m),
            xi_row: vec![Complex64::new(0.0, 0.0); k],
        }
    }
}

struct FadingParts {
    sampler: ChannelSampler,
    book: PilotBook,
    estimator: UlMmseEstimator,
    base: CombinerBase,
    serving: Option<Vec<usize>>,
    served_by: Option<Vec<Vec<usize>>>,
    stats: Option<LinkStatistics>,
}

enum PlacementKind {
    Nonfading { links: Vec<EffectiveLink> },
    Fading(Box<FadingParts>),
}

/// One UE drop with all placement-level preprocessing done.
pub struct Placement {
    pub cfg: ScenarioConfig,
    pub topology: Topology,
    pub betas: DMatrix<f64>,
    kind: PlacementKind,
}

impl Placement {
    /// Builds the placement for index `placement_idx` of an experiment. UE
    /// positions come from the placement's dedicated topology stream, so a
    /// drop is reproducible in isolation.
    pub fn build(cfg: &ScenarioConfig, seed: u64, placement_idx: usize) -> Result<Self, SimError> {
        cfg.validate()?;
        let top_cfg = TopologyConfig {
            area_m: cfg.area_m,
            num_aps: cfg.num_aps,
            ap_height_m: cfg.ap_height_m,
        };
        let ue_xy = match cfg.ue_placement {
            UePlacement::Uniform => {
                let mut rng = rng_stream(seed, task::topology(placement_idx));
                drop_ues_uniform(cfg.area_m, cfg.num_ues, &mut rng)
            }
            UePlacement::Center => vec![[cfg.area_m / 2.0, cfg.area_m / 2.0]],
        };
        let topology = build_topology(&top_cfg, &ue_xy)?;

        match cfg.channel_model {
            ChannelModel::Nonfading => Self::build_nonfading(cfg, topology),
            ChannelModel::CorrelatedRayleigh => {
                Self::build_fading(cfg, topology, seed, placement_idx)
            }
        }
    }

    fn build_nonfading(cfg: &ScenarioConfig, topology: Topology) -> Result<Self, SimError> {
        let (k, l, m) = (cfg.num_ues, cfg.num_aps, cfg.antennas_per_ap);
        let channels = nonfading_channels(&topology, cfg.pathloss, m)?;
        let rows = l * m;
        let mut h = DMatrix::zeros(rows, k);
        for (i, hi) in channels.iter().enumerate() {
            h.column_mut(i).copy_from(hi);
        }
        let mut betas = DMatrix::zeros(k, l);
        for i in 0..k {
            for j in 0..l {
                betas[(i, j)] = h.view((j * m, i), (m, 1)).norm_squared() / m as f64;
            }
        }

        // Perfect CSI: estimates equal the channels, no error covariance.
        let serving =
            (cfg.architecture == Architecture::Cellular).then(|| assign_serving_ap(&betas));
        let base = CombinerBase::new(&[], k, l, m, cfg.rho_ul, cfg.sigma2_ul)?;
        let mut ws = Workspace::new(cfg);
        let u = combine_all(cfg, &h, &base, serving.as_deref(), &mut ws)?;

        let mut links = Vec::with_capacity(k);
        for i in 0..k {
            let link = match cfg.direction {
                Direction::Uplink => {
                    let u_col = &u.as_slice()[i * rows..(i + 1) * rows];
                    let g_hat = cdot(u_col, &h.as_slice()[i * rows..(i + 1) * rows]);
                    effective_link_ul(
                        u_col,
                        &h,
                        i,
                        UlChannelKnowledge::Estimate(g_hat),
                        cfg.rho_ul,
                        cfg.sigma2_ul,
                    )
                }
                Direction::Downlink => {
                    // Deterministic channels: both power normalizations
                    // coincide and the precoded channel is known exactly.
                    // Each AP block carries its own rho_dl budget.
                    let mut w = DMatrix::zeros(rows, k);
                    for j in 0..k {
                        for ap in 0..l {
                            let u_blk: nalgebra::DVector<Complex64> =
                                u.column(j).rows(ap * m, m).clone_owned();
                            let w_blk = crate::processing::precoder_from_combiner(
                                &u_blk,
                                u_blk.norm_squared(),
                                cfg.rho_dl,
                                DlPowerNorm::Average,
                            );
                            w.view_mut((ap * m, j), (m, 1)).copy_from(&w_blk);
                        }
                    }
                    let h_col = &h.as_slice()[i * rows..(i + 1) * rows];
                    let xi_row: Vec<Complex64> = (0..k)
                        .map(|j| cdot(h_col, &w.as_slice()[j * rows..(j + 1) * rows]))
                        .collect();
                    let interference: f64 = xi_row
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, z)| z.norm_sqr())
                        .sum();
                    EffectiveLink {
                        g: xi_row[i],
                        g_hat: xi_row[i],
                        sigma2_eff: cfg.sigma2_dl + interference,
                        rho: 1.0,
                        direction: Direction::Downlink,
                    }
                }
            };
            links.push(link);
        }
        Ok(Placement {
            cfg: cfg.clone(),
            topology,
            betas,
            kind: PlacementKind::Nonfading { links },
        })
    }

    fn build_fading(
        cfg: &ScenarioConfig,
        topology: Topology,
        seed: u64,
        placement_idx: usize,
    ) -> Result<Self, SimError> {
        let (k, l, m) = (cfg.num_ues, cfg.num_aps, cfg.antennas_per_ap);
        let corr = CorrelationSet::build(&topology, cfg.pathloss, cfg.delta_rad, m)?;
        let betas = corr.betas().clone();
        let sampler = corr.sampler()?;
        let book = PilotBook::orthogonal(k, cfg.np_ul, cfg.np_dl, cfg.rho_ul, cfg.rho_dl)?;
        let estimator = UlMmseEstimator::new(&corr, cfg.np_ul, cfg.rho_ul, cfg.sigma2_ul)?;
        let base = CombinerBase::new(estimator.err_covs(), k, l, m, cfg.rho_ul, cfg.sigma2_ul)?;
        let serving =
            (cfg.architecture == Architecture::Cellular).then(|| assign_serving_ap(&betas));
        let served_by = serving.as_ref().map(|s| {
            let mut by = vec![Vec::new(); l];
            for (ue, &ap) in s.iter().enumerate() {
                by[ap].push(ue);
            }
            by
        });

        let mut placement = Placement {
            cfg: cfg.clone(),
            topology,
            betas,
            kind: PlacementKind::Fading(Box::new(FadingParts {
                sampler,
                book,
                estimator,
                base,
                serving,
                served_by,
                stats: None,
            })),
        };
        if cfg.needs_stats() {
            let stats = placement.estimate_link_statistics(cfg.n_stat, seed, placement_idx)?;
            match &mut placement.kind {
                PlacementKind::Fading(p) => p.stats = Some(stats),
                PlacementKind::Nonfading { .. } => unreachable!(),
            }
        }
        Ok(placement)
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(&self.cfg)
    }

    /// Uniformly drawn probe UE for availability runs.
    pub fn draw_probe(&self, seed: u64, placement_idx: usize) -> usize {
        let mut rng = rng_stream(seed, task::probe(placement_idx));
        rng.random_range(0..self.cfg.num_ues)
    }

    pub fn link_statistics(&self) -> Option<&LinkStatistics> {
        match &self.kind {
            PlacementKind::Fading(p) => p.stats.as_ref(),
            PlacementKind::Nonfading { .. } => None,
        }
    }

    pub fn is_nonfading(&self) -> bool {
        matches!(self.kind, PlacementKind::Nonfading { .. })
    }

    /// Precomputed deterministic link (nonfading placements only).
    pub fn nonfading_link(&self, ue: usize) -> Option<&EffectiveLink> {
        match &self.kind {
            PlacementKind::Nonfading { links } => links.get(ue),
            PlacementKind::Fading(_) => None,
        }
    }

    fn fading(&self) -> &FadingParts {
        match &self.kind {
            PlacementKind::Fading(p) => p,
            PlacementKind::Nonfading { .. } => {
                panic!("fading pipeline invoked on a nonfading placement")
            }
        }
    }

    /// Runs channels -> pilots -> estimates -> combiners for one fading
    /// realization, leaving results in the workspace.
    fn realize(&self, ws: &mut Workspace, rng: &mut ChaCha8Rng) -> Result<(), SimError> {
        let p = self.fading();
        let cfg = &self.cfg;
        p.sampler.sample_into(rng, &mut ws.scratch_m, &mut ws.h);
        ul_pilot_rx_into(&ws.h, &p.book, cfg.sigma2_ul, rng, &mut ws.y);
        p.estimator.estimate_into(&ws.y, &p.book, &mut ws.scratch_m, &mut ws.h_hat);
        combine_into(
            cfg,
            &ws.h_hat,
            &p.base,
            p.serving.as_deref(),
            p.served_by.as_deref(),
            &mut ws.t,
            &mut ws.gram,
            &mut ws.a_local,
            &mut ws.x_local,
            &mut ws.u,
        )
    }

    /// Effective link of `ue` for the current workspace contents.
    fn extract_link(
        &self,
        ws: &mut Workspace,
        ue: usize,
        rng: &mut ChaCha8Rng,
        genie_override: bool,
    ) -> Result<EffectiveLink, SimError> {
        let p = self.fading();
        let cfg = &self.cfg;
        let rows = ws.h.nrows();
        match cfg.direction {
            Direction::Uplink => {
                let u_col = &ws.u.as_slice()[ue * rows..(ue + 1) * rows];
                let knowledge = if genie_override {
                    UlChannelKnowledge::Estimate(cdot(
                        u_col,
                        &ws.h.as_slice()[ue * rows..(ue + 1) * rows],
                    ))
                } else {
                    match cfg.architecture {
                        Architecture::CellFreeDistributed => UlChannelKnowledge::Mean(
                            p.stats
                                .as_ref()
                                .expect("distributed UL decodes against statistics")
                                .mean_eff_channel[ue],
                        ),
                        _ => UlChannelKnowledge::Estimate(cdot(
                            u_col,
                            &ws.h_hat.as_slice()[ue * rows..(ue + 1) * rows],
                        )),
                    }
                };
                Ok(effective_link_ul(u_col, &ws.h, ue, knowledge, cfg.rho_ul, cfg.sigma2_ul))
            }
            Direction::Downlink => {
                // Per-AP power budget: every AP block of every served UE is
                // normalized to carry rho_dl on its own.
                let (l, m) = (cfg.num_aps, cfg.antennas_per_ap);
                for j in 0..cfg.num_ues {
                    for ap in 0..l {
                        let lo = j * rows + ap * m;
                        let u_blk = &ws.u.as_slice()[lo..lo + m];
                        let denom = match cfg.dl_power_norm {
                            DlPowerNorm::Average => {
                                p.stats
                                    .as_ref()
                                    .expect("average DL normalization needs statistics")
                                    .block_energy[j * l + ap]
                            }
                            DlPowerNorm::Instantaneous => {
                                u_blk.iter().map(|v| v.norm_sqr()).sum::<f64>()
                            }
                        };
                        let scale = if denom > 0.0 {
                            Complex64::new((cfg.rho_dl / denom).sqrt(), 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        // write through the raw buffer to keep the block view
                        let w = &mut ws.w.as_mut_slice()[lo..lo + m];
                        let u = &ws.u.as_slice()[lo..lo + m];
                        for (wv, uv) in w.iter_mut().zip(u) {
                            *wv = uv * scale;
                        }
                    }
                }
                let h_col = &ws.h.as_slice()[ue * rows..(ue + 1) * rows];
                for j in 0..cfg.num_ues {
                    ws.xi_row[j] = cdot(h_col, &ws.w.as_slice()[j * rows..(j + 1) * rows]);
                }
                let mode = if genie_override { DlPilotMode::Genie } else { cfg.dl_pilot_mode };
                let dl_stats = p.stats.as_ref().map(|s| s.precoded[ue]);
                effective_link_dl(
                    &ws.xi_row,
                    ue,
                    mode,
                    p.book.dl_pilots(),
                    cfg.rho_dl,
                    cfg.sigma2_dl,
                    dl_stats.as_ref(),
                    rng,
                )
            }
        }
    }

    /// One fading realization end to end for `ue`.
    pub fn simulate_link(
        &self,
        ws: &mut Workspace,
        ue: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EffectiveLink, SimError> {
        self.realize(ws, rng)?;
        self.extract_link(ws, ue, rng, false)
    }

    /// Same pipeline with a genie decoder estimate (outage evaluations).
    pub fn simulate_link_genie(
        &self,
        ws: &mut Workspace,
        ue: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EffectiveLink, SimError> {
        self.realize(ws, rng)?;
        self.extract_link(ws, ue, rng, true)
    }

    /// Extracts a further UE's link from the already-realized network state
    /// (multi-probe evaluations share channels, pilots, and combiners).
    pub fn resample_link(
        &self,
        ws: &mut Workspace,
        ue: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EffectiveLink, SimError> {
        self.extract_link(ws, ue, rng, false)
    }

    /// Monte-Carlo link statistics over `n_stat` dedicated realizations:
    /// per-(UE, AP) block means `E[u_il^H h_il]` and `E[||u_il||^2]`, plus
    /// (for downlink runs) the mean and variance of the per-AP-normalized
    /// precoded channel gathered in a second pass. Deterministic given
    /// (seed, placement index): realizations are reduced chunk by chunk in
    /// index order.
    pub fn estimate_link_statistics(
        &self,
        n_stat: usize,
        seed: u64,
        placement_idx: usize,
    ) -> Result<LinkStatistics, SimError> {
        const CHUNK: usize = 64;
        let k = self.cfg.num_ues;
        let l = self.cfg.num_aps;
        let m = self.cfg.antennas_per_ap;
        let num_chunks = n_stat.div_ceil(CHUNK);

        struct Partial {
            z: Vec<Complex64>,
            e: Vec<f64>,
        }
        let partials: Vec<Partial> = (0..num_chunks)
            .into_par_iter()
            .map_init(
                || self.workspace(),
                |ws, c| -> Result<Partial, SimError> {
                    let mut p = Partial {
                        z: vec![Complex64::new(0.0, 0.0); k * l],
                        e: vec![0.0; k * l],
                    };
                    for r in c * CHUNK..((c + 1) * CHUNK).min(n_stat) {
                        let mut rng = rng_stream(seed, task::stats(placement_idx, r));
                        self.realize(ws, &mut rng)?;
                        let u = ws.u.as_slice();
                        let h = ws.h.as_slice();
                        let rows = l * m;
                        for i in 0..k {
                            for ap in 0..l {
                                let lo = i * rows + ap * m;
                                let u_blk = &u[lo..lo + m];
                                let h_blk = &h[lo..lo + m];
                                p.z[i * l + ap] += cdot(u_blk, h_blk);
                                p.e[i * l + ap] +=
                                    u_blk.iter().map(|v| v.norm_sqr()).sum::<f64>();
                            }
                        }
                    }
                    Ok(p)
                },
            )
            .collect::<Result<Vec<_>, _>>()?;

        let nf = n_stat as f64;
        let mut block_eff = vec![Complex64::new(0.0, 0.0); k * l];
        let mut block_energy = vec![0.0; k * l];
        for p in &partials {
            for idx in 0..k * l {
                block_eff[idx] += p.z[idx];
                block_energy[idx] += p.e[idx];
            }
        }
        for idx in 0..k * l {
            block_eff[idx] /= Complex64::new(nf, 0.0);
            block_energy[idx] /= nf;
        }
        let mean_eff_channel: Vec<Complex64> =
            (0..k).map(|i| block_eff[i * l..(i + 1) * l].iter().sum()).collect();
        let mean_combiner_energy: Vec<f64> =
            (0..k).map(|i| block_energy[i * l..(i + 1) * l].iter().sum()).collect();

        // Second pass (downlink only): moments of the normalized precoded
        // channel xi = sum_l h_il^H u_il / sqrt(E||u_il||^2).
        let precoded = if self.cfg.direction == Direction::Downlink {
            let inv_sqrt_e: Vec<f64> = block_energy
                .iter()
                .map(|&e| if e > 0.0 { 1.0 / e.sqrt() } else { 0.0 })
                .collect();
            struct XiPartial {
                sum: Vec<Complex64>,
                sum2: Vec<f64>,
            }
            let partials: Vec<XiPartial> = (0..num_chunks)
                .into_par_iter()
                .map_init(
                    || self.workspace(),
                    |ws, c| -> Result<XiPartial, SimError> {
                        let mut p = XiPartial {
                            sum: vec![Complex64::new(0.0, 0.0); k],
                            sum2: vec![0.0; k],
                        };
                        for r in c * CHUNK..((c + 1) * CHUNK).min(n_stat) {
                            let mut rng = rng_stream(seed, task::stats(placement_idx, r));
                            self.realize(ws, &mut rng)?;
                            let u = ws.u.as_slice();
                            let h = ws.h.as_slice();
                            let rows = l * m;
                            for i in 0..k {
                                let mut xi = Complex64::new(0.0, 0.0);
                                for ap in 0..l {
                                    let lo = i * rows + ap * m;
                                    let z = cdot(&u[lo..lo + m], &h[lo..lo + m]);
                                    xi += z.conj() * inv_sqrt_e[i * l + ap];
                                }
                                p.sum[i] += xi;
                                p.sum2[i] += xi.norm_sqr();
                            }
                        }
                        Ok(p)
                    },
                )
                .collect::<Result<Vec<_>, _>>()?;
            let mut sum = vec![Complex64::new(0.0, 0.0); k];
            let mut sum2 = vec![0.0; k];
            for p in &partials {
                for i in 0..k {
                    sum[i] += p.sum[i];
                    sum2[i] += p.sum2[i];
                }
            }
            (0..k)
                .map(|i| {
                    let mean = sum[i] / Complex64::new(nf, 0.0);
                    let var = (sum2[i] / nf - mean.norm_sqr()).max(0.0);
                    DlChannelStats { mean, var }
                })
                .collect()
        } else {
            vec![DlChannelStats { mean: Complex64::new(0.0, 0.0), var: 0.0 }; k]
        };

        Ok(LinkStatistics {
            mean_eff_channel,
            mean_combiner_energy,
            block_eff,
            block_energy,
            precoded,
            n_stat,
        })
    }
}

/// Builds all UEs' combiners for the given estimates into `u`.
#[allow(clippy::too_many_arguments)]
fn combine_into(
    cfg: &ScenarioConfig,
    h_hat: &DMatrix<Complex64>,
    base: &CombinerBase,
    serving: Option<&[usize]>,
    served_by: Option<&[Vec<usize>]>,
    t: &mut DMatrix<Complex64>,
    gram: &mut DMatrix<Complex64>,
    a_local: &mut DMatrix<Complex64>,
    x_local: &mut DMatrix<Complex64>,
    u: &mut DMatrix<Complex64>,
) -> Result<(), SimError> {
    let (k, l, m) = (cfg.num_ues, cfg.num_aps, cfg.antennas_per_ap);
    let one = Complex64::new(1.0, 0.0);
    let rho = Complex64::new(cfg.rho_ul, 0.0);
    match (cfg.architecture, cfg.combiner) {
        (Architecture::CellFreeCentralized, CombinerScheme::Mmse) => {
            mmse_combiner_centralized_into(base, h_hat, cfg.rho_ul, t, gram, u)?;
        }
        (Architecture::CellFreeCentralized, CombinerScheme::Mr)
        | (Architecture::CellFreeDistributed, CombinerScheme::Mr) => {
            // MR is the estimate itself; per-AP blocks stack to the same
            // collective vector, so centralized and distributed coincide.
            u.copy_from(h_hat);
        }
        (Architecture::CellFreeDistributed, CombinerScheme::Mmse) => {
            for ap in 0..l {
                let h_l = h_hat.view((ap * m, 0), (m, k));
                a_local.copy_from(base.dense_block(ap));
                for i in 0..k {
                    a_local.gerc(rho, &h_l.column(i), &h_l.column(i), one);
                }
                let chol = nalgebra::Cholesky::new(a_local.clone())
                    .ok_or(SimError::SingularSystem("local MMSE matrix"))?;
                x_local.copy_from(&h_l);
                chol.solve_mut(x_local);
                let mut u_rows = u.view_mut((ap * m, 0), (m, k));
                u_rows.copy_from(&*x_local);
                u_rows *= rho;
            }
        }
        (Architecture::Cellular, scheme) => {
            let serving = serving.expect("cellular placements carry a serving map");
            let served_by = served_by.expect("cellular placements carry a served-by map");
            u.fill(Complex64::new(0.0, 0.0));
            for ap in 0..l {
                if served_by[ap].is_empty() {
                    continue;
                }
                let h_l = h_hat.view((ap * m, 0), (m, k));
                match scheme {
                    CombinerScheme::Mr => {
                        for &ue in &served_by[ap] {
                            debug_assert_eq!(serving[ue], ap);
                            let mut col = u.column_mut(ue);
                            let mut block = col.rows_mut(ap * m, m);
                            block.copy_from(&h_l.column(ue));
                        }
                    }
                    CombinerScheme::Mmse => {
                        a_local.copy_from(base.dense_block(ap));
                        for i in 0..k {
                            a_local.gerc(rho, &h_l.column(i), &h_l.column(i), one);
                        }
                        let chol = nalgebra::Cholesky::new(a_local.clone())
                            .ok_or(SimError::SingularSystem("cellular MMSE matrix"))?;
                        x_local.copy_from(&h_l);
                        chol.solve_mut(x_local);
                        for &ue in &served_by[ap] {
                            let mut col = u.column_mut(ue);
                            let mut block = col.rows_mut(ap * m, m);
                            block.copy_from(&x_local.column(ue));
                            block *= rho;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Placement-construction helper: combiners with freshly allocated output.
fn combine_all(
    cfg: &ScenarioConfig,
    h_hat: &DMatrix<Complex64>,
    base: &CombinerBase,
    serving: Option<&[usize]>,
    ws: &mut Workspace,
) -> Result<DMatrix<Complex64>, SimError> {
    let served_by = serving.map(|s| {
        let mut by = vec![Vec::new(); cfg.num_aps];
        for (ue, &ap) in s.iter().enumerate() {
            by[ap].push(ue);
        }
        by
    });
    let mut u = DMatrix::zeros(h_hat.nrows(), h_hat.ncols());
    combine_into(
        cfg,
        h_hat,
        base,
        serving,
        served_by.as_deref(),
        &mut ws.t,
        &mut ws.gram,
        &mut ws.a_local,
        &mut ws.x_local,
        &mut u,
    )?;
    Ok(u)
}
