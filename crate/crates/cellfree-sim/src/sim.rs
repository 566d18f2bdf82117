//! The Monte-Carlo engine: per-placement fading averages, network
//! availability over placements, the infinite-blocklength outage
//! comparator, and the counter-based RNG streams everything draws from.
//!
//! Determinism contract: results are a pure function of (spec, seed). Each
//! (placement, task kind, index) triple owns an RNG stream, per-realization
//! values are collected in index order, and reductions run sequentially
//! over that order, so worker count and scheduling cannot change a single
//! bit of the output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::SimError;
use crate::processing::EffectiveLink;
use crate::scenario::{ChannelModel, Placement, ScenarioConfig};

/// Structured task identifiers for stream derivation.
///
/// Layout: bits 60..63 = task kind, 32..59 = placement index,
/// 0..31 = per-task counter.
pub mod task {
    const KIND_SHIFT: u32 = 60;
    const PLACEMENT_SHIFT: u32 = 32;

    fn compose(kind: u64, placement: usize, index: usize) -> u64 {
        debug_assert!(placement < (1 << 28));
        debug_assert!(index < (1 << 32));
        (kind << KIND_SHIFT) | ((placement as u64) << PLACEMENT_SHIFT) | index as u64
    }

    /// UE-drop stream of a placement.
    pub fn topology(placement: usize) -> u64 {
        compose(1, placement, 0)
    }

    /// Probe-UE selection stream of a placement.
    pub fn probe(placement: usize) -> u64 {
        compose(2, placement, 0)
    }

    /// Statistics realization `index` of a placement.
    pub fn stats(placement: usize, index: usize) -> u64 {
        compose(3, placement, index)
    }

    /// Fading realization `index` of a placement.
    pub fn fading(placement: usize, index: usize) -> u64 {
        compose(4, placement, index)
    }
}

/// Counter-derived RNG stream: identical `(seed, task_id)` gives an
/// identical stream; distinct task ids give statistically independent ones.
pub fn rng_stream(seed: u64, task_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task_id);
    rng
}

/// A full experiment: scenario plus Monte-Carlo sizes and the seed.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub n_placements: usize,
    pub n_fading: usize,
    pub eps_target: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        self.scenario.validate()?;
        if self.n_placements == 0 || self.n_fading == 0 {
            return Err(SimError::InvalidConfig(
                "n_placements and n_fading must be >= 1".into(),
            ));
        }
        if !(self.eps_target > 0.0 && self.eps_target <= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "eps_target must be in (0, 1], got {}",
                self.eps_target
            )));
        }
        Ok(())
    }
}

/// Availability over random placements plus per-placement detail.
#[derive(Debug, Clone)]
pub struct AvailabilityResult {
    /// Fraction of placements with error probability at or below target.
    pub eta: f64,
    /// 95% Wilson interval for `eta`.
    pub wilson_ci_95: (f64, f64),
    /// Natural log of each placement's fading-averaged error probability.
    pub per_placement_log_eps: Vec<f64>,
    /// Mean over placements of `log10(eps)`.
    pub mean_log10_eps: f64,
    pub n_placements: usize,
    pub n_fading: usize,
    pub seed: u64,
    pub elapsed_secs: f64,
}

/// Per-placement output of [`per_placement_eps`].
#[derive(Debug, Clone)]
pub struct PlacementEps {
    /// `(ue, ln eps)` for each probed UE.
    pub per_ue_log_eps: Vec<(usize, f64)>,
    /// Worst (largest) log eps over the probed UEs.
    pub max_log_eps: f64,
}

/// Error probability of one effective link: saddlepoint approximation with
/// the decoding metric optimized per realization. Links the bound cannot
/// describe (zero effective noise from a null combiner, non-finite values)
/// count as certain error.
pub fn link_log_eps(link: &EffectiveLink, n_data: usize, rate_nats: f64) -> f64 {
    match fbl_core::optimize_s(link.g, link.g_hat, link.rho, link.sigma2_eff, n_data as u32, rate_nats)
    {
        Ok((_, result)) => result.log_eps,
        Err(_) => 0.0,
    }
}

/// Infinite-blocklength outage indicator of one effective link (perfect
/// receiver CSI): `ln(1 + rho |g|^2 / sigma2) < R`.
pub fn link_outage(link: &EffectiveLink, rate_nats: f64) -> bool {
    let sinr = link.rho * link.g.norm_sqr() / link.sigma2_eff;
    !(sinr.is_finite() && (1.0 + sinr).ln() >= rate_nats)
}

/// Log-sum-exp average in the linear epsilon domain: `ln(mean(exp(x)))`.
fn log_mean_exp(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - hi).exp()).sum();
    hi + (sum / values.len() as f64).ln()
}

/// Fading-averaged error probability (natural log) for the probed UEs of
/// one placement. Averaging happens in the linear domain via log-sum-exp;
/// nonfading placements evaluate their deterministic link once.
pub fn per_placement_eps(
    placement: &Placement,
    probe_ues: &[usize],
    n_fading: usize,
    seed: u64,
    placement_idx: usize,
) -> Result<PlacementEps, SimError> {
    let cfg = &placement.cfg;
    let n_data = cfg.data_len();
    let rate = cfg.rate_nats();

    if placement.is_nonfading() {
        let per_ue: Vec<(usize, f64)> = probe_ues
            .iter()
            .map(|&ue| {
                let link = placement.nonfading_link(ue).expect("probe UE index in range");
                (ue, link_log_eps(link, n_data, rate))
            })
            .collect();
        let max = per_ue.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
        return Ok(PlacementEps { per_ue_log_eps: per_ue, max_log_eps: max });
    }

    // realization-major collection keeps the reduction order fixed
    let per_real: Vec<Vec<f64>> = (0..n_fading)
        .into_par_iter()
        .map_init(
            || placement.workspace(),
            |ws, r| -> Result<Vec<f64>, SimError> {
                let mut rng = rng_stream(seed, task::fading(placement_idx, r));
                let mut vals = Vec::with_capacity(probe_ues.len());
                for (slot, &ue) in probe_ues.iter().enumerate() {
                    let link = if slot == 0 {
                        placement.simulate_link(ws, ue, &mut rng)?
                    } else {
                        // further probes reuse the realized network state
                        placement.resample_link(ws, ue, &mut rng)?
                    };
                    vals.push(link_log_eps(&link, n_data, rate));
                }
                Ok(vals)
            },
        )
        .collect::<Result<Vec<_>, _>>()?;

    let per_ue: Vec<(usize, f64)> = probe_ues
        .iter()
        .enumerate()
        .map(|(slot, &ue)| {
            let vals: Vec<f64> = per_real.iter().map(|r| r[slot]).collect();
            (ue, log_mean_exp(&vals))
        })
        .collect();
    let max = per_ue.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    Ok(PlacementEps { per_ue_log_eps: per_ue, max_log_eps: max })
}

fn availability_from_logs(
    per_placement: Vec<f64>,
    spec: &ExperimentSpec,
    t0: std::time::Instant,
) -> AvailabilityResult {
    let ln_target = spec.eps_target.ln();
    let hits = per_placement.iter().filter(|&&v| v <= ln_target).count() as u64;
    let n = per_placement.len() as u64;
    let eta = hits as f64 / n as f64;
    let wilson = fbl_core::wilson_ci_95(hits, n);
    let mean_log10 = per_placement
        .iter()
        .map(|v| (v / std::f64::consts::LN_10).max(-300.0))
        .sum::<f64>()
        / per_placement.len() as f64;
    AvailabilityResult {
        eta,
        wilson_ci_95: wilson,
        per_placement_log_eps: per_placement,
        mean_log10_eps: mean_log10,
        n_placements: spec.n_placements,
        n_fading: spec.n_fading,
        seed: spec.seed,
        elapsed_secs: t0.elapsed().as_secs_f64(),
    }
}

/// Network availability: drops `n_placements` independent UE sets, averages
/// the error probability of one uniformly chosen probe UE per placement
/// over the small-scale fading, and counts placements meeting the target.
pub fn network_availability(spec: &ExperimentSpec) -> Result<AvailabilityResult, SimError> {
    spec.validate()?;
    let t0 = std::time::Instant::now();
    let per_placement: Vec<f64> = (0..spec.n_placements)
        .into_par_iter()
        .map(|p| -> Result<f64, SimError> {
            let placement = Placement::build(&spec.scenario, spec.seed, p)?;
            let probe = placement.draw_probe(spec.seed, p);
            let eps = per_placement_eps(&placement, &[probe], spec.n_fading, spec.seed, p)?;
            Ok(eps.max_log_eps)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(availability_from_logs(per_placement, spec, t0))
}

/// Availability under the infinite-blocklength outage metric on the same
/// pipeline: per placement, the probability over fading that
/// `ln(1 + SINR) < R` for the perfect-CSI effective link.
pub fn outage_availability(spec: &ExperimentSpec) -> Result<AvailabilityResult, SimError> {
    spec.validate()?;
    if spec.scenario.channel_model == ChannelModel::Nonfading {
        return Err(SimError::InvalidConfig(
            "outage availability is defined for fading scenarios".into(),
        ));
    }
    let t0 = std::time::Instant::now();
    let rate = spec.scenario.rate_nats();
    let per_placement: Vec<f64> = (0..spec.n_placements)
        .into_par_iter()
        .map(|p| -> Result<f64, SimError> {
            let placement = Placement::build(&spec.scenario, spec.seed, p)?;
            let probe = placement.draw_probe(spec.seed, p);
            let outages: u64 = (0..spec.n_fading)
                .into_par_iter()
                .map_init(
                    || placement.workspace(),
                    |ws, r| -> Result<u64, SimError> {
                        let mut rng = rng_stream(spec.seed, task::fading(p, r));
                        let link = placement.simulate_link_genie(ws, probe, &mut rng)?;
                        Ok(link_outage(&link, rate) as u64)
                    },
                )
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            let prob = outages as f64 / spec.n_fading as f64;
            Ok(if prob == 0.0 { f64::NEG_INFINITY } else { prob.ln() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(availability_from_logs(per_placement, spec, t0))
}
