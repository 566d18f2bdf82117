//! Experiment configuration: TOML key-value files whose keys mirror the
//! network-parameter table, plus an optional `[sweep]` section.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cellfree_sim::channel::PathlossModel;
use cellfree_sim::processing::{CombinerScheme, Direction, DlPilotMode, DlPowerNorm};
use cellfree_sim::scenario::{Architecture, ChannelModel, ScenarioConfig, UePlacement};
use cellfree_sim::sim::ExperimentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureKey {
    CellfreeCentralized,
    CellfreeDistributed,
    Cellular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKey {
    Mmse,
    Mr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DlPilotModeKey {
    None,
    Ls,
    Lmmse,
    Genie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossKey {
    Exp367,
    Exp376,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionKey {
    Ul,
    Dl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModelKey {
    Fading,
    Nonfading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UePlacementKey {
    Uniform,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DlPowerNormKey {
    Average,
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKey {
    Saddlepoint,
    Outage,
}

/// Parameter sweep: one scalar key varied over an explicit value list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<f64>,
}

/// One runnable experiment description. Field names are the config-file
/// keys; defaults reproduce the running-example network parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_area")]
    pub area_m: f64,
    #[serde(default = "d_l", rename = "L")]
    pub l: usize,
    #[serde(default = "d_m", rename = "M")]
    pub m: usize,
    #[serde(default = "d_k", rename = "K")]
    pub k: usize,
    #[serde(default = "d_rho_dbm")]
    pub rho_ul_dbm: f64,
    #[serde(default = "d_rho_dbm")]
    pub rho_dl_dbm: f64,
    #[serde(default = "d_noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default = "d_n_total")]
    pub n_total: usize,
    #[serde(default = "d_np")]
    pub np_ul: usize,
    #[serde(default = "d_np")]
    pub np_dl: usize,
    #[serde(default = "d_bits")]
    pub bits: f64,
    #[serde(default = "d_eps_target")]
    pub eps_target: f64,
    #[serde(default = "d_architecture")]
    pub architecture: ArchitectureKey,
    #[serde(default = "d_combiner")]
    pub combiner: CombinerKey,
    #[serde(default = "d_dl_pilot_mode")]
    pub dl_pilot_mode: DlPilotModeKey,
    #[serde(default = "d_pathloss")]
    pub pathloss_model: PathlossKey,
    #[serde(default = "d_delta_deg")]
    pub delta_deg: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_n_placements")]
    pub n_placements: usize,
    #[serde(default = "d_n_fading")]
    pub n_fading: usize,
    #[serde(default = "d_direction")]
    pub direction: DirectionKey,
    #[serde(default = "d_channel_model")]
    pub channel_model: ChannelModelKey,
    #[serde(default = "d_ue_placement")]
    pub ue_placement: UePlacementKey,
    #[serde(default = "d_dl_power_norm")]
    pub dl_power_norm: DlPowerNormKey,
    #[serde(default = "d_n_stat")]
    pub n_stat: usize,
    #[serde(default = "d_ap_height")]
    pub ap_height_m: f64,
    #[serde(default = "d_metric")]
    pub metric: MetricKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn d_area() -> f64 {
    150.0
}
fn d_l() -> usize {
    64
}
fn d_m() -> usize {
    1
}
fn d_k() -> usize {
    40
}
fn d_rho_dbm() -> f64 {
    -10.0
}
fn d_noise_dbm() -> f64 {
    -96.0
}
fn d_n_total() -> usize {
    300
}
fn d_np() -> usize {
    40
}
fn d_bits() -> f64 {
    160.0
}
fn d_eps_target() -> f64 {
    1e-5
}
fn d_architecture() -> ArchitectureKey {
    ArchitectureKey::CellfreeCentralized
}
fn d_combiner() -> CombinerKey {
    CombinerKey::Mmse
}
fn d_dl_pilot_mode() -> DlPilotModeKey {
    DlPilotModeKey::Ls
}
fn d_pathloss() -> PathlossKey {
    PathlossKey::Exp376
}
fn d_delta_deg() -> f64 {
    25.0
}
fn d_seed() -> u64 {
    1
}
fn d_n_placements() -> usize {
    400
}
fn d_n_fading() -> usize {
    5000
}
fn d_direction() -> DirectionKey {
    DirectionKey::Ul
}
fn d_channel_model() -> ChannelModelKey {
    ChannelModelKey::Fading
}
fn d_ue_placement() -> UePlacementKey {
    UePlacementKey::Uniform
}
fn d_dl_power_norm() -> DlPowerNormKey {
    DlPowerNormKey::Average
}
fn d_n_stat() -> usize {
    2000
}
fn d_ap_height() -> f64 {
    10.0
}
fn d_metric() -> MetricKey {
    MetricKey::Saddlepoint
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults are complete")
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("failed to parse experiment config")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies a `key=value` override by splicing it into the TOML document
    /// and re-deserializing, so the same validation (including the list of
    /// valid keys) applies.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).expect("config round-trips");
        let parsed: toml::Value = value
            .parse::<toml::Value>()
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        doc.insert(key.to_string(), parsed);
        let text = toml::to_string(&doc).expect("table serializes");
        toml::from_str(&text).with_context(|| format!("invalid override {key}={value}"))
    }

    /// Sets the swept parameter to `value`. `LM` scales the AP count at
    /// fixed per-AP antennas.
    pub fn apply_sweep_value(&self, param: &str, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let as_count = |v: f64, what: &str| -> Result<usize> {
            if v < 0.0 || v.fract() != 0.0 {
                bail!("sweep value {v} is not a valid {what}");
            }
            Ok(v as usize)
        };
        match param {
            "K" => cfg.k = as_count(value, "UE count")?,
            "L" => cfg.l = as_count(value, "AP count")?,
            "M" => cfg.m = as_count(value, "antenna count")?,
            "LM" => {
                let lm = as_count(value, "total antenna count")?;
                if lm % cfg.m != 0 {
                    bail!("LM = {lm} not divisible by M = {}", cfg.m);
                }
                cfg.l = lm / cfg.m;
            }
            "rho_ul_dbm" => cfg.rho_ul_dbm = value,
            "rho_dl_dbm" => cfg.rho_dl_dbm = value,
            other => bail!(
                "unknown sweep parameter `{other}` (expected K, L, M, LM, rho_ul_dbm, rho_dl_dbm)"
            ),
        }
        Ok(cfg)
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            architecture: match self.architecture {
                ArchitectureKey::CellfreeCentralized => Architecture::CellFreeCentralized,
                ArchitectureKey::CellfreeDistributed => Architecture::CellFreeDistributed,
                ArchitectureKey::Cellular => Architecture::Cellular,
            },
            num_aps: self.l,
            antennas_per_ap: self.m,
            num_ues: self.k,
            area_m: self.area_m,
            ap_height_m: self.ap_height_m,
            pathloss: match self.pathloss_model {
                PathlossKey::Exp367 => PathlossModel::Exp367,
                PathlossKey::Exp376 => PathlossModel::Exp376,
            },
            delta_rad: self.delta_deg.to_radians(),
            rho_ul: dbm_to_watt(self.rho_ul_dbm),
            rho_dl: dbm_to_watt(self.rho_dl_dbm),
            sigma2_ul: dbm_to_watt(self.noise_dbm),
            sigma2_dl: dbm_to_watt(self.noise_dbm),
            n_total: self.n_total,
            np_ul: if self.channel_model == ChannelModelKey::Nonfading { 0 } else { self.np_ul },
            np_dl: if self.channel_model == ChannelModelKey::Nonfading { 0 } else { self.np_dl },
            bits: self.bits,
            combiner: match self.combiner {
                CombinerKey::Mmse => CombinerScheme::Mmse,
                CombinerKey::Mr => CombinerScheme::Mr,
            },
            direction: match self.direction {
                DirectionKey::Ul => Direction::Uplink,
                DirectionKey::Dl => Direction::Downlink,
            },
            dl_pilot_mode: match self.dl_pilot_mode {
                DlPilotModeKey::None => DlPilotMode::None,
                DlPilotModeKey::Ls => DlPilotMode::Ls,
                DlPilotModeKey::Lmmse => DlPilotMode::Lmmse,
                DlPilotModeKey::Genie => DlPilotMode::Genie,
            },
            dl_power_norm: match self.dl_power_norm {
                DlPowerNormKey::Average => DlPowerNorm::Average,
                DlPowerNormKey::Instantaneous => DlPowerNorm::Instantaneous,
            },
            channel_model: match self.channel_model {
                ChannelModelKey::Fading => ChannelModel::CorrelatedRayleigh,
                ChannelModelKey::Nonfading => ChannelModel::Nonfading,
            },
            ue_placement: match self.ue_placement {
                UePlacementKey::Uniform => UePlacement::Uniform,
                UePlacementKey::Center => UePlacement::Center,
            },
            n_stat: self.n_stat,
        }
    }

    pub fn experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            scenario: self.scenario(),
            n_placements: self.n_placements,
            n_fading: self.n_fading,
            eps_target: self.eps_target,
            seed: self.seed,
        }
    }
}
