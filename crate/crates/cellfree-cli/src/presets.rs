//! Named experiment presets: availability sweeps at desk scale.
//!
//! Each preset expands to one or more variants (architecture / combiner /
//! pilot-mode combinations) sharing a sweep axis; every variant is a fully
//! resolved, re-runnable configuration.

use anyhow::{bail, Result};

use crate::config::{
    ArchitectureKey, ChannelModelKey, CombinerKey, DirectionKey, DlPilotModeKey, MetricKey,
    PathlossKey, RunConfig, SweepSection, UePlacementKey,
};

/// One fully resolved member of a preset.
#[derive(Debug, Clone)]
pub struct PresetVariant {
    pub name: String,
    pub config: RunConfig,
}

pub const PRESET_NAMES: &[&str] = &[
    "nonfading-3way",
    "ul-antenna-sweep",
    "ul-power-sweep",
    "dl-hardening-single-ue",
    "dl-antenna-sweep",
    "dl-power-sweep",
    "outage-comparison",
];

fn sweep(param: &str, values: Vec<f64>) -> Option<SweepSection> {
    Some(SweepSection { param: param.into(), values })
}

fn power_grid() -> Vec<f64> {
    (-8..=8).map(|i| 2.5 * i as f64).collect() // -20..20 dBm
}

fn lm_grid() -> Vec<f64> {
    vec![64.0, 100.0, 144.0, 196.0, 256.0]
}

fn grid_squares_up_to(max: usize) -> Vec<f64> {
    (1..).map(|s| s * s).take_while(|&l| l <= max).map(|l| l as f64).collect()
}

/// Expands a preset name into its variants. `sweep_param` selects between
/// the sweep axes a preset supports (each has a default).
pub fn expand(name: &str, sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    match name {
        "nonfading-3way" => nonfading_3way(sweep_param),
        "ul-antenna-sweep" => ul_antenna_sweep(sweep_param),
        "ul-power-sweep" => ul_power_sweep(sweep_param),
        "dl-hardening-single-ue" => dl_hardening(sweep_param),
        "dl-antenna-sweep" => dl_antenna_sweep(sweep_param),
        "dl-power-sweep" => dl_power_sweep(sweep_param),
        "outage-comparison" => outage_comparison(sweep_param),
        other => bail!(
            "unknown preset `{other}`; available presets: {}",
            PRESET_NAMES.join(", ")
        ),
    }
}

/// Nonfading three-architecture comparison (availability vs K, or vs
/// transmit power with `--sweep rho_ul_dbm`).
fn nonfading_3way(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    let mut base = RunConfig {
        channel_model: ChannelModelKey::Nonfading,
        n_total: 100,
        np_ul: 0,
        np_dl: 0,
        bits: 60.0,
        pathloss_model: PathlossKey::Exp367,
        rho_ul_dbm: -10.0,
        n_placements: 400,
        n_fading: 1,
        ..RunConfig::default()
    };
    match sweep_param.unwrap_or("K") {
        "K" => {
            base.sweep = sweep("K", vec![1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        }
        "rho_ul_dbm" => {
            base.k = 10;
            base.sweep = sweep("rho_ul_dbm", power_grid());
        }
        other => bail!("nonfading-3way sweeps K or rho_ul_dbm, not `{other}`"),
    }
    let mut out = Vec::new();
    for (comb_name, comb) in [("mmse", CombinerKey::Mmse), ("mr", CombinerKey::Mr)] {
        for (arch_name, arch, l, m) in [
            ("cellfree", ArchitectureKey::CellfreeCentralized, 64, 1),
            ("smallcells", ArchitectureKey::Cellular, 64, 1),
            ("massive-mimo", ArchitectureKey::Cellular, 1, 64),
        ] {
            let mut cfg = base.clone();
            cfg.combiner = comb;
            cfg.architecture = arch;
            cfg.l = l;
            cfg.m = m;
            out.push(PresetVariant { name: format!("{arch_name}-{comb_name}"), config: cfg });
        }
    }
    Ok(out)
}

fn fading_base() -> RunConfig {
    RunConfig { n_placements: 50, n_fading: 500, ..RunConfig::default() }
}

/// UL availability vs total antenna count `LM`.
fn ul_antenna_sweep(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    if let Some(p) = sweep_param {
        if p != "LM" {
            bail!("ul-antenna-sweep sweeps LM only");
        }
    }
    let base = fading_base();
    let mut out = Vec::new();
    for (name, arch, m) in [
        ("cf-centralized-m1", ArchitectureKey::CellfreeCentralized, 1),
        ("cellular-l1", ArchitectureKey::Cellular, 0), // M = LM
        ("cellular-l4", ArchitectureKey::Cellular, 0), // M = LM/4
        ("cf-distributed-l16", ArchitectureKey::CellfreeDistributed, 0), // M = LM/16
    ] {
        let mut cfg = base.clone();
        cfg.architecture = arch;
        match name {
            "cf-centralized-m1" => {
                cfg.m = m.max(1);
                cfg.sweep = sweep("LM", lm_grid());
            }
            "cellular-l1" => {
                cfg.l = 1;
                cfg.m = 1;
                // sweep M directly: LM = M when L = 1
                cfg.sweep = sweep("M", lm_grid());
            }
            "cellular-l4" => {
                cfg.l = 4;
                cfg.m = 16;
                cfg.sweep = sweep("M", lm_grid().iter().map(|v| v / 4.0).collect());
            }
            _ => {
                cfg.l = 16;
                cfg.m = 4;
                cfg.sweep = sweep("M", vec![4.0, 9.0, 16.0]); // LM = 64, 144, 256
            }
        }
        out.push(PresetVariant { name: name.into(), config: cfg });
    }
    Ok(out)
}

fn power_sweep_variants(direction: DirectionKey, dl_pilots: bool) -> Vec<PresetVariant> {
    let param = match direction {
        DirectionKey::Ul => "rho_ul_dbm",
        DirectionKey::Dl => "rho_dl_dbm",
    };
    let mut base = fading_base();
    base.direction = direction;
    if direction == DirectionKey::Dl && !dl_pilots {
        base.np_dl = 0;
        base.dl_pilot_mode = DlPilotModeKey::None;
    }
    base.sweep = sweep(param, power_grid());
    let mut out = Vec::new();
    for (name, arch, l, m) in [
        ("cf-centralized-l100", ArchitectureKey::CellfreeCentralized, 100, 1),
        ("cf-centralized-l25-m4", ArchitectureKey::CellfreeCentralized, 25, 4),
        ("cellular-l1", ArchitectureKey::Cellular, 1, 100),
        ("cellular-l4", ArchitectureKey::Cellular, 4, 25),
        ("cf-distributed-l25-m4", ArchitectureKey::CellfreeDistributed, 25, 4),
    ] {
        let mut cfg = base.clone();
        cfg.architecture = arch;
        cfg.l = l;
        cfg.m = m;
        let suffix = if direction == DirectionKey::Dl && !dl_pilots { "-nopilots" } else { "" };
        out.push(PresetVariant { name: format!("{name}{suffix}"), config: cfg });
    }
    out
}

/// UL availability vs transmit power at `LM = 100`.
fn ul_power_sweep(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    if let Some(p) = sweep_param {
        if p != "rho_ul_dbm" {
            bail!("ul-power-sweep sweeps rho_ul_dbm only");
        }
    }
    Ok(power_sweep_variants(DirectionKey::Ul, true))
}

/// Single centered UE: DL error probability vs AP count, with LS pilots,
/// without pilots, and with genie CSI.
fn dl_hardening(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    if let Some(p) = sweep_param {
        if p != "L" {
            bail!("dl-hardening-single-ue sweeps L only");
        }
    }
    let base = RunConfig {
        direction: DirectionKey::Dl,
        architecture: ArchitectureKey::CellfreeCentralized,
        combiner: CombinerKey::Mr,
        k: 1,
        m: 1,
        ue_placement: UePlacementKey::Center,
        n_placements: 1,
        n_fading: 10_000,
        sweep: sweep("L", grid_squares_up_to(196)),
        ..RunConfig::default()
    };
    let mut with_pilots = base.clone();
    with_pilots.dl_pilot_mode = DlPilotModeKey::Ls;
    with_pilots.np_dl = 40;
    let mut no_pilots = base.clone();
    no_pilots.dl_pilot_mode = DlPilotModeKey::None;
    no_pilots.np_dl = 0;
    let mut genie = base;
    genie.dl_pilot_mode = DlPilotModeKey::Genie;
    genie.np_dl = 0;
    Ok(vec![
        PresetVariant { name: "ls-pilots".into(), config: with_pilots },
        PresetVariant { name: "no-pilots".into(), config: no_pilots },
        PresetVariant { name: "genie".into(), config: genie },
    ])
}

/// DL availability vs total antenna count, with and without DL pilots.
fn dl_antenna_sweep(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    let mut out = Vec::new();
    for with_pilots in [true, false] {
        for mut v in ul_antenna_sweep(sweep_param)? {
            v.config.direction = DirectionKey::Dl;
            if with_pilots {
                v.config.dl_pilot_mode = DlPilotModeKey::Ls;
                v.config.np_dl = 40;
            } else {
                v.config.dl_pilot_mode = DlPilotModeKey::None;
                v.config.np_dl = 0;
                v.name.push_str("-nopilots");
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// DL availability vs transmit power at `LM = 100`.
fn dl_power_sweep(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    if let Some(p) = sweep_param {
        if p != "rho_dl_dbm" {
            bail!("dl-power-sweep sweeps rho_dl_dbm only");
        }
    }
    let mut out = power_sweep_variants(DirectionKey::Dl, true);
    out.extend(power_sweep_variants(DirectionKey::Dl, false));
    Ok(out)
}

/// Outage-metric counterpart of the DL antenna sweep (with pilots): the
/// same points evaluated with both metrics.
fn outage_comparison(sweep_param: Option<&str>) -> Result<Vec<PresetVariant>> {
    let mut out = Vec::new();
    for v in dl_antenna_sweep(sweep_param)? {
        if v.name.ends_with("-nopilots") {
            continue;
        }
        let mut fbl = v.clone();
        fbl.name = format!("fbl-{}", v.name);
        out.push(fbl);
        let mut outage = v;
        outage.config.metric = MetricKey::Outage;
        outage.name = format!("outage-{}", outage.name);
        out.push(outage);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_expands_and_validates() {
        for name in PRESET_NAMES {
            let variants = expand(name, None).unwrap();
            assert!(!variants.is_empty(), "{name} is empty");
            for v in variants {
                let sweep = v.config.sweep.clone().expect("presets define a sweep");
                for &value in &sweep.values {
                    let cfg = v.config.apply_sweep_value(&sweep.param, value).unwrap();
                    cfg.experiment()
                        .validate()
                        .unwrap_or_else(|e| panic!("{name}/{}@{value}: {e}", v.name));
                }
            }
        }
    }

    #[test]
    fn unknown_preset_lists_catalog() {
        let err = expand("does-not-exist", None).unwrap_err().to_string();
        assert!(err.contains("nonfading-3way"));
    }
}
