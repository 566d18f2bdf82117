//! Experiment runner for the cell-free finite-blocklength availability
//! simulator: named presets or TOML configs in, CSV sweep data plus a
//! re-runnable manifest out.

mod config;
mod output;
mod presets;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cellfree_sim::sim::{network_availability, outage_availability, AvailabilityResult};
use config::{ChannelModelKey, MetricKey, RunConfig};
use output::CsvWriter;
use presets::PresetVariant;

#[derive(Parser)]
#[command(
    name = "cellfree",
    about = "Finite-blocklength availability sweeps for cellular, small-cell, and cell-free networks",
    long_about = None,
    after_help = "Worker threads honor the RAYON_NUM_THREADS environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset or a TOML experiment config and write CSV sweeps.
    Run {
        /// Preset name (see `--help` output of a bad name for the catalog)
        /// or path to a .toml config / manifest.
        target: String,
        /// Sweep axis for presets that support more than one.
        #[arg(long)]
        sweep: Option<String>,
        /// Experiment seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV files and manifests.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Placement-count override.
        #[arg(long)]
        placements: Option<usize>,
        /// Fading-realization-count override.
        #[arg(long)]
        fading: Option<usize>,
        /// Additional key=value config overrides (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config file and print the resolved parameter summary.
    Validate {
        /// Path to a .toml experiment config.
        config: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { target, sweep, seed, out, placements, fading, overrides } => {
            match run(&target, sweep.as_deref(), seed, &out, placements, fading, &overrides) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    1
                }
            }
        }
        Command::Validate { config } => match validate(&config) {
            Ok(valid) => {
                if valid {
                    0
                } else {
                    2
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                2
            }
        },
    };
    std::process::exit(code);
}

fn load_variants(target: &str, sweep: Option<&str>) -> Result<(String, Vec<PresetVariant>)> {
    let path = Path::new(target);
    if path.extension().map_or(false, |e| e == "toml") || path.exists() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config = RunConfig::from_toml(&text)?;
        anyhow::ensure!(
            sweep.is_none(),
            "--sweep applies to presets; config files carry their own [sweep] section"
        );
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        // strip a manifest suffix so reruns overwrite the original outputs
        let stem = stem.strip_suffix(".manifest").unwrap_or(&stem).to_string();
        Ok((stem.clone(), vec![PresetVariant { name: stem, config }]))
    } else {
        Ok((target.to_string(), presets::expand(target, sweep)?))
    }
}

fn run_experiment(config: &RunConfig) -> Result<AvailabilityResult> {
    let spec = config.experiment();
    let result = match config.metric {
        MetricKey::Saddlepoint => network_availability(&spec)?,
        MetricKey::Outage => outage_availability(&spec)?,
    };
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn run(
    target: &str,
    sweep: Option<&str>,
    seed: Option<u64>,
    out_dir: &Path,
    placements: Option<usize>,
    fading: Option<usize>,
    overrides: &[String],
) -> Result<()> {
    let (run_name, variants) = load_variants(target, sweep)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;

    for variant in variants {
        let mut config = variant.config.clone();
        if let Some(s) = seed {
            config.seed = s;
        }
        if let Some(p) = placements {
            config.n_placements = p;
        }
        if let Some(f) = fading {
            config.n_fading = f;
        }
        for kv in overrides {
            let (key, value) = kv
                .split_once('=')
                .with_context(|| format!("override `{kv}` is not of the form key=value"))?;
            config = config.with_override(key, value)?;
        }

        let file_base = if variant.name == run_name {
            run_name.clone()
        } else {
            format!("{run_name}__{}", variant.name)
        };
        let manifest_path = out_dir.join(format!("{file_base}.manifest.toml"));
        fs::write(&manifest_path, config.to_toml())
            .with_context(|| format!("cannot write {}", manifest_path.display()))?;

        let sweep_section = config.sweep.clone();
        let mut csv = CsvWriter::new();
        match &sweep_section {
            Some(sw) => {
                for &value in &sw.values {
                    let point = config.apply_sweep_value(&sw.param, value)?;
                    let result = run_experiment(&point)?;
                    eprintln!(
                        "{file_base}: {} = {value}: eta = {:.4} (mean log10 eps {:.2}) [{:.1} s]",
                        sw.param, result.eta, result.mean_log10_eps, result.elapsed_secs
                    );
                    csv.push_row(&sw.param, value, &result);
                }
            }
            None => {
                let result = run_experiment(&config)?;
                eprintln!(
                    "{file_base}: eta = {:.4} (mean log10 eps {:.2}) [{:.1} s]",
                    result.eta, result.mean_log10_eps, result.elapsed_secs
                );
                csv.push_row("none", 0.0, &result);
            }
        }
        let csv_path = out_dir.join(format!("{file_base}.csv"));
        fs::write(&csv_path, csv.finish())
            .with_context(|| format!("cannot write {}", csv_path.display()))?;
        println!("{}", csv_path.display());
    }
    Ok(())
}

fn validate(path: &Path) -> Result<bool> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let config = match RunConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            println!("invalid: {e:#}");
            return Ok(false);
        }
    };
    let spec = config.experiment();
    match spec.validate() {
        Ok(()) => {
            println!("valid");
            print_summary(&config);
            Ok(true)
        }
        Err(e) => {
            println!("invalid: {e}");
            print_summary(&config);
            Ok(false)
        }
    }
}

fn print_summary(c: &RunConfig) {
    let scenario = c.scenario();
    println!("  area:              {} m x {} m", c.area_m, c.area_m);
    println!("  APs (L) x antennas (M): {} x {}", c.l, c.m);
    println!("  UEs (K):           {}", c.k);
    println!("  architecture:      {:?}", c.architecture);
    println!("  combiner:          {:?}", c.combiner);
    println!("  direction:         {:?}", c.direction);
    println!("  channel model:     {:?}", c.channel_model);
    println!("  noise power:       {} dBm", c.noise_dbm);
    println!("  UL/DL tx power:    {} / {} dBm", c.rho_ul_dbm, c.rho_dl_dbm);
    println!("  channel uses:      n = {}", c.n_total);
    if c.channel_model == ChannelModelKey::Fading {
        println!("  UL half:           {} ({} pilots + {} data)", c.n_total / 2, c.np_ul,
            c.n_total / 2 - c.np_ul);
        println!("  DL half:           {} ({} pilots + {} data)", c.n_total / 2, c.np_dl,
            c.n_total / 2 - c.np_dl);
    }
    println!("  information bits:  b = {}", c.bits);
    println!("  rate:              {:.4} nats/use over {} data uses", scenario.rate_nats(),
        scenario.data_len());
    println!("  eps target:        {:e}", c.eps_target);
    println!("  placements/fading: {} / {}", c.n_placements, c.n_fading);
    println!("  seed:              {}", c.seed);
    if let Some(sw) = &c.sweep {
        println!("  sweep:             {} over {:?}", sw.param, sw.values);
    }
}
