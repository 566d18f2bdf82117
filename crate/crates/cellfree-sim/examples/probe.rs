use cellfree_sim::channel::PathlossModel;
use cellfree_sim::processing::{CombinerScheme, Direction, DlPilotMode, DlPowerNorm};
use cellfree_sim::scenario::*;
use cellfree_sim::sim::*;
fn dbm(v: f64) -> f64 { 10f64.powf((v - 30.0) / 10.0) }
fn main() {
    let l = 144usize;
    let cfg = ScenarioConfig {
        architecture: Architecture::CellFreeCentralized, num_aps: l, antennas_per_ap: 1, num_ues: 1,
        area_m: 150.0, ap_height_m: 10.0,
        pathloss: PathlossModel::Exp376, delta_rad: 25f64.to_radians(),
        rho_ul: dbm(-10.0), rho_dl: dbm(-10.0),
        sigma2_ul: dbm(-96.0), sigma2_dl: dbm(-96.0),
        n_total: 300, np_ul: 40, np_dl: 0, bits: 160.0,
        combiner: CombinerScheme::Mr, direction: Direction::Downlink,
        dl_pilot_mode: DlPilotMode::None, dl_power_norm: DlPowerNorm::Average,
        channel_model: ChannelModel::CorrelatedRayleigh, ue_placement: UePlacement::Center,
        n_stat: 2000,
    };
    let placement = Placement::build(&cfg, 11, 0).unwrap();
    let mut ws = placement.workspace();
    let n = 3000;
    let mut worst: Vec<(f64, f64, f64, f64)> = vec![];
    let mut sum = num_complex::Complex64::new(0.0, 0.0);
    let mut sum2 = 0.0;
    for r in 0..n {
        let mut rng = rng_stream(11, task::fading(0, r));
        let link = placement.simulate_link(&mut ws, 0, &mut rng).unwrap();
        let le = link_log_eps(&link, cfg.data_len(), cfg.rate_nats());
        sum += link.g; sum2 += link.g.norm_sqr();
        worst.push((le, link.g.norm(), link.g_hat.norm(), (link.g - link.g_hat).norm() / link.g_hat.norm()));
    }
    let mean = sum / num_complex::Complex64::new(n as f64, 0.0);
    let var = sum2 / n as f64 - mean.norm_sqr();
    println!("empirical |E g| = {:.3e}, rel std = {:.3}", mean.norm(), var.sqrt() / mean.norm());
    worst.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    println!("worst realizations (log_eps, |g|, |ghat|, rel mismatch):");
    for w in worst.iter().take(8) { println!("  {:8.3} |g|={:.3e} |ghat|={:.3e} m={:.3}", w.0, w.1, w.2, w.3); }
    let lse = { let hi = worst.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
        hi + (worst.iter().map(|w| (w.0 - hi).exp()).sum::<f64>() / n as f64).ln() };
    println!("placement log10 eps = {:.3}", lse / std::f64::consts::LN_10);
}
