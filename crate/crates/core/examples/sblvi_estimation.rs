// Estimate a fractional-Doppler channel from an embedded pilot with the
// variational estimator and the two baselines.
//
// `cargo run --example sblvi_estimation`

use std::path::Path;

use maotfs::channel::{apply_channel_noisy, sample_environment, ChannelConfig};
use maotfs::estimation::{embed_pilot, nmse_db, true_dd_response, EstimatorKind, PilotConfig, SblviConfig};
use maotfs::otfs::{otfs_demodulate, otfs_modulate, random_qpsk_frame};
use maotfs::{seeded_rng, Result};

pub fn run(_out: &Path) -> Result<()> {
    let (m, n) = (64, 64);
    let snr_db = 15.0;
    let noise = 10f64.powf(-snr_db / 10.0);
    let cfg = ChannelConfig { num_paths: 4, doppler_bins: n, noise_variance: noise, seed: 2, ..ChannelConfig::default() };
    let ch = sample_environment(&cfg)?;
    let pilot = PilotConfig::for_channel(m, n, &cfg);
    let mut rng = seeded_rng(42);
    let x = embed_pilot(&random_qpsk_frame(m, n, &mut rng)?, &pilot)?;
    let y = otfs_demodulate(&apply_channel_noisy(&otfs_modulate(&x), &ch, &mut rng)?);
    let truth = true_dd_response(&ch, &pilot, m, n)?;
    println!("true paths (delay, doppler, |h|):");
    for p in &ch.paths {
        println!("  {:>2} {:>8.4} {:.4}", p.delay, p.doppler, p.coeff.norm());
    }
    for kind in EstimatorKind::ALL {
        let est = kind.run(&y, cfg.num_paths, &pilot, noise, &SblviConfig::default())?;
        println!("{:<6} NMSE {:>7.2} dB, {} paths, {} iterations", kind.name(), nmse_db(&est.h_dd, &truth)?, est.num_paths(), est.iterations);
        if kind == EstimatorKind::Sblvi {
            for i in 0..est.num_paths() {
                let l = est.l_est[i] - pilot.delay as f64;
                let k = est.k_est[i] - pilot.doppler as f64;
                println!("  {l:>5.2} {k:>8.4} {:.4}", est.h_max[i].norm());
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(&maotfs::harness::default_output_dir())
}
