// Median NMSE against SNR for all three estimators, written to CSV.
//
// `cargo run --release --example nmse_sweep`

use std::path::Path;

use maotfs::estimation::EstimatorKind;
use maotfs::harness::{run_nmse_sweep, ExperimentConfig, FrameSize};
use maotfs::Result;

pub fn run(out: &Path) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.frame = FrameSize { m: 32, n: 32 };
    let snrs = [0.0, 10.0, 20.0];
    let seeds: Vec<u64> = (0..5).collect();
    let sweep = run_nmse_sweep(&cfg, &snrs, &seeds)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("example_nmse.csv");
    sweep.write_csv(&path, &cfg)?;
    println!("{:>6} {:>8} {:>8} {:>8}", "snr", "sblvi", "lmmse", "ep");
    for &snr in &snrs {
        let med = |k| sweep.median(snr, k).unwrap_or(f64::NAN);
        println!("{snr:>6} {:>8.2} {:>8.2} {:>8.2}", med(EstimatorKind::Sblvi), med(EstimatorKind::Lmmse), med(EstimatorKind::Ep));
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(&maotfs::harness::default_output_dir())
}
