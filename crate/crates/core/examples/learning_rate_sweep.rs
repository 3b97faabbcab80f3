// Train one agent per learning rate from the same seed and compare the
// sliding-mean estimated reward at the end of training.
//
// `cargo run --release --example learning_rate_sweep -- [episodes]`

use std::path::Path;

use maotfs::harness::{run_learning_rate_sweep, write_learning_rate_sweep, ExperimentConfig, FrameSize};
use maotfs::Result;

fn sweep(out: &Path, episodes: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.frame = FrameSize { m: 16, n: 16 };
    cfg.agent.episodes = episodes;
    let runs = run_learning_rate_sweep(&cfg, &[1e-2, 1e-5, 1e-7])?;
    std::fs::create_dir_all(out)?;
    let path = out.join("example_lr_sweep.csv");
    write_learning_rate_sweep(&path, &cfg, &runs)?;
    for r in &runs {
        println!("learning rate {:.0e}: final sliding reward {:.4}", r.learning_rate, r.final_sliding_reward());
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run(out: &Path) -> Result<()> {
    sweep(out, 2)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let episodes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    sweep(&maotfs::harness::default_output_dir(), episodes)
}
