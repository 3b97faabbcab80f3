// Train the positioning agent on small frames and write the learning curve
// and checkpoint.
//
// `cargo run --release --example train_agent -- [episodes]`

use std::path::Path;

use maotfs::harness::{run_drl_training, ExperimentConfig, FrameSize};
use maotfs::Result;

pub fn config(episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.frame = FrameSize { m: 16, n: 16 };
    cfg.agent.episodes = episodes;
    cfg
}

pub fn train(out: &Path, episodes: usize) -> Result<()> {
    let cfg = config(episodes);
    let art = run_drl_training(&cfg, out)?;
    for e in art.log.iter().rev().take(3).rev() {
        println!(
            "episode {:>4}: epsilon {:.3}, reward {:.4}, true gain {:.4}, loss {:.3e}",
            e.episode + 1,
            e.epsilon,
            e.mean_reward_est,
            e.mean_gain_true,
            e.loss_mean
        );
    }
    println!("checkpoint {}", art.checkpoint.display());
    Ok(())
}

pub fn run(out: &Path) -> Result<()> {
    train(out, 3)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let episodes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    train(&maotfs::harness::default_output_dir(), episodes)
}
