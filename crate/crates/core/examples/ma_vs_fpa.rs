// Train briefly, then compare the trained agent against a fixed antenna at
// the grid centre on fresh environments. Writes a comparison CSV and the
// gain heatmap with the greedy trajectory as SVG.
//
// `cargo run --release --example ma_vs_fpa -- [episodes] [environments]`

use std::path::Path;

use maotfs::harness::{export_heatmap, run_drl_training, run_ma_vs_fpa, ExperimentConfig, FrameSize};
use maotfs::Result;

fn compare(out: &Path, episodes: usize, envs: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.frame = FrameSize { m: 16, n: 16 };
    cfg.agent.episodes = episodes;
    let art = run_drl_training(&cfg, out)?;
    let rec = run_ma_vs_fpa(&cfg, &art.checkpoint, envs, &out.join("example_compare.csv"))?;
    let wins = rec.episodes.iter().filter(|e| e.ma_wins()).count();
    println!("movable antenna beat the fixed antenna in {wins}/{} environments ({:.2})", rec.episodes.len(), rec.win_fraction);
    let map = export_heatmap(&cfg, &art.network, out)?;
    println!("trajectory of {} cells, heatmap {}", map.trajectory.len(), map.svg.display());
    Ok(())
}

pub fn run(out: &Path) -> Result<()> {
    compare(out, 2, 3)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse().ok());
    let episodes = args.next().flatten().unwrap_or(50);
    let envs = args.next().flatten().unwrap_or(20);
    compare(&maotfs::harness::default_output_dir(), episodes, envs)
}
