// Draw a multipath realization and write the channel gain over the antenna
// grid as CSV, together with the best cell.
//
// `cargo run --example channel_heatmap`

use std::io::Write;
use std::path::Path;

use maotfs::channel::{gain_heatmap, sample_environment, AntennaGrid, ChannelConfig};
use maotfs::Result;

pub fn run(out: &Path) -> Result<()> {
    let cfg = ChannelConfig { num_paths: 4, seed: 3, ..ChannelConfig::default() };
    let ch = sample_environment(&cfg)?;
    let grid = AntennaGrid::new(AntennaGrid::DEFAULT_SIDE, cfg.wavelength())?;
    let gains = gain_heatmap(&ch, &grid);
    let (mut best, mut at) = (f64::MIN, (0, 0));
    for i in 0..gains.nrows() {
        for j in 0..gains.ncols() {
            if gains[(i, j)] > best {
                best = gains[(i, j)];
                at = (i, j);
            }
        }
    }
    std::fs::create_dir_all(out)?;
    let path = out.join("example_gain.csv");
    let mut f = std::fs::File::create(&path)?;
    for i in 0..gains.nrows() {
        let row: Vec<String> = gains.row(i).iter().map(|g| format!("{g:.6e}")).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    let (cx, cy) = grid.center();
    println!("{} paths, grid {}x{}", ch.num_paths(), gains.nrows(), gains.ncols());
    println!("centre gain {:.4}, best gain {best:.4} at cell {at:?}", gains[(cx, cy)]);
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(&maotfs::harness::default_output_dir())
}
