// Modulate a random QPSK delay-Doppler frame, demodulate it and report the
// reconstruction error and energy before and after.
//
// `cargo run --example otfs_roundtrip`

use std::path::Path;

use maotfs::otfs::{otfs_demodulate, otfs_modulate, random_qpsk_frame};
use maotfs::{seeded_rng, Result};

pub fn run(_out: &Path) -> Result<()> {
    let mut rng = seeded_rng(7);
    let x = random_qpsk_frame(64, 64, &mut rng)?;
    let s = otfs_modulate(&x);
    let y = otfs_demodulate(&s);
    let err = (y.symbols() - x.symbols()).norm() / x.symbols().norm();
    println!("frame 64x64, {} time samples", s.len());
    println!("frame energy {:.6}, signal energy {:.6}", x.symbols().norm_squared(), s.energy());
    println!("relative round-trip error {err:.3e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(&maotfs::harness::default_output_dir())
}
