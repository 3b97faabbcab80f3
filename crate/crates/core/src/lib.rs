//! Simulation laboratory for movable-antenna-assisted OTFS links.
//!
//! The pipeline runs end to end in-process:
//!
//! * [`otfs`] maps delay-Doppler frames to time-domain samples and back.
//! * [`channel`] draws multipath realizations, applies them to a waveform and
//!   evaluates the field-response channel gain over the antenna grid.
//! * [`estimation`] embeds a pilot and recovers path coefficients with an
//!   off-grid variational sparse Bayesian estimator, plus LMMSE and
//!   threshold baselines.
//! * [`drl`] is the antenna-positioning MDP together with a small DQN agent.
//! * [`harness`] wires everything into reproducible experiments with CSV/SVG
//!   output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod drl;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod otfs;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Deterministic generator used by every seeded component.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
