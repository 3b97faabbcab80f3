#![allow(dead_code)]

use std::f64::consts::PI;

use maotfs::channel::{apply_channel, ChannelPath, ChannelRealization};
use maotfs::estimation::{embed_pilot, PilotConfig};
use maotfs::linalg::CMatrix;
use maotfs::otfs::{otfs_demodulate, otfs_modulate, DDFrame, TimeSignal};
use maotfs::{Complex64, SimRng};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex(rng: &mut SimRng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

/// Dense `MN × MN` channel matrix `Σ_p h_p Π^{ℓ_p} Δ^{κ_p}` with a
/// zero-filling shift `Π` and `Δ = diag(exp(j2πq/MN))`.
pub fn dense_channel_matrix(ch: &ChannelRealization, m: usize, n: usize) -> CMatrix {
    let len = m * n;
    let mut h = CMatrix::zeros(len, len);
    for p in &ch.paths {
        let mut shift = CMatrix::zeros(len, len);
        for q in p.delay..len {
            shift[(q, q - p.delay)] = c(1.0, 0.0);
        }
        let doppler = CMatrix::from_diagonal(&DVector::from_fn(len, |q, _| {
            Complex64::from_polar(1.0, 2.0 * PI * p.doppler * q as f64 / len as f64)
        }));
        h += (shift * doppler) * p.coeff;
    }
    h
}

pub fn path(delay: usize, doppler: f64, coeff: Complex64) -> ChannelPath {
    ChannelPath { delay, doppler, coeff, elevation: 0.2, azimuth: -0.3 }
}

pub fn realization(paths: Vec<ChannelPath>) -> ChannelRealization {
    ChannelRealization::new(paths, 0.0, 0.0107).unwrap()
}

/// Random channel with distinct integer delays below `max_delay + 1` and
/// fractional Dopplers in `(−kappa, kappa)`; delays may repeat when
/// `p > max_delay + 1`.
pub fn random_channel(rng: &mut SimRng, p: usize, max_delay: usize, kappa: f64) -> ChannelRealization {
    let mut paths = Vec::with_capacity(p);
    while paths.len() < p {
        let delay = rng.random_range(0..=max_delay);
        let doppler = rng.random_range(-kappa..kappa);
        let clash = paths
            .iter()
            .any(|q: &ChannelPath| q.delay == delay && (q.doppler - doppler).abs() < 1.0);
        if clash {
            continue;
        }
        let coeff = random_complex(rng) * (0.5 / p as f64).sqrt();
        paths.push(ChannelPath {
            delay,
            doppler,
            coeff,
            elevation: rng.random_range(-PI / 2.0..PI / 2.0),
            azimuth: rng.random_range(-PI / 2.0..PI / 2.0),
        });
    }
    realization(paths)
}

/// Demodulated noiseless frame carrying only the pilot.
pub fn pilot_only_frame(ch: &ChannelRealization, pilot: &PilotConfig, m: usize, n: usize) -> DDFrame {
    let x = embed_pilot(&DDFrame::zeros(m, n).unwrap(), pilot).unwrap();
    otfs_demodulate(&apply_channel(&otfs_modulate(&x), ch).unwrap())
}

pub fn signal_from(v: &DVector<Complex64>, m: usize, n: usize) -> TimeSignal {
    TimeSignal::new(v.iter().copied().collect(), m, n).unwrap()
}

/// Greedy match of estimated to true coefficients by delay-Doppler distance;
/// returns the largest coefficient error, or infinity on a count mismatch.
pub fn max_coefficient_error(ch: &ChannelRealization, pilot: &PilotConfig, h: &[Complex64], l: &[f64], k: &[f64]) -> f64 {
    if h.len() != ch.num_paths() {
        return f64::INFINITY;
    }
    let mut used = vec![false; h.len()];
    let mut worst: f64 = 0.0;
    for p in &ch.paths {
        let (tl, tk) = ((pilot.delay + p.delay) as f64, pilot.doppler as f64 + p.doppler);
        let j = (0..h.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                let da = (l[a] - tl).powi(2) + (k[a] - tk).powi(2);
                let db = (l[b] - tl).powi(2) + (k[b] - tk).powi(2);
                da.total_cmp(&db)
            })
            .unwrap();
        used[j] = true;
        worst = worst.max((h[j] - p.coeff).norm());
    }
    worst
}
