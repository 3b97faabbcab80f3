//! Multipath delay-Doppler channel: random realizations, the sampled
//! delay-time channel, and the field-response gain over the antenna grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::otfs::TimeSignal;
use crate::{seeded_rng, Complex64, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPath {
    /// Integer delay in delay bins (`T/M` units).
    pub delay: usize,
    /// Normalized Doppler shift in Doppler bins, possibly fractional.
    pub doppler: f64,
    pub coeff: Complex64,
    /// Elevation angle of arrival, radians.
    pub elevation: f64,
    /// Azimuth angle of arrival, radians.
    pub azimuth: f64,
}

/// A set of paths plus the link constants needed to use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub paths: Vec<ChannelPath>,
    pub noise_variance: f64,
    pub wavelength: f64,
}

impl ChannelRealization {
    pub fn new(paths: Vec<ChannelPath>, noise_variance: f64, wavelength: f64) -> Result<Self> {
        let ch = Self { paths, noise_variance, wavelength };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::InvalidChannel("a realization needs at least one path".into()));
        }
        if !(self.noise_variance >= 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::InvalidChannel("noise variance and wavelength must be valid".into()));
        }
        for (i, p) in self.paths.iter().enumerate() {
            let ok = p.doppler.is_finite()
                && p.coeff.norm() > 0.0
                && p.coeff.norm().is_finite()
                && p.elevation.abs() <= PI / 2.0
                && p.azimuth.abs() <= PI / 2.0;
            if !ok {
                return Err(Error::InvalidChannel(format!("path {i} is malformed: {p:?}")));
            }
            for q in &self.paths[..i] {
                if q.delay == p.delay && q.doppler == p.doppler {
                    return Err(Error::InvalidChannel(format!("path {i} duplicates a delay-Doppler pair")));
                }
            }
        }
        Ok(())
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// Diagonal path-response matrix `diag{h₁, …, h_P}`.
    pub fn path_response_matrix(&self) -> DMatrix<Complex64> {
        let h: Vec<Complex64> = self.paths.iter().map(|p| p.coeff).collect();
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(h))
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.coeff).collect()
    }
}

/// Parameters of the random environment generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub num_paths: usize,
    pub speed_kmh: f64,
    pub carrier_hz: f64,
    pub subcarrier_hz: f64,
    /// Doppler bins per frame (`N`); the Doppler bound scales with it.
    pub doppler_bins: usize,
    /// Largest integer delay drawn, in bins.
    pub max_delay: usize,
    /// Two paths sharing a delay are redrawn when their Doppler indices are
    /// closer than this, in bins.
    pub min_doppler_separation: f64,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            num_paths: 4,
            speed_kmh: 70.0,
            carrier_hz: 28e9,
            subcarrier_hz: 15e3,
            doppler_bins: 64,
            max_delay: 4,
            min_doppler_separation: 0.0,
            noise_variance: 0.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Maximum Doppler frequency `v·f_c/c` in Hz.
    pub fn max_doppler_hz(&self) -> f64 {
        self.speed_kmh / 3.6 * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Maximum normalized Doppler index `f_d · N · T` with `T = 1/Δf`.
    pub fn max_doppler_index(&self) -> f64 {
        self.max_doppler_hz() * self.doppler_bins as f64 / self.subcarrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::InvalidConfig("number of paths must be positive".into()));
        }
        if !(self.speed_kmh >= 0.0) {
            return Err(Error::InvalidConfig("speed must be non-negative".into()));
        }
        if !(self.carrier_hz > 0.0) || !(self.subcarrier_hz > 0.0) || self.doppler_bins == 0 {
            return Err(Error::InvalidConfig("carrier, subcarrier spacing and N must be positive".into()));
        }
        if !(self.noise_variance >= 0.0) || !(self.min_doppler_separation >= 0.0) {
            return Err(Error::InvalidConfig("noise variance and Doppler separation must be non-negative".into()));
        }
        Ok(())
    }
}

const MAX_REDRAWS: usize = 10_000;

/// Draw a realization from the generator seeded by `cfg.seed`.
pub fn sample_environment(cfg: &ChannelConfig) -> Result<ChannelRealization> {
    let mut rng = seeded_rng(cfg.seed);
    sample_environment_with(cfg, &mut rng)
}

/// Draw a realization from a caller-owned generator.
///
/// Delays are uniform integers in `[0, max_delay]`, Doppler indices are
/// `κ_max·cos θ` with `θ ~ U[0, 2π)`, coefficients are `CN(0, 1/P)` and both
/// angles are uniform in `[−π/2, π/2]`.
pub fn sample_environment_with<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<ChannelRealization> {
    cfg.validate()?;
    let p = cfg.num_paths;
    let kappa_max = cfg.max_doppler_index();
    let sep = cfg.min_doppler_separation.max(1e-9);
    let amp = (1.0 / (2.0 * p as f64)).sqrt();
    let mut paths: Vec<ChannelPath> = Vec::with_capacity(p);
    let mut redraws = 0;
    while paths.len() < p {
        let delay = rng.random_range(0..=cfg.max_delay);
        let theta = rng.random_range(0.0..2.0 * PI);
        let doppler = kappa_max * theta.cos();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let elevation = rng.random_range(-PI / 2.0..=PI / 2.0);
        let azimuth = rng.random_range(-PI / 2.0..=PI / 2.0);
        let clash = paths
            .iter()
            .any(|q| q.delay == delay && (q.doppler - doppler).abs() < sep);
        let coeff = Complex64::new(re * amp, im * amp);
        if clash || coeff.norm() == 0.0 {
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(Error::InvalidConfig(format!(
                    "cannot place {p} distinct paths with max delay {} and Doppler bound {kappa_max:.3}",
                    cfg.max_delay
                )));
            }
            continue;
        }
        paths.push(ChannelPath { delay, doppler, coeff, elevation, azimuth });
    }
    ChannelRealization::new(paths, cfg.noise_variance, cfg.wavelength())
}

/// Noise-free received samples `r(q) = Σ_p h_p z^{κ_p (q−ℓ_p)} s(q−ℓ_p)`,
/// with `z = exp(j2π/NM)` and `s(q) = 0` for `q < 0`.
pub fn apply_channel(s: &TimeSignal, ch: &ChannelRealization) -> Result<TimeSignal> {
    let (m, n) = (s.m(), s.n());
    let len = m * n;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for path in &ch.paths {
        if path.delay >= m {
            return Err(Error::InvalidChannel(format!(
                "delay index {} must be below M = {m}",
                path.delay
            )));
        }
        let step = 2.0 * PI * path.doppler / len as f64;
        for q in path.delay..len {
            let k = (q - path.delay) as f64;
            out[q] += path.coeff * Complex64::from_polar(1.0, step * k) * s.samples()[q - path.delay];
        }
    }
    TimeSignal::new(out, m, n)
}

/// [`apply_channel`] followed by circular complex Gaussian noise of variance
/// `ch.noise_variance` on every sample.
pub fn apply_channel_noisy<R: Rng + ?Sized>(
    s: &TimeSignal,
    ch: &ChannelRealization,
    rng: &mut R,
) -> Result<TimeSignal> {
    let mut r = apply_channel(s, ch)?;
    add_awgn(&mut r, ch.noise_variance, rng);
    Ok(r)
}

pub fn add_awgn<R: Rng + ?Sized>(signal: &mut TimeSignal, variance: f64, rng: &mut R) {
    if variance <= 0.0 {
        return;
    }
    let sd = (variance / 2.0).sqrt();
    for z in signal.samples_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex64::new(re * sd, im * sd);
    }
}

/// Path-length difference `ρ(x, y) = x cos ζ sin η + y sin ζ`.
fn path_difference(p: &ChannelPath, x: f64, y: f64) -> f64 {
    x * p.elevation.cos() * p.azimuth.sin() + y * p.elevation.sin()
}

/// Field-response vector `f(x, y)[i] = exp(j 2π/λ ρ_i(x, y))`.
pub fn field_response(x: f64, y: f64, ch: &ChannelRealization) -> Vec<Complex64> {
    let k = 2.0 * PI / ch.wavelength;
    ch.paths
        .iter()
        .map(|p| Complex64::from_polar(1.0, k * path_difference(p, x, y)))
        .collect()
}

/// Channel gain `|f(x, y)ᴴ Σ 1_P|²`.
pub fn channel_gain(x: f64, y: f64, ch: &ChannelRealization) -> f64 {
    let h: Vec<Complex64> = ch.paths.iter().map(|p| p.coeff).collect();
    channel_gain_with(&h, x, y, ch)
}

/// Channel gain using substitute coefficients (e.g. estimates) with the
/// angles of `ch`.
pub fn channel_gain_with(coeffs: &[Complex64], x: f64, y: f64, ch: &ChannelRealization) -> f64 {
    debug_assert_eq!(coeffs.len(), ch.paths.len());
    let f = field_response(x, y, ch);
    coeffs
        .iter()
        .zip(&f)
        .map(|(h, fi)| h * fi.conj())
        .sum::<Complex64>()
        .norm_sqr()
}

/// Square grid of candidate antenna positions inside `(−λ, λ)²`.
///
/// Positions are cell centred: `x_j = −λ + (j + ½)·δ` with `δ = 2λ/side`, so
/// one grid step equals the per-step movement limit and the centre cell of an
/// odd grid sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaGrid {
    pub side: usize,
    pub wavelength: f64,
}

impl AntennaGrid {
    pub const DEFAULT_SIDE: usize = 101;

    pub fn new(side: usize, wavelength: f64) -> Result<Self> {
        if side == 0 || !(wavelength > 0.0) {
            return Err(Error::InvalidConfig("grid needs a positive side and wavelength".into()));
        }
        Ok(Self { side, wavelength })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.wavelength / self.side as f64
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -self.wavelength + (index as f64 + 0.5) * self.spacing()
    }

    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.coordinate(ix), self.coordinate(iy))
    }

    pub fn center(&self) -> (usize, usize) {
        (self.side / 2, self.side / 2)
    }
}

/// Gain over every grid cell; entry `(i, j)` is the gain at
/// `(x_i, y_j)`, i.e. rows follow x and columns follow y.
pub fn gain_heatmap(ch: &ChannelRealization, grid: &AntennaGrid) -> DMatrix<f64> {
    DMatrix::from_fn(grid.side, grid.side, |i, j| {
        let (x, y) = grid.position(i, j);
        channel_gain(x, y, ch)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otfs::{otfs_modulate, random_qpsk_frame};

    fn one_path(delay: usize, doppler: f64, coeff: Complex64) -> ChannelRealization {
        ChannelRealization::new(
            vec![ChannelPath { delay, doppler, coeff, elevation: 0.3, azimuth: -0.4 }],
            0.0,
            0.01,
        )
        .unwrap()
    }

    fn signal(seed: u64) -> TimeSignal {
        let mut rng = seeded_rng(seed);
        otfs_modulate(&random_qpsk_frame(8, 8, &mut rng).unwrap())
    }

    #[test]
    fn static_receiver_has_no_doppler() {
        let cfg = ChannelConfig { speed_kmh: 0.0, ..Default::default() };
        let ch = sample_environment(&cfg).unwrap();
        assert!(ch.paths.iter().all(|p| p.doppler == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ChannelConfig { seed: 99, ..Default::default() };
        assert_eq!(sample_environment(&cfg).unwrap(), sample_environment(&cfg).unwrap());
    }

    #[test]
    fn doppler_bound_at_70_kmh() {
        let cfg = ChannelConfig::default();
        // 70 km/h at 28 GHz: f_d = 19.444 m/s * 28e9 / c = 1816.1 Hz; κ_max = f_d * 64 / 15 kHz
        let fd = 70.0 / 3.6 * 28e9 / 299_792_458.0;
        let kappa_max = fd * 64.0 / 15e3;
        assert!((cfg.max_doppler_index() - kappa_max).abs() < 1e-12);
        assert!((kappa_max - 7.748).abs() < 1e-3);
        for seed in 0..50 {
            let ch = sample_environment(&ChannelConfig { seed, ..cfg.clone() }).unwrap();
            assert!(ch.paths.iter().all(|p| p.doppler.abs() <= kappa_max + 1e-12));
            assert!(ch.paths.iter().all(|p| p.delay <= cfg.max_delay));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let zero = ChannelConfig { num_paths: 0, ..Default::default() };
        assert!(matches!(sample_environment(&zero), Err(Error::InvalidConfig(_))));
        let neg = ChannelConfig { speed_kmh: -1.0, ..Default::default() };
        assert!(matches!(sample_environment(&neg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn identity_channel() {
        let s = signal(1);
        let r = apply_channel(&s, &one_path(0, 0.0, Complex64::new(1.0, 0.0))).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn pure_delay() {
        let s = signal(2);
        let r = apply_channel(&s, &one_path(2, 0.0, Complex64::new(1.0, 0.0))).unwrap();
        assert_eq!(r.samples()[0], Complex64::new(0.0, 0.0));
        assert_eq!(r.samples()[1], Complex64::new(0.0, 0.0));
        for q in 2..s.len() {
            assert_eq!(r.samples()[q], s.samples()[q - 2]);
        }
    }

    #[test]
    fn delay_beyond_frame_is_rejected() {
        let s = signal(3);
        let err = apply_channel(&s, &one_path(8, 0.0, Complex64::new(1.0, 0.0)));
        assert!(matches!(err, Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn field_response_basics() {
        let ch = one_path(0, 0.0, Complex64::new(1.0, 0.0));
        assert!((field_response(0.0, 0.0, &ch)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let lam = 0.02;
        let flip = ChannelRealization::new(
            vec![ChannelPath {
                delay: 0,
                doppler: 0.0,
                coeff: Complex64::new(1.0, 0.0),
                elevation: 0.0,
                azimuth: PI / 2.0,
            }],
            0.0,
            lam,
        )
        .unwrap();
        assert!((field_response(lam / 2.0, 0.0, &flip)[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gain_of_single_path_is_flat() {
        let ch = one_path(1, 0.5, Complex64::new(0.3, -0.4));
        for (x, y) in [(0.0, 0.0), (0.003, -0.007), (-0.009, 0.009)] {
            assert!((channel_gain(x, y, &ch) - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_sum_at_origin() {
        let mut ch = one_path(0, 0.0, Complex64::new(1.0, 0.0));
        ch.paths.push(ChannelPath { delay: 1, doppler: 0.0, coeff: Complex64::new(1.0, 0.0), elevation: 1.0, azimuth: 0.2 });
        assert!((channel_gain(0.0, 0.0, &ch) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn grid_geometry() {
        let grid = AntennaGrid::new(101, 1.0).unwrap();
        assert!((grid.spacing() - 2.0 / 101.0).abs() < 1e-15);
        assert!(grid.coordinate(50).abs() < 1e-14);
        assert!(grid.coordinate(0) > -1.0 && grid.coordinate(100) < 1.0);
    }

    #[test]
    fn heatmap_of_flat_field_is_constant() {
        let ch = one_path(0, 0.0, Complex64::new(0.0, 2.0));
        let grid = AntennaGrid::new(11, 0.01).unwrap();
        let map = gain_heatmap(&ch, &grid);
        assert!(map.iter().all(|g| (g - 4.0).abs() < 1e-12));
    }
}
