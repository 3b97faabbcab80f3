//! Antenna-positioning MDP on the square grid inside `(−λ, λ)²`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_noisy, channel_gain, channel_gain_with, sample_environment, sample_environment_with, AntennaGrid, ChannelConfig, ChannelRealization};
use crate::estimation::{derotate, initial_peak_search, embed_pilot, EstimateResult, EstimatorKind, PilotConfig, SblviConfig};
use crate::otfs::{otfs_demodulate, otfs_modulate, random_qpsk_frame};
use crate::{Complex64, Error, Result};

/// One of the five moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidValue(format!("action index {i} is out of range")))
    }

    /// Grid step `(dx, dy)`; up is `+y`, right is `+x`.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }
}

/// Eight-feature observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpState {
    /// Position, normalized to `[−1, 1]`.
    pub x: f64,
    pub y: f64,
    /// Estimated gain at the current cell, normalized.
    pub gain: f64,
    /// Mean recorded gain of visited cells in the 8-neighbourhood, 0 if none.
    pub neighbour_gain: f64,
    /// Visits of the current cell divided by positions occupied so far.
    pub visit_frequency: f64,
    /// Distance to the grid centre divided by `λ√2`.
    pub center_distance: f64,
    /// `t / T`.
    pub progress: f64,
    /// `1 − t / T`.
    pub remaining: f64,
}

impl MdpState {
    pub const DIM: usize = 8;

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x,
            self.y,
            self.gain,
            self.neighbour_gain,
            self.visit_frequency,
            self.center_distance,
            self.progress,
            self.remaining,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Environment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Frame size used for the per-episode pilot estimation.
    pub frame_m: usize,
    pub frame_n: usize,
    /// Random environment generator; `doppler_bins` must equal `frame_n`.
    pub channel: ChannelConfig,
    /// Pilot layout, derived from the channel when absent.
    pub pilot: Option<PilotConfig>,
    pub estimator: EstimatorKind,
    pub sblvi: SblviConfig,
    pub grid_side: usize,
    /// Divide gains by `(Σ|ĥ_i|)²`; raw gains otherwise.
    pub normalize_rewards: bool,
    /// Draw a new realization every episode; otherwise every episode reuses
    /// the realization seeded by `channel.seed`.
    pub resample_channel: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            frame_m: 64,
            frame_n: 64,
            channel: ChannelConfig::default(),
            pilot: None,
            estimator: EstimatorKind::Sblvi,
            sblvi: SblviConfig::default(),
            grid_side: AntennaGrid::DEFAULT_SIDE,
            normalize_rewards: true,
            resample_channel: true,
        }
    }
}

impl EnvConfig {
    /// Desk-scale setup: `m × n` frames with the channel generator scaled to
    /// match.
    pub fn with_frame(m: usize, n: usize) -> Self {
        let mut cfg = Self { frame_m: m, frame_n: n, ..Self::default() };
        cfg.channel.doppler_bins = n;
        cfg
    }

    pub fn pilot(&self) -> PilotConfig {
        self.pilot
            .unwrap_or_else(|| PilotConfig::for_channel(self.frame_m, self.frame_n, &self.channel))
    }

    pub fn grid(&self) -> Result<AntennaGrid> {
        AntennaGrid::new(self.grid_side, self.channel.wavelength())
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.channel.doppler_bins != self.frame_n {
            return Err(Error::InvalidConfig(format!(
                "channel Doppler bins {} differ from frame N = {}",
                self.channel.doppler_bins, self.frame_n
            )));
        }
        self.pilot().validate(self.frame_m, self.frame_n)?;
        if self.grid_side == 0 {
            return Err(Error::InvalidConfig("grid side must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: MdpState,
    /// Estimated gain at the new cell (normalized when configured).
    pub reward: f64,
    /// Gain at the new cell from the true coefficients, unnormalized.
    pub true_gain: f64,
    pub terminal: bool,
}

/// Episode state: one channel realization, its estimate, and the antenna.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    grid: AntennaGrid,
    horizon: usize,
    channel: Option<ChannelRealization>,
    h_est: Vec<Complex64>,
    normalizer: f64,
    cell: (usize, usize),
    step: usize,
    visits: HashMap<(usize, usize), u32>,
    recorded: HashMap<(usize, usize), f64>,
    fallbacks: usize,
}

impl Environment {
    /// `horizon` is the episode length `T`.
    pub fn new(cfg: EnvConfig, horizon: usize) -> Result<Self> {
        cfg.validate()?;
        if horizon == 0 {
            return Err(Error::InvalidConfig("episode length must be positive".into()));
        }
        let grid = cfg.grid()?;
        let center = grid.center();
        Ok(Self {
            cfg,
            grid,
            horizon,
            channel: None,
            h_est: Vec::new(),
            normalizer: 1.0,
            cell: center,
            step: 0,
            visits: HashMap::new(),
            recorded: HashMap::new(),
            fallbacks: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &AntennaGrid {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Start a new episode on a freshly drawn realization.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<MdpState> {
        let ch = if self.cfg.resample_channel {
            sample_environment_with(&self.cfg.channel, rng)?
        } else {
            sample_environment(&self.cfg.channel)?
        };
        self.reset_with(ch, rng)
    }

    /// Start a new episode on a given realization.
    pub fn reset_with<R: Rng + ?Sized>(&mut self, ch: ChannelRealization, rng: &mut R) -> Result<MdpState> {
        let h_est = self.estimate_coefficients(&ch, rng)?;
        let cell = (rng.random_range(0..self.grid.side), rng.random_range(0..self.grid.side));
        self.start(ch, h_est, cell)
    }

    /// Start a new episode with known coefficient estimates and start cell.
    pub fn start(&mut self, ch: ChannelRealization, h_est: Vec<Complex64>, cell: (usize, usize)) -> Result<MdpState> {
        if h_est.len() != ch.num_paths() {
            return Err(Error::InvalidDimension(format!(
                "{} coefficient estimates for {} paths",
                h_est.len(),
                ch.num_paths()
            )));
        }
        if cell.0 >= self.grid.side || cell.1 >= self.grid.side {
            return Err(Error::InvalidValue(format!("cell {cell:?} lies outside the grid")));
        }
        let sum: f64 = h_est.iter().map(|h| h.norm()).sum();
        self.normalizer = if self.cfg.normalize_rewards && sum > 0.0 { sum * sum } else { 1.0 };
        self.channel = Some(ch);
        self.h_est = h_est;
        self.cell = cell;
        self.step = 0;
        self.visits.clear();
        self.recorded.clear();
        self.record();
        Ok(self.state())
    }

    /// Move one cell, clamped to the grid.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.channel.is_none() {
            return Err(Error::InvalidConfig("step called before reset".into()));
        }
        if self.step >= self.horizon {
            return Err(Error::InvalidConfig("episode already terminated".into()));
        }
        let (dx, dy) = action.delta();
        let side = self.grid.side as i64;
        let nx = self.cell.0 as i64 + dx;
        let ny = self.cell.1 as i64 + dy;
        if (0..side).contains(&nx) && (0..side).contains(&ny) {
            self.cell = (nx as usize, ny as usize);
        }
        self.step += 1;
        let reward = self.record();
        Ok(StepOutcome {
            state: self.state(),
            reward,
            true_gain: self.true_gain(),
            terminal: self.step == self.horizon,
        })
    }

    /// Register a visit to the current cell and return its estimated gain.
    fn record(&mut self) -> f64 {
        let g = self.estimated_gain();
        *self.visits.entry(self.cell).or_insert(0) += 1;
        self.recorded.insert(self.cell, g);
        g
    }

    pub fn state(&self) -> MdpState {
        let (x, y) = self.position();
        let lambda = self.grid.wavelength;
        let mut sum = 0.0;
        let mut count = 0;
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let c = (self.cell.0 as i64 + dx, self.cell.1 as i64 + dy);
                if c.0 < 0 || c.1 < 0 {
                    continue;
                }
                if let Some(g) = self.recorded.get(&(c.0 as usize, c.1 as usize)) {
                    sum += g;
                    count += 1;
                }
            }
        }
        let progress = self.step as f64 / self.horizon as f64;
        MdpState {
            x: x / lambda,
            y: y / lambda,
            gain: self.estimated_gain(),
            neighbour_gain: if count > 0 { sum / count as f64 } else { 0.0 },
            visit_frequency: self.visits.get(&self.cell).copied().unwrap_or(0) as f64 / (self.step + 1) as f64,
            center_distance: (x * x + y * y).sqrt() / (lambda * 2f64.sqrt()),
            progress,
            remaining: 1.0 - progress,
        }
    }

    pub fn cell(&self) -> (usize, usize) {
        self.cell
    }

    /// Antenna position in metres.
    pub fn position(&self) -> (f64, f64) {
        self.grid.position(self.cell.0, self.cell.1)
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn channel(&self) -> Option<&ChannelRealization> {
        self.channel.as_ref()
    }

    pub fn estimated_coefficients(&self) -> &[Complex64] {
        &self.h_est
    }

    /// Reward and feature scale `(Σ|ĥ_i|)²`, or 1 for raw gains.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Number of episodes whose estimator failed and fell back to the peak
    /// search.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Normalized estimated gain at the current cell.
    pub fn estimated_gain(&self) -> f64 {
        match &self.channel {
            Some(ch) => {
                let (x, y) = self.position();
                channel_gain_with(&self.h_est, x, y, ch) / self.normalizer
            }
            None => 0.0,
        }
    }

    /// Unnormalized gain at the current cell from the true coefficients.
    pub fn true_gain(&self) -> f64 {
        match &self.channel {
            Some(ch) => {
                let (x, y) = self.position();
                channel_gain(x, y, ch)
            }
            None => 0.0,
        }
    }

    /// Simulate one pilot frame through `ch` and estimate its coefficients,
    /// matched to the true paths by delay-Doppler proximity.
    fn estimate_coefficients<R: Rng + ?Sized>(&mut self, ch: &ChannelRealization, rng: &mut R) -> Result<Vec<Complex64>> {
        let (m, n) = (self.cfg.frame_m, self.cfg.frame_n);
        let pilot = self.cfg.pilot();
        let data = random_qpsk_frame(m, n, rng)?;
        let frame = embed_pilot(&data, &pilot)?;
        let y = otfs_demodulate(&apply_channel_noisy(&otfs_modulate(&frame), ch, rng)?);
        let p = ch.num_paths();
        let est = match self.cfg.estimator.run(&y, p, &pilot, ch.noise_variance, &self.cfg.sblvi) {
            Ok(est) => est,
            Err(e) => {
                self.fallbacks += 1;
                log::warn!("estimator failed ({e}); using peak-search coefficients");
                peak_search_estimate(&y, p, &pilot)?
            }
        };
        Ok(associate(&est, ch, &pilot))
    }
}

/// On-grid coefficients read straight off the strongest window cells.
fn peak_search_estimate(y: &crate::otfs::DDFrame, p: usize, pilot: &PilotConfig) -> Result<EstimateResult> {
    let peaks = initial_peak_search(y, p, pilot)?;
    let (m, n) = (y.m(), y.n());
    let h_eff: Vec<Complex64> = peaks
        .delays
        .iter()
        .zip(&peaks.dopplers)
        .map(|(&r, &c)| y.get(r, c) / pilot.amplitude)
        .collect();
    let offsets: Vec<f64> = peaks.doppler_offsets.iter().map(|&k| k as f64).collect();
    let l_est: Vec<f64> = peaks.delays.iter().map(|&r| r as f64).collect();
    let k_est: Vec<f64> = offsets.iter().map(|k| pilot.doppler as f64 + k).collect();
    Ok(EstimateResult {
        h_dd: crate::estimation::reconstruct(m, n, &h_eff, &l_est, &k_est),
        h_max: derotate(&h_eff, &offsets, pilot, m, n),
        l_est,
        k_est,
        iterations: 0,
        final_eps: f64::NAN,
    })
}

/// Pair estimated paths with true paths, closest delay-Doppler pairs first;
/// unmatched true paths get a zero coefficient.
pub fn associate(est: &EstimateResult, ch: &ChannelRealization, pilot: &PilotConfig) -> Vec<Complex64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, path) in ch.paths.iter().enumerate() {
        let l = (pilot.delay + path.delay) as f64;
        let k = pilot.doppler as f64 + path.doppler;
        for j in 0..est.num_paths() {
            let d = (est.l_est[j] - l).powi(2) + (est.k_est[j] - k).powi(2);
            pairs.push((d, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![Complex64::new(0.0, 0.0); ch.num_paths()];
    let mut used_true = vec![false; ch.num_paths()];
    let mut used_est = vec![false; est.num_paths()];
    for (_, i, j) in pairs {
        if !used_true[i] && !used_est[j] {
            used_true[i] = true;
            used_est[j] = true;
            out[i] = est.h_max[j];
        }
    }
    out
}
