//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ChannelConfig;
use crate::drl::{AgentConfig, EnvConfig};
use crate::estimation::{EstimatorKind, PilotConfig, SblviConfig};
use crate::channel::AntennaGrid;
use crate::Result;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "MAOTFS_OUT";

/// `$MAOTFS_OUT`, or `maotfs-out` in the working directory.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("maotfs-out"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSize {
    pub m: usize,
    pub n: usize,
}

/// Everything an experiment needs; every field has a default, so `{}` is a
/// complete file. `channel.doppler_bins` always follows `frame.n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub frame: FrameSize,
    pub channel: ChannelConfig,
    /// Pilot layout; derived from the frame and channel when absent.
    pub pilot: Option<PilotConfig>,
    pub agent: AgentConfig,
    pub estimator: EstimatorKind,
    pub sblvi: SblviConfig,
    pub grid_side: usize,
    pub normalize_rewards: bool,
    pub resample_channel: bool,
    /// SNR points of the NMSE sweep, dB.
    pub snr_db: Vec<f64>,
    /// Number of seeds per SNR point, starting at `seed`.
    pub num_seeds: usize,
    /// Fresh environments used by the MA-vs-FPA comparison.
    pub eval_envs: usize,
    pub seed: u64,
    /// Output directory; not part of the configuration hash.
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            frame: FrameSize { m: 64, n: 64 },
            channel: ChannelConfig { noise_variance: 0.1, ..ChannelConfig::default() },
            pilot: None,
            agent: AgentConfig::default(),
            estimator: EstimatorKind::Sblvi,
            sblvi: SblviConfig::default(),
            grid_side: AntennaGrid::DEFAULT_SIDE,
            normalize_rewards: true,
            resample_channel: true,
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            num_seeds: 20,
            eval_envs: 50,
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => crate::Error::FileNotFound(path.display().to_string()),
            _ => crate::Error::from(e),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration is always serializable")
    }

    /// Hex SHA-256 of the canonical JSON form without the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self { output_dir: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("configuration is always serializable");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig { doppler_bins: self.frame.n, ..self.channel.clone() }
    }

    pub fn pilot(&self) -> PilotConfig {
        self.pilot
            .unwrap_or_else(|| PilotConfig::for_channel(self.frame.m, self.frame.n, &self.channel_config()))
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            frame_m: self.frame.m,
            frame_n: self.frame.n,
            channel: self.channel_config(),
            pilot: self.pilot,
            estimator: self.estimator,
            sblvi: self.sblvi,
            grid_side: self.grid_side,
            normalize_rewards: self.normalize_rewards,
            resample_channel: self.resample_channel,
        }
    }

    /// Seeds `seed, seed+1, …` for sweeps.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64).map(|i| self.seed + i).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(default_output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.env_config().validate()?;
        self.pilot().check_channel(self.frame.n, &self.channel_config())
    }
}
