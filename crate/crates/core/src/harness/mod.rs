//! Reproducible experiments: configuration, NMSE sweeps, DQN training,
//! MA-vs-FPA comparison, learning-rate sweeps and heatmap export.
//!
//! Every emitted file starts with a comment block carrying the software
//! version, the SHA-256 of the configuration and the seed. No timestamps are
//! written, so identical configurations produce identical bytes.

mod config;
mod svg;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{default_output_dir, ExperimentConfig, FrameSize, OUTPUT_DIR_ENV};

use crate::channel::{apply_channel_noisy, gain_heatmap, sample_environment, sample_environment_with};
use crate::drl::{evaluate, read_checkpoint, write_checkpoint, ComparisonRecord, EpisodeLog, Environment, QNetwork, Trainer};
use crate::estimation::{embed_pilot, nmse_db, true_dd_response, EstimatorKind};
use crate::otfs::{otfs_demodulate, otfs_modulate, random_qpsk_frame};
use crate::{seeded_rng, Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Width of the learning-curve sliding mean.
pub const SLIDING_WINDOW: usize = 200;

/// Comment block placed at the top of every output file.
pub fn header_lines(cfg: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("maotfs {VERSION}"),
        format!("config_sha256 {}", cfg.hash()),
        format!("seed {}", cfg.seed),
    ]
}

fn csv_writer(path: &Path, cfg: &ExperimentConfig) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    for line in header_lines(cfg) {
        writeln!(file, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Reader for files written by this module: skips the `#` header block.
pub fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

/// Mean of `values[max(0, k+1−window)..=k]` for every `k`.
pub fn sliding_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, v) in values.iter().enumerate() {
        sum += v;
        if k >= window {
            sum -= values[k - window];
        }
        out.push(sum / (k + 1).min(window) as f64);
    }
    out
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// One estimator run of an NMSE sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub snr_db: f64,
    pub seed: u64,
    pub method: EstimatorKind,
    /// `None` when the estimator failed.
    pub nmse_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseSummary {
    pub snr_db: f64,
    pub method: EstimatorKind,
    pub median_nmse_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NmseSweep {
    pub rows: Vec<NmseRow>,
    pub summary: Vec<NmseSummary>,
}

impl NmseSweep {
    pub fn median(&self, snr_db: f64, method: EstimatorKind) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.snr_db == snr_db && s.method == method)
            .map(|s| s.median_nmse_db)
    }

    /// Rows `snr_db,seed,method,nmse_db,status`, then one `median` row per
    /// SNR and method.
    pub fn write_csv(&self, path: &Path, cfg: &ExperimentConfig) -> Result<()> {
        let mut w = csv_writer(path, cfg)?;
        w.write_record(["snr_db", "seed", "method", "nmse_db", "status"])?;
        for r in &self.rows {
            let (value, status) = match r.nmse_db {
                Some(v) => (format!("{v}"), "ok"),
                None => (String::new(), "failed"),
            };
            w.write_record([format!("{}", r.snr_db), r.seed.to_string(), r.method.name().into(), value, status.into()])?;
        }
        for s in &self.summary {
            w.write_record([
                format!("{}", s.snr_db),
                "median".into(),
                s.method.name().into(),
                format!("{}", s.median_nmse_db),
                "summary".into(),
            ])?;
        }
        finish(w)
    }
}

/// For every (SNR, seed): draw the channel seeded by `seed`, send one data
/// frame with an embedded pilot, and score each estimator against the true
/// unit-pilot response. SNR is the data-symbol energy over the noise
/// variance. Estimator failures are recorded and the sweep continues.
pub fn run_nmse_sweep(cfg: &ExperimentConfig, snr_list: &[f64], seeds: &[u64]) -> Result<NmseSweep> {
    if snr_list.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("an NMSE sweep needs at least one SNR and one seed".into()));
    }
    cfg.validate()?;
    let (m, n) = (cfg.frame.m, cfg.frame.n);
    let pilot = cfg.pilot();
    let p = cfg.channel.num_paths;
    let jobs: Vec<(usize, f64, u64)> = snr_list
        .iter()
        .enumerate()
        .flat_map(|(i, &snr)| seeds.iter().map(move |&s| (i, snr, s)))
        .collect();
    let results: Vec<Result<Vec<NmseRow>>> = jobs
        .par_iter()
        .map(|&(i, snr, seed)| {
            let noise = 10f64.powf(-snr / 10.0);
            let mut ch_cfg = cfg.channel_config();
            ch_cfg.seed = seed;
            ch_cfg.noise_variance = noise;
            let ch = sample_environment(&ch_cfg)?;
            let mut rng = seeded_rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64 + 1));
            let frame = embed_pilot(&random_qpsk_frame(m, n, &mut rng)?, &pilot)?;
            let y = otfs_demodulate(&apply_channel_noisy(&otfs_modulate(&frame), &ch, &mut rng)?);
            let truth = true_dd_response(&ch, &pilot, m, n)?;
            Ok(EstimatorKind::ALL
                .iter()
                .map(|&method| {
                    let value = method
                        .run(&y, p, &pilot, noise, &cfg.sblvi)
                        .and_then(|est| nmse_db(&est.h_dd, &truth));
                    if let Err(e) = &value {
                        log::warn!("{} failed at {snr} dB, seed {seed}: {e}", method.name());
                    }
                    NmseRow { snr_db: snr, seed, method, nmse_db: value.ok() }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::with_capacity(jobs.len() * 3);
    for r in results {
        rows.extend(r?);
    }
    let mut summary = Vec::new();
    for &snr in snr_list {
        for method in EstimatorKind::ALL {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.snr_db == snr && r.method == method)
                .filter_map(|r| r.nmse_db)
                .collect();
            if let Some(med) = median(&mut v) {
                summary.push(NmseSummary { snr_db: snr, method, median_nmse_db: med });
            }
        }
    }
    Ok(NmseSweep { rows, summary })
}

/// Files written by [`run_drl_training`].
#[derive(Debug, Clone)]
pub struct TrainingArtifacts {
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    pub log: Vec<EpisodeLog>,
    pub network: QNetwork,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const CURVE_FILE: &str = "learning_curve.csv";

/// Learning curve with columns `episode,epsilon,mean_reward_est,
/// mean_gain_true,loss_mean,sliding_reward_est,sliding_gain_true`; episodes
/// are numbered from 1 and the sliding columns average the last
/// [`SLIDING_WINDOW`] rows.
pub fn write_learning_curve(path: &Path, cfg: &ExperimentConfig, log: &[EpisodeLog]) -> Result<()> {
    let rewards: Vec<f64> = log.iter().map(|e| e.mean_reward_est).collect();
    let gains: Vec<f64> = log.iter().map(|e| e.mean_gain_true).collect();
    let sr = sliding_mean(&rewards, SLIDING_WINDOW);
    let sg = sliding_mean(&gains, SLIDING_WINDOW);
    let mut w = csv_writer(path, cfg)?;
    w.write_record([
        "episode",
        "epsilon",
        "mean_reward_est",
        "mean_gain_true",
        "loss_mean",
        "sliding_reward_est",
        "sliding_gain_true",
    ])?;
    for (i, e) in log.iter().enumerate() {
        w.write_record([
            (e.episode + 1).to_string(),
            format!("{}", e.epsilon),
            format!("{}", e.mean_reward_est),
            format!("{}", e.mean_gain_true),
            format!("{}", e.loss_mean),
            format!("{}", sr[i]),
            format!("{}", sg[i]),
        ])?;
    }
    finish(w)
}

fn train_logged(cfg: &ExperimentConfig) -> (Vec<EpisodeLog>, Result<QNetwork>) {
    let mut log = Vec::with_capacity(cfg.agent.episodes);
    let trainer = Trainer::new(cfg.env_config(), cfg.agent.clone(), seeded_rng(cfg.seed));
    let mut trainer = match trainer {
        Ok(t) => t,
        Err(e) => return (log, Err(e)),
    };
    while !trainer.is_finished() {
        match trainer.run_episode(|_| {}) {
            Ok(entry) => log.push(entry),
            Err(e) => return (log, Err(e)),
        }
    }
    (log, Ok(trainer.into_network()))
}

/// Train the agent, writing the learning curve and a checkpoint into `out`.
/// On divergence the curve of the completed episodes is still written.
pub fn run_drl_training(cfg: &ExperimentConfig, out: &Path) -> Result<TrainingArtifacts> {
    cfg.validate()?;
    let curve = out.join(CURVE_FILE);
    let (log, net) = train_logged(cfg);
    write_learning_curve(&curve, cfg, &log)?;
    let network = net?;
    let checkpoint = out.join(CHECKPOINT_FILE);
    save_checkpoint(&network, &checkpoint)?;
    Ok(TrainingArtifacts { checkpoint, curve, log, network })
}

pub fn save_checkpoint(net: &QNetwork, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    write_checkpoint(net, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<QNetwork> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::from(e),
    })?;
    read_checkpoint(BufReader::new(file))
}

/// Stream used for evaluation environments, disjoint from training.
fn eval_rng(cfg: &ExperimentConfig) -> crate::SimRng {
    seeded_rng(cfg.seed ^ 0x5EED_E7A1_0000_0001)
}

/// Greedy evaluation of a checkpoint on `n_envs` fresh realizations against
/// the fixed antenna at the grid centre. Writes `env,ma_gain,fpa_gain,ma_wins`
/// rows to `out` and, when non-empty, a trailing `win_fraction` comment.
pub fn run_ma_vs_fpa(cfg: &ExperimentConfig, checkpoint: &Path, n_envs: usize, out: &Path) -> Result<ComparisonRecord> {
    cfg.validate()?;
    let net = load_checkpoint(checkpoint)?;
    let record = compare_network(cfg, &net, n_envs)?;
    let mut w = csv_writer(out, cfg)?;
    w.write_record(["env", "ma_gain", "fpa_gain", "ma_wins"])?;
    for (i, e) in record.episodes.iter().enumerate() {
        w.write_record([i.to_string(), format!("{}", e.ma_gain), format!("{}", e.fpa_gain), e.ma_wins().to_string()])?;
    }
    let mut file = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    if !record.episodes.is_empty() {
        writeln!(file, "# win_fraction {}", record.win_fraction)?;
    }
    file.flush()?;
    Ok(record)
}

/// [`run_ma_vs_fpa`] without files.
pub fn compare_network(cfg: &ExperimentConfig, net: &QNetwork, n_envs: usize) -> Result<ComparisonRecord> {
    let env_cfg = cfg.env_config();
    let mut rng = eval_rng(cfg);
    let envs = (0..n_envs)
        .map(|_| sample_environment_with(&env_cfg.channel, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    evaluate(net, &envs, (0.0, 0.0), &env_cfg, cfg.agent.steps_per_episode, &mut rng)
}

/// One run of a learning-rate sweep.
#[derive(Debug, Clone)]
pub struct LearningRateRun {
    pub learning_rate: f64,
    pub log: Vec<EpisodeLog>,
    pub network: QNetwork,
}

impl LearningRateRun {
    /// Final value of the sliding-mean estimated reward.
    pub fn final_sliding_reward(&self) -> f64 {
        let r: Vec<f64> = self.log.iter().map(|e| e.mean_reward_est).collect();
        sliding_mean(&r, SLIDING_WINDOW).last().copied().unwrap_or(f64::NAN)
    }
}

/// Paired training runs that differ only in the learning rate.
pub fn run_learning_rate_sweep(cfg: &ExperimentConfig, rates: &[f64]) -> Result<Vec<LearningRateRun>> {
    cfg.validate()?;
    rates
        .par_iter()
        .map(|&lr| {
            let mut c = cfg.clone();
            c.agent.learning_rate = lr;
            let (log, net) = train_logged(&c);
            Ok(LearningRateRun { learning_rate: lr, log, network: net? })
        })
        .collect()
}

/// Rows `learning_rate,episode,mean_reward_est,sliding_reward_est`.
pub fn write_learning_rate_sweep(path: &Path, cfg: &ExperimentConfig, runs: &[LearningRateRun]) -> Result<()> {
    let mut w = csv_writer(path, cfg)?;
    w.write_record(["learning_rate", "episode", "mean_reward_est", "sliding_reward_est"])?;
    for run in runs {
        let r: Vec<f64> = run.log.iter().map(|e| e.mean_reward_est).collect();
        for (e, s) in run.log.iter().zip(sliding_mean(&r, SLIDING_WINDOW)) {
            w.write_record([
                format!("{:e}", run.learning_rate),
                (e.episode + 1).to_string(),
                format!("{}", e.mean_reward_est),
                format!("{s}"),
            ])?;
        }
    }
    finish(w)
}

/// Files written by [`export_heatmap`].
#[derive(Debug, Clone)]
pub struct HeatmapArtifacts {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub gains: nalgebra::DMatrix<f64>,
    /// Cells visited by the movable antenna, start first.
    pub trajectory: Vec<(usize, usize)>,
}

/// Gain map of the realization seeded by `channel.seed`, plus the greedy
/// trajectory of `net` on it. CSV row `i` holds x index `i`, column `j`
/// holds y index `j`; the SVG marks the final MA cell and the centre FPA.
pub fn export_heatmap(cfg: &ExperimentConfig, net: &QNetwork, out_dir: &Path) -> Result<HeatmapArtifacts> {
    cfg.validate()?;
    let env_cfg = cfg.env_config();
    let ch = sample_environment(&env_cfg.channel)?;
    let mut env = Environment::new(env_cfg.clone(), cfg.agent.steps_per_episode)?;
    let mut rng = eval_rng(cfg);
    let mut state = env.reset_with(ch.clone(), &mut rng)?;
    let mut trajectory = vec![env.cell()];
    for _ in 0..cfg.agent.steps_per_episode {
        let q = net.forward(&state.to_array())?;
        let out = env.step(crate::drl::epsilon_greedy(&q, 0.0, &mut rng)?)?;
        trajectory.push(env.cell());
        state = out.state;
    }
    let grid = env_cfg.grid()?;
    let gains = gain_heatmap(&ch, &grid);

    let csv_path = out_dir.join("heatmap.csv");
    let mut w = csv_writer(&csv_path, cfg)?;
    for i in 0..gains.nrows() {
        w.write_record(gains.row(i).iter().map(|g| format!("{g}")))?;
    }
    finish(w)?;

    let svg_path = out_dir.join("heatmap.svg");
    let doc = svg::render_heatmap(&gains, &trajectory, grid.center(), &header_lines(cfg));
    fs::write(&svg_path, doc)?;
    Ok(HeatmapArtifacts { csv: csv_path, svg: svg_path, gains, trajectory })
}
