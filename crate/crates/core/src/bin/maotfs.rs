//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maotfs::harness::{
    export_heatmap, load_checkpoint, run_drl_training, run_ma_vs_fpa, run_nmse_sweep, ExperimentConfig, CHECKPOINT_FILE,
};
use maotfs::{Error, Result};

#[derive(Parser)]
#[command(name = "maotfs", version, about = "Movable-antenna OTFS simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $MAOTFS_OUT or ./maotfs-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE versus SNR for every estimator.
    Nmse {
        #[command(flatten)]
        common: Common,
        /// Comma-separated SNR points in dB.
        #[arg(long, value_delimiter = ',')]
        snr: Option<Vec<f64>>,
        /// Number of seeds per SNR point.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Train the DQN agent and write the learning curve and checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Compare a trained agent with the fixed centre antenna.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file (default: <out>/checkpoint.txt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Number of fresh environments.
        #[arg(long)]
        envs: Option<usize>,
    },
    /// Gain map with the agent's final position and the fixed antenna.
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.channel.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Nmse { common, snr, seeds } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(s) = snr {
                cfg.snr_db = s;
            }
            if let Some(n) = seeds {
                cfg.num_seeds = n;
            }
            let sweep = run_nmse_sweep(&cfg, &cfg.snr_db, &cfg.seeds())?;
            let path = out.join("nmse.csv");
            sweep.write_csv(&path, &cfg)?;
            for s in &sweep.summary {
                println!("{:>6.1} dB  {:<6} {:>8.2} dB", s.snr_db, s.method.name(), s.median_nmse_db);
            }
            println!("wrote {}", path.display());
        }
        Command::Train { common, episodes, learning_rate } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(e) = episodes {
                cfg.agent.episodes = e;
            }
            if let Some(lr) = learning_rate {
                cfg.agent.learning_rate = lr;
            }
            let art = run_drl_training(&cfg, &out)?;
            if let Some(last) = art.log.last() {
                println!("episode {}: mean reward {:.4}, mean true gain {:.4}", last.episode + 1, last.mean_reward_est, last.mean_gain_true);
            }
            println!("wrote {} and {}", art.curve.display(), art.checkpoint.display());
        }
        Command::Compare { common, checkpoint, envs } => {
            let (cfg, out) = load(&common)?;
            let ckpt = checkpoint.unwrap_or_else(|| out.join(CHECKPOINT_FILE));
            let path = out.join("ma_vs_fpa.csv");
            let rec = run_ma_vs_fpa(&cfg, &ckpt, envs.unwrap_or(cfg.eval_envs), &path)?;
            println!("win fraction {:.3} over {} environments", rec.win_fraction, rec.episodes.len());
            println!("wrote {}", path.display());
        }
        Command::Heatmap { common, checkpoint } => {
            let (cfg, out) = load(&common)?;
            let ckpt = checkpoint.unwrap_or_else(|| out.join(CHECKPOINT_FILE));
            let net = load_checkpoint(&ckpt)?;
            let art = export_heatmap(&cfg, &net, &out)?;
            println!("wrote {} and {}", art.csv.display(), art.svg.display());
        }
    }
    Ok(())
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidDimension(_) => "invalid_dimension",
        Error::InvalidConfig(_) => "invalid_config",
        Error::InvalidChannel(_) => "invalid_channel",
        Error::InvalidValue(_) => "invalid_value",
        Error::InvalidModel(_) => "invalid_model",
        Error::NumericalFailure { .. } => "numerical_failure",
        Error::UndefinedMetric(_) => "undefined_metric",
        Error::Divergence { .. } => "divergence",
        Error::FileNotFound(_) => "file_not_found",
        Error::Io(_) => "io",
        Error::Parse(_) => "parse",
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": kind(&e), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
