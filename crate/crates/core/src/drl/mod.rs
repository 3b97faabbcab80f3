//! Antenna-positioning MDP and the DQN agent that solves it.

mod agent;
mod env;
pub mod network;

pub use agent::{
    epsilon_greedy, evaluate, read_checkpoint, td_target, train, train_observed, train_step, write_checkpoint,
    AgentConfig, ComparisonRecord, EpisodeComparison, EpisodeLog, ReplayBuffer, StepEvent, TrainOutcome, Trainer,
    Transition, CHECKPOINT_MAGIC, DIVERGENCE_LOSS,
};
pub use env::{associate, Action, EnvConfig, Environment, MdpState, StepOutcome};
pub use network::{Adam, Dense, QNetwork};
