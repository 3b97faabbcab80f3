//! DQN agent: replay buffer, ε-greedy acting, TD targets, training loop,
//! greedy evaluation and checkpoints.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{Action, EnvConfig, Environment, MdpState};
use super::network::{Adam, QNetwork, ACTION_DIM, STATE_DIM};
use crate::channel::{channel_gain, ChannelRealization};
use crate::{Error, Result};

/// Stored experience `(ψ, Λ, Γ, ψ′, Ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: MdpState,
    pub action: Action,
    pub reward: f64,
    pub next_state: MdpState,
    pub terminal: bool,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Append, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `size` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if size > self.items.len() {
            return Err(Error::InvalidValue(format!(
                "cannot draw {size} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok(sample_indices(rng, self.items.len(), size).into_iter().map(|i| self.items[i]).collect())
    }
}

/// Hyperparameters of the DQN loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub batch_size: usize,
    pub steps_per_episode: usize,
    pub episodes: usize,
    pub learning_rate: f64,
    /// Gradient steps between target-network copies; 1 copies every step.
    pub target_sync: usize,
    pub buffer_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_decay: 0.997,
            epsilon_min: 0.05,
            batch_size: 128,
            steps_per_episode: 100,
            episodes: 1000,
            learning_rate: 1e-5,
            target_sync: 100,
            buffer_capacity: 50_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("discount factor must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || !(self.epsilon_min..=1.0).contains(&self.epsilon_start) {
            return bad("exploration rates must satisfy 0 ≤ ε_min ≤ ε_start ≤ 1");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("exploration decay must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.steps_per_episode == 0 || self.target_sync == 0 {
            return bad("batch size, episode length and target sync must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("replay capacity must hold at least one batch");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be finite and non-negative");
        }
        Ok(())
    }

    /// `max(ε_min, ε_start·ε_decay^episode)` for a zero-based episode index.
    /// The power is a plain product so the value does not depend on how
    /// `powi` is lowered in a given build.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let decay = (0..episode).fold(1.0, |acc, _| acc * self.epsilon_decay);
        (self.epsilon_start * decay).max(self.epsilon_min)
    }
}

/// Random action with probability `ε`, otherwise the first maximizer.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> Result<Action> {
    if q_values.len() != ACTION_DIM {
        return Err(Error::InvalidDimension(format!("{} Q-values, expected {ACTION_DIM}", q_values.len())));
    }
    if q_values.iter().any(|q| q.is_nan()) {
        return Err(Error::InvalidValue("Q-values contain NaN".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidValue(format!("exploration rate {epsilon} is outside [0, 1]")));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Action::from_index(rng.random_range(0..ACTION_DIM));
    }
    Action::from_index(argmax(q_values))
}

fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// `ι = Γ` if terminal, else `Γ + γ·max_Λ′ Q(ψ′, Λ′; θ⁻)`.
pub fn td_target(t: &Transition, target: &QNetwork, gamma: f64) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let q = target.forward(&t.next_state.to_array())?;
    Ok(t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Loss above which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// One Adam step on the mean squared TD error of `batch`; returns the
/// pre-update loss.
pub fn train_step(
    net: &mut QNetwork,
    target: &QNetwork,
    adam: &mut Adam,
    batch: &[Transition],
    gamma: f64,
    learning_rate: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidValue("empty training batch".into()));
    }
    if !net.is_finite() || !target.is_finite() {
        return Err(Error::InvalidModel("network parameters are not finite".into()));
    }
    let b = batch.len();
    let states = DMatrix::from_fn(STATE_DIM, b, |r, c| batch[c].state.to_array()[r]);
    let next = DMatrix::from_fn(STATE_DIM, b, |r, c| batch[c].next_state.to_array()[r]);
    let q_next = target.forward_batch(&next);
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(c, t)| {
            if t.terminal {
                t.reward
            } else {
                t.reward + gamma * q_next.column(c).max()
            }
        })
        .collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let (loss, grads) = net.loss_gradient(&states, &actions, &targets);
    if !(loss <= DIVERGENCE_LOSS) {
        return Err(Error::Divergence { episode: 0, loss });
    }
    adam.apply(net, &grads, learning_rate);
    if !net.is_finite() {
        return Err(Error::Divergence { episode: 0, loss: f64::INFINITY });
    }
    Ok(loss)
}

/// Per-episode training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// Zero-based.
    pub episode: usize,
    pub epsilon: f64,
    /// Mean reward over the episode's steps.
    pub mean_reward_est: f64,
    /// Mean true gain over the episode's post-move positions.
    pub mean_gain_true: f64,
    /// Mean training loss, NaN when no gradient step ran.
    pub loss_mean: f64,
}

/// One environment step as seen by an observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub episode: usize,
    pub step: usize,
    /// Positions in metres before and after the move.
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub action: Action,
    pub reward: f64,
    pub true_gain: f64,
}

/// Stateful DQN training loop, advanced one episode at a time.
#[derive(Debug, Clone)]
pub struct Trainer<R: Rng> {
    agent: AgentConfig,
    env: Environment,
    net: QNetwork,
    target: QNetwork,
    adam: Adam,
    buffer: ReplayBuffer,
    rng: R,
    episode: usize,
    gradient_steps: u64,
}

impl<R: Rng> Trainer<R> {
    pub fn new(env_cfg: EnvConfig, agent: AgentConfig, mut rng: R) -> Result<Self> {
        agent.validate()?;
        let env = Environment::new(env_cfg, agent.steps_per_episode)?;
        let net = QNetwork::new(&mut rng);
        let target = net.clone();
        let adam = Adam::new(&net);
        let buffer = ReplayBuffer::new(agent.buffer_capacity)?;
        Ok(Self { agent, env, net, target, adam, buffer, rng, episode: 0, gradient_steps: 0 })
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn target_network(&self) -> &QNetwork {
        &self.target
    }

    pub fn into_network(self) -> QNetwork {
        self.net
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.agent.episodes
    }

    /// Run one episode, reporting every step to `observer`.
    pub fn run_episode<F: FnMut(&StepEvent)>(&mut self, mut observer: F) -> Result<EpisodeLog> {
        let episode = self.episode;
        let epsilon = self.agent.epsilon(episode);
        let mut state = self.env.reset(&mut self.rng)?;
        let (mut reward_sum, mut gain_sum, mut loss_sum, mut losses) = (0.0, 0.0, 0.0, 0usize);
        let steps = self.agent.steps_per_episode;
        for step in 0..steps {
            let q = self.net.forward(&state.to_array())?;
            let action = epsilon_greedy(&q, epsilon, &mut self.rng)?;
            let from = self.env.position();
            let out = self.env.step(action)?;
            observer(&StepEvent {
                episode,
                step,
                from,
                to: self.env.position(),
                action,
                reward: out.reward,
                true_gain: out.true_gain,
            });
            reward_sum += out.reward;
            gain_sum += out.true_gain;
            self.buffer.push(Transition {
                state,
                action,
                reward: out.reward,
                next_state: out.state,
                terminal: out.terminal,
            });
            if self.buffer.len() >= self.agent.batch_size {
                let batch = self.buffer.sample(self.agent.batch_size, &mut self.rng)?;
                let loss = train_step(
                    &mut self.net,
                    &self.target,
                    &mut self.adam,
                    &batch,
                    self.agent.gamma,
                    self.agent.learning_rate,
                )
                .map_err(|e| match e {
                    Error::Divergence { loss, .. } => Error::Divergence { episode, loss },
                    other => other,
                })?;
                loss_sum += loss;
                losses += 1;
                self.gradient_steps += 1;
                if self.gradient_steps.is_multiple_of(self.agent.target_sync as u64) {
                    self.target = self.net.clone();
                }
            }
            state = out.state;
            if out.terminal {
                break;
            }
        }
        self.episode += 1;
        Ok(EpisodeLog {
            episode,
            epsilon,
            mean_reward_est: reward_sum / steps as f64,
            mean_gain_true: gain_sum / steps as f64,
            loss_mean: if losses > 0 { loss_sum / losses as f64 } else { f64::NAN },
        })
    }
}

/// Output of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: QNetwork,
    pub log: Vec<EpisodeLog>,
}

/// Run `agent.episodes` episodes of DQN training.
pub fn train<R: Rng>(env_cfg: &EnvConfig, agent: &AgentConfig, rng: R) -> Result<TrainOutcome> {
    train_observed(env_cfg, agent, rng, |_| {})
}

/// [`train`] with a per-step observer.
pub fn train_observed<R: Rng, F: FnMut(&StepEvent)>(
    env_cfg: &EnvConfig,
    agent: &AgentConfig,
    rng: R,
    mut observer: F,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(env_cfg.clone(), agent.clone(), rng)?;
    let mut log = Vec::with_capacity(agent.episodes);
    while !trainer.is_finished() {
        log.push(trainer.run_episode(&mut observer)?);
    }
    Ok(TrainOutcome { network: trainer.into_network(), log })
}

/// One greedy episode against the fixed antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeComparison {
    /// Mean true gain over the movable antenna's post-move positions.
    pub ma_gain: f64,
    /// True gain at the fixed position.
    pub fpa_gain: f64,
}

impl EpisodeComparison {
    /// Strictly higher gain; a tie, up to a relative `1e−12` rounding
    /// margin, is a loss.
    pub fn ma_wins(&self) -> bool {
        self.ma_gain - self.fpa_gain > 1e-12 * self.ma_gain.abs().max(self.fpa_gain.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub episodes: Vec<EpisodeComparison>,
    pub win_fraction: f64,
}

/// Greedy episode per realization; the fixed antenna sits at `fpa_position`
/// (metres).
pub fn evaluate<R: Rng + ?Sized>(
    net: &QNetwork,
    environments: &[ChannelRealization],
    fpa_position: (f64, f64),
    env_cfg: &EnvConfig,
    steps: usize,
    rng: &mut R,
) -> Result<ComparisonRecord> {
    let mut env = Environment::new(env_cfg.clone(), steps)?;
    let mut episodes = Vec::with_capacity(environments.len());
    for ch in environments {
        let mut state = env.reset_with(ch.clone(), rng)?;
        let mut sum = 0.0;
        for _ in 0..steps {
            let q = net.forward(&state.to_array())?;
            let out = env.step(epsilon_greedy(&q, 0.0, rng)?)?;
            sum += out.true_gain;
            state = out.state;
        }
        episodes.push(EpisodeComparison {
            ma_gain: sum / steps as f64,
            fpa_gain: channel_gain(fpa_position.0, fpa_position.1, ch),
        });
    }
    let wins = episodes.iter().filter(|e| e.ma_wins()).count();
    let win_fraction = if episodes.is_empty() { 0.0 } else { wins as f64 / episodes.len() as f64 };
    Ok(ComparisonRecord { episodes, win_fraction })
}

/// First line of every checkpoint.
pub const CHECKPOINT_MAGIC: &str = "maotfs-qnet v1";

/// Text checkpoint: a versioned header, the layer sizes, then one parameter
/// per line in [`QNetwork::params`] order, printed round-trip exact.
pub fn write_checkpoint<W: Write>(net: &QNetwork, mut out: W) -> Result<()> {
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(out, "layers {}", sizes.join(" "))?;
    for p in net.params() {
        writeln!(out, "{p:e}")?;
    }
    Ok(())
}

pub fn read_checkpoint<B: BufRead>(input: B) -> Result<QNetwork> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Parse("checkpoint ends early".into()))
    };
    let magic = next()?;
    if magic.trim() != CHECKPOINT_MAGIC {
        return Err(Error::Parse(format!("unsupported checkpoint header '{magic}'")));
    }
    let layers = next()?;
    let sizes: Vec<usize> = layers
        .strip_prefix("layers ")
        .ok_or_else(|| Error::Parse("missing layer sizes".into()))?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad layer size '{s}'"))))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Parse("checkpoint needs at least two non-zero layer sizes".into()));
    }
    let mut net = QNetwork::zeros(&sizes);
    let mut params = Vec::with_capacity(net.num_params());
    for _ in 0..net.num_params() {
        let line = next()?;
        params.push(line.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad parameter '{line}'")))?);
    }
    net.set_params(&params)?;
    Ok(net)
}
