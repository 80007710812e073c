use std::collections::VecDeque;
use std::fmt::Write as _;

use num_traits::Float;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Activations, QNetwork};
use crate::error::{Error, Result};
use crate::features::StateVector;
use crate::scheduler::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: StateVector,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateVector,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync_every: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the decision budget over which epsilon anneals.
    pub epsilon_decay_fraction: f64,
    pub train_points: usize,
    pub test_points: usize,
    /// Gradient steps per collected decision once the replay holds a batch.
    pub updates_per_point: usize,
    /// Greedy selection picks Extrapolate only if its value exceeds Warp's by
    /// more than this.
    pub tie_margin: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 1e-3,
            batch_size: 64,
            replay_capacity: 10_000,
            target_sync_every: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            train_points: 3000,
            test_points: 1000,
            updates_per_point: 8,
            tie_margin: 0.04,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, keyed by its config name.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            v.push(format!("train.gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            v.push(format!("train.learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            v.push("train.batch_size must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            v.push(format!(
                "train.replay_capacity ({}) must be at least train.batch_size ({})",
                self.replay_capacity, self.batch_size
            ));
        }
        if self.target_sync_every == 0 {
            v.push("train.target_sync_every must be positive".into());
        }
        for (k, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                v.push(format!("train.{k} must lie in [0, 1], got {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            v.push(format!(
                "train.epsilon_decay_fraction must lie in [0, 1], got {}",
                self.epsilon_decay_fraction
            ));
        }
        if self.train_points == 0 {
            v.push("train.train_points must be positive".into());
        }
        if self.test_points == 0 {
            v.push("train.test_points must be positive".into());
        }
        if !(self.tie_margin.is_finite() && self.tie_margin >= 0.0) {
            v.push(format!("train.tie_margin must be non-negative, got {}", self.tie_margin));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(v.join("; ")))
        }
    }

    /// Linear anneal from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_decay_fraction` of `total` decisions.
    pub fn epsilon_at(&self, point: usize, total: usize) -> f64 {
        let span = self.epsilon_decay_fraction * total as f64;
        if span <= 0.0 {
            return self.epsilon_end;
        }
        let t = (point as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Greedy action with ties (and near-ties within `margin`) going to Warp.
pub fn greedy_action(q: [f32; 2], margin: f64) -> Action {
    if (q[1] as f64) > q[0] as f64 + margin {
        Action::Extrapolate
    } else {
        Action::Warp
    }
}

/// Epsilon-greedy selection. One uniform draw decides between exploring and
/// exploiting; exploring draws the action uniformly.
pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, s: &StateVector, epsilon: f64, rng: &mut R) -> Result<Action> {
    select_action_with_margin(net, s, epsilon, 0.0, rng)
}

pub fn select_action_with_margin<R: Rng + ?Sized>(
    net: &QNetwork,
    s: &StateVector,
    epsilon: f64,
    margin: f64,
    rng: &mut R,
) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if rng.random::<f64>() < epsilon {
        return Action::from_index(rng.random_range(0..2));
    }
    Ok(greedy_action(net.forward(&s.to_f32())?, margin))
}

#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    /// Adds an experience, evicting the oldest when full.
    pub fn push(&mut self, e: Experience) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// `n` distinct experiences drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if self.items.len() < n {
            return Err(Error::ReplayUnderfull {
                have: self.items.len(),
                need: n,
            });
        }
        Ok(index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

fn decode<T: Float>(s: &StateVector) -> Vec<T> {
    s.decode().into_iter().map(|v| T::from(v).unwrap()).collect()
}

/// Bootstrapped TD target `r + gamma * max_a' Q_target(s', a')`, without the
/// bootstrap term on terminal transitions.
pub fn td_target<T: Float>(target: &QNetwork<T>, e: &Experience, gamma: f64) -> Result<T> {
    let r = T::from(e.reward).unwrap();
    if e.terminal {
        return Ok(r);
    }
    let q = target.forward(&decode::<T>(&e.next_state))?;
    Ok(r + T::from(gamma).unwrap() * q[0].max(q[1]))
}

/// Mean squared TD error over `batch`.
pub fn td_loss<T: Float>(net: &QNetwork<T>, target: &QNetwork<T>, batch: &[&Experience], gamma: f64) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut sum = T::zero();
    for e in batch {
        let y = td_target(target, e, gamma)?;
        let q = net.forward(&decode::<T>(&e.state))?[e.action.index()];
        sum = sum + (y - q) * (y - q);
    }
    Ok(sum / T::from(batch.len()).unwrap())
}

/// Loss, its gradient with respect to every parameter of `net`, and the
/// batch-mean Q values.
pub fn td_loss_and_grad<T: Float>(
    net: &QNetwork<T>,
    target: &QNetwork<T>,
    batch: &[&Experience],
    gamma: f64,
) -> Result<(T, QNetwork<T>, [T; 2])> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = T::from(batch.len()).unwrap();
    let mut grads = QNetwork::zeros_with(&net.shapes());
    let mut acts: Activations<T> = Vec::new();
    let mut sum = T::zero();
    let mut q_mean = [T::zero(); 2];
    for e in batch {
        let y = td_target(target, e, gamma)?;
        let q = net.forward_trace(&decode::<T>(&e.state), &mut acts);
        if !(q[0].is_finite() && q[1].is_finite()) {
            net.check_finite()?;
        }
        q_mean[0] = q_mean[0] + q[0] / n;
        q_mean[1] = q_mean[1] + q[1] / n;
        let a = e.action.index();
        let err = y - q[a];
        sum = sum + err * err;
        let mut d_out = [T::zero(); 2];
        d_out[a] = -(err + err) / n;
        net.backward(&acts, d_out, &mut grads);
    }
    Ok((sum / n, grads, q_mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub loss: f64,
    pub mean_q_warp: f64,
    pub mean_q_extrapolate: f64,
}

/// One SGD step on a uniformly sampled batch. `step` counts completed steps
/// before this one; the target network is refreshed after every
/// `target_sync_every`-th step.
pub fn train_step<R: Rng + ?Sized>(
    net: &mut QNetwork,
    target: &mut QNetwork,
    replay: &ReplayBuffer,
    config: &TrainConfig,
    rng: &mut R,
    step: u64,
) -> Result<StepStats> {
    let batch = replay.sample(config.batch_size, rng)?;
    let (loss, grads, q) = td_loss_and_grad(net, target, &batch, config.gamma)?;
    net.sgd_step(&grads, config.learning_rate as f32);
    net.check_finite()?;
    let step = step + 1;
    if step % config.target_sync_every == 0 {
        target.clone_from(net);
    }
    Ok(StepStats {
        step,
        loss: loss as f64,
        mean_q_warp: q[0] as f64,
        mean_q_extrapolate: q[1] as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: u64,
    pub loss: f64,
    pub epsilon: f64,
    pub mean_q_warp: f64,
    pub mean_q_extrapolate: f64,
}

pub fn training_log_csv(rows: &[TrainLogRow]) -> String {
    let mut s = String::from("step,loss,epsilon,mean_q_warp,mean_q_extrapolate\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.step, r.loss, r.epsilon, r.mean_q_warp, r.mean_q_extrapolate
        );
    }
    s
}

/// Online DQN state: online and target networks, replay and RNG.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub net: QNetwork,
    pub target: QNetwork,
    pub replay: ReplayBuffer,
    pub rng: ChaCha8Rng,
    pub steps: u64,
    pub log: Vec<TrainLogRow>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let net = QNetwork::init(&mut rng);
        Ok(Self {
            target: net.clone(),
            net,
            replay: ReplayBuffer::new(config.replay_capacity),
            rng,
            steps: 0,
            log: Vec::new(),
            config,
        })
    }

    pub fn act(&mut self, s: &StateVector, epsilon: f64) -> Result<Action> {
        select_action_with_margin(&self.net, s, epsilon, self.config.tie_margin, &mut self.rng)
    }

    /// Stores `e` and runs the configured number of updates once a full batch
    /// is available.
    pub fn observe(&mut self, e: Experience, epsilon: f64) -> Result<()> {
        self.replay.push(e);
        if self.replay.len() < self.config.batch_size {
            return Ok(());
        }
        for _ in 0..self.config.updates_per_point {
            let st = train_step(
                &mut self.net,
                &mut self.target,
                &self.replay,
                &self.config,
                &mut self.rng,
                self.steps,
            )?;
            self.steps = st.step;
            self.log.push(TrainLogRow {
                step: st.step,
                loss: st.loss,
                epsilon,
                mean_q_warp: st.mean_q_warp,
                mean_q_extrapolate: st.mean_q_extrapolate,
            });
        }
        Ok(())
    }
}
