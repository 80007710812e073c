use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{Experience, TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::features::StateVector;
use crate::scenegen::Episode;
use crate::scheduler::{
    run_episode, Action, DecisionTrace, NodeView, Policy, QPolicy, QualitySummary, SchedulerConfig,
};

/// Epsilon-greedy policy that learns online from the rewards it observes.
/// Once `budget` decisions have been recorded it keeps acting greedily but
/// stops storing experiences.
pub struct LearningAgent {
    pub trainer: Trainer,
    pub budget: usize,
    pub points: usize,
    pending: Option<(StateVector, Action, f64)>,
    reward_cfg: super::RewardConfig,
}

impl LearningAgent {
    pub fn new(config: TrainConfig, reward_cfg: super::RewardConfig) -> Result<Self> {
        Ok(Self {
            budget: config.train_points,
            trainer: Trainer::new(config)?,
            points: 0,
            pending: None,
            reward_cfg,
        })
    }

    pub fn done(&self) -> bool {
        self.points >= self.budget
    }

    fn epsilon(&self) -> f64 {
        self.trainer.config.epsilon_at(self.points, self.budget)
    }

    fn flush(&mut self, next_state: StateVector, terminal: bool) -> Result<()> {
        if let Some((state, action, reward)) = self.pending.take() {
            let eps = self.epsilon();
            self.trainer.observe(
                Experience {
                    state,
                    action,
                    reward,
                    next_state,
                    terminal,
                },
                eps,
            )?;
        }
        Ok(())
    }

    pub fn into_policy(self, name: impl Into<String>) -> QPolicy {
        QPolicy::new(name, self.trainer.net, self.trainer.config.tie_margin)
    }
}

impl Policy for LearningAgent {
    fn name(&self) -> String {
        "learning".into()
    }

    fn decide(&mut self, view: &NodeView<'_>) -> Result<Action> {
        if self.done() {
            self.flush(view.state.clone(), false)?;
            return self.trainer.act(&view.state, 0.0);
        }
        self.flush(view.state.clone(), false)?;
        let eps = self.epsilon();
        let a = self.trainer.act(&view.state, eps)?;
        let r = view.reward(a, &self.reward_cfg)?.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "training needs ground truth at interval {} node {}",
                view.interval, view.node
            ))
        })?;
        self.pending = Some((view.state.clone(), a, r));
        self.points += 1;
        Ok(a)
    }

    fn finish_episode(&mut self) -> Result<()> {
        self.flush(StateVector::zeros(), true)
    }
}

/// Trains a Q-network on `episodes`, visiting them in seeded shuffled passes
/// until `config.train_points` decisions have been collected.
pub fn train_on_episodes(episodes: &[&Episode], config: &TrainConfig, sched: &SchedulerConfig) -> Result<LearningAgent> {
    if episodes.is_empty() {
        return Err(Error::InvalidArgument("no training episodes".into()));
    }
    let mut agent = LearningAgent::new(config.clone(), sched.reward)?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x0de7_a11e);
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    while !agent.done() {
        order.shuffle(&mut order_rng);
        for &i in &order {
            let before = agent.points;
            run_episode(episodes[i], &mut agent, sched)?;
            if agent.points == before {
                return Err(Error::InvalidArgument("episodes yield no decisions".into()));
            }
            if agent.done() {
                break;
            }
        }
    }
    Ok(agent)
}

/// Outcome of running a policy over a set of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub decisions: usize,
    pub warp_ratio: f64,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub effective_fps: f64,
}

impl PolicyEvaluation {
    pub fn from_traces(traces: &[DecisionTrace], base_fps: f64) -> Self {
        let decisions: usize = traces.iter().map(|t| t.decisions.len()).sum();
        let warps: usize = traces.iter().map(DecisionTrace::warp_decisions).sum();
        let q = QualitySummary::from_traces(traces);
        let fps = crate::scheduler::FpsReport::from_traces(traces, base_fps);
        Self {
            decisions,
            warp_ratio: if decisions == 0 { 0.0 } else { warps as f64 / decisions as f64 },
            mean_psnr: q.mean_psnr,
            mean_ssim: q.mean_ssim,
            effective_fps: fps.effective_fps,
        }
    }
}

/// Runs `policy` over episodes in order until at least `min_points`
/// decisions were taken (all episodes when `min_points` is 0).
pub fn evaluate_policy(
    episodes: &[&Episode],
    policy: &mut dyn Policy,
    sched: &SchedulerConfig,
    min_points: usize,
) -> Result<(Vec<DecisionTrace>, PolicyEvaluation)> {
    let mut traces = Vec::new();
    let mut points = 0;
    let mut base_fps = 30.0;
    for e in episodes {
        base_fps = e.base_fps;
        let run = run_episode(e, policy, sched)?;
        points += run.traces.iter().map(|t| t.decisions.len()).sum::<usize>();
        traces.extend(run.traces);
        if min_points > 0 && points >= min_points {
            break;
        }
    }
    if points < min_points {
        return Err(Error::InvalidArgument(format!(
            "only {points} decisions available, {min_points} required"
        )));
    }
    let eval = PolicyEvaluation::from_traces(&traces, base_fps);
    Ok((traces, eval))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out: String,
    pub train_decisions: usize,
    pub test: PolicyEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_warp_ratio: f64,
}

/// Leave-one-family-out: for each family, train on the others and test on it.
pub fn cross_validate(
    families: &[(String, Vec<Episode>)],
    config: &TrainConfig,
    sched: &SchedulerConfig,
) -> Result<CrossValidation> {
    if families.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 2 families, got {}",
            families.len()
        )));
    }
    let mut folds = Vec::with_capacity(families.len());
    for (k, (name, held)) in families.iter().enumerate() {
        let train: Vec<&Episode> = families
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, (_, eps))| eps.iter())
            .collect();
        let agent = train_on_episodes(&train, config, sched)?;
        let train_decisions = agent.points;
        let mut policy = agent.into_policy("trained");
        let test: Vec<&Episode> = held.iter().collect();
        let (_, eval) = evaluate_policy(&test, &mut policy, sched, config.test_points)
            .map_err(|e| Error::InvalidArgument(format!("family {name}: {e}")))?;
        folds.push(FoldResult {
            held_out: name.clone(),
            train_decisions,
            test: eval,
        });
    }
    let n = folds.len() as f64;
    Ok(CrossValidation {
        mean_psnr: folds.iter().map(|f| f.test.mean_psnr).sum::<f64>() / n,
        mean_ssim: folds.iter().map(|f| f.test.mean_ssim).sum::<f64>() / n,
        mean_warp_ratio: folds.iter().map(|f| f.test.warp_ratio).sum::<f64>() / n,
        folds,
    })
}
