//! Q-network decision predictor and its DQN training machinery.

mod agent;
mod checkpoint;
mod network;
mod reward;
mod train;

pub use agent::{
    cross_validate, evaluate_policy, train_on_episodes, CrossValidation, FoldResult, LearningAgent, PolicyEvaluation,
};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{Activations, Dense, QNetwork, LAYER_SHAPES};
pub use reward::{compute_reward, reward_from_quality, RewardConfig, PSNR_AT_UNIT_MSE};
pub use train::{
    greedy_action, select_action, select_action_with_margin, td_loss, td_loss_and_grad, td_target, train_step,
    training_log_csv, Experience, ReplayBuffer, StepStats, TrainConfig, TrainLogRow, Trainer,
};
