//! Training core: dense networks with analytic gradients, masked PPO,
//! factored-advantage PPO with a residual gate, and a causal world model
//! baseline.

pub mod buffer;
pub mod checkpoint;
pub mod cwm;
pub mod gae;
pub mod gradcheck;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod policy;
pub mod train;

use thiserror::Error;

pub use buffer::{prepare, Prepared, RolloutBuffer, Step};
pub use gae::{blend_advantage, factor_returns_advantages, gae, normalize};
pub use loss::{calibration_loss, GateMode, LossCoeffs, LossParts, Terms, UpdateMode};
pub use metrics::{calibration_metrics, CalibrationMetrics, UpdateMetrics};
pub use policy::{beta_from_weights, NetConfig, PolicyNet, PolicyOutput, K};
pub use train::{cgfa_update, ppo_update, Algo, TrainCoeffs, TrainConfig, Trainer};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no legal actions")]
    EmptyMask,
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("malformed rollout buffer: {0}")]
    BadBuffer(String),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] cmtg_core::env::EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
