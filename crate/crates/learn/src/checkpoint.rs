use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cmtg_core::scm::WinWeights;

use crate::cwm::Cwm;
use crate::optim::Adam;
use crate::policy::PolicyNet;
use crate::train::{GreedyAgent, Streams, TrainConfig, Trainer};
use crate::LearnError;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to evaluate a learner or continue training it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub net: PolicyNet,
    pub opt: Adam,
    pub cwm: Option<Cwm>,
    pub weights: WinWeights,
    pub streams: Streams,
    pub updates: usize,
    pub env_steps: u64,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: t.config.clone(),
            net: t.net.clone(),
            opt: t.opt.clone(),
            cwm: t.cwm.clone(),
            weights: t.env.learner.weights,
            streams: t.streams.clone(),
            updates: t.updates,
            env_steps: t.env_steps,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let bytes = fs::read(path).map_err(|e| LearnError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_slice(&bytes)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(LearnError::Checkpoint(format!("version {} (expected {CHECKPOINT_VERSION})", ck.version)));
        }
        if ck.net.theta.len() != ck.opt.m.len() || !ck.net.theta.iter().all(|x| x.is_finite()) {
            return Err(LearnError::Checkpoint("parameter vector inconsistent".into()));
        }
        Ok(ck)
    }

    /// Fail unless the checkpoint was trained with `config`.
    pub fn check_config(&self, config: &TrainConfig) -> Result<(), LearnError> {
        if &self.config != config {
            return Err(LearnError::Checkpoint("config differs from the checkpoint's".into()));
        }
        Ok(())
    }

    pub fn agent(&self) -> GreedyAgent {
        GreedyAgent { net: self.net.clone(), cwm: self.cwm.clone(), weights: self.weights }
    }
}
