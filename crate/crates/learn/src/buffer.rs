use serde::{Deserialize, Serialize};

use crate::gae::{blend_with_weights, factor_returns_advantages, gae, norm_stats};
use crate::policy::K;
use crate::LearnError;

/// One agent decision as recorded during a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Nonzero entries of the observation.
    pub obs: Vec<(u32, f32)>,
    pub legal: Vec<usize>,
    pub action: usize,
    pub logp: f64,
    pub reward: f64,
    /// The episode ended with this step.
    pub done: bool,
    pub r_factor: [f64; K],
    pub eps: [f64; K],
    pub v: f64,
    pub vk: [f64; K],
    pub g: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub steps: Vec<Step>,
    /// Critic values of the state after the last step; unused when that
    /// step was terminal.
    pub bootstrap_v: f64,
    pub bootstrap_vk: [f64; K],
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.bootstrap_v = 0.0;
        self.bootstrap_vk = [0.0; K];
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        for (t, s) in self.steps.iter().enumerate() {
            if s.legal.is_empty() || !s.legal.contains(&s.action) {
                return Err(LearnError::BadBuffer(format!("step {t}: action {} not legal", s.action)));
            }
            let finite = s.logp.is_finite()
                && s.reward.is_finite()
                && s.v.is_finite()
                && s.g.is_finite()
                && s.r_factor.iter().chain(&s.eps).chain(&s.vk).all(|x| x.is_finite());
            if !finite {
                return Err(LearnError::BadBuffer(format!("step {t}: non-finite entry")));
            }
        }
        Ok(())
    }
}

/// Rollout-level quantities computed once before the update epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub a_scalar: Vec<f64>,
    pub returns: Vec<f64>,
    pub a_k: Vec<[f64; K]>,
    pub g_k: Vec<[f64; K]>,
    /// Advantage fed to the surrogate, after normalisation.
    pub a_used: Vec<f64>,
    /// Normalisation constants applied to the raw blend.
    pub norm: (f64, f64),
}

/// Compute GAE for both channels and the normalised advantage. `blend`
/// gives, per step, the gate value to blend with (`None` means plain
/// scalar advantages) and the mixture weights.
pub fn prepare(
    buf: &RolloutBuffer,
    gamma: f64,
    lambda: f64,
    blend: Option<(&dyn Fn(usize) -> f64, &[f64])>,
) -> Result<Prepared, LearnError> {
    let rewards: Vec<f64> = buf.steps.iter().map(|s| s.reward).collect();
    let values: Vec<f64> = buf.steps.iter().map(|s| s.v).collect();
    let dones: Vec<bool> = buf.steps.iter().map(|s| s.done).collect();
    let (a_scalar, returns) = gae(&rewards, &values, &dones, buf.bootstrap_v, gamma, lambda)?;
    let rf: Vec<[f64; K]> = buf.steps.iter().map(|s| s.r_factor).collect();
    let vk: Vec<[f64; K]> = buf.steps.iter().map(|s| s.vk).collect();
    let (g_k, a_k) = factor_returns_advantages(&rf, &vk, &dones, &buf.bootstrap_vk, gamma, lambda)?;
    let raw: Vec<f64> = match blend {
        None => a_scalar.clone(),
        Some((gate, w)) => (0..a_scalar.len()).map(|t| blend_with_weights(a_scalar[t], &a_k[t], gate(t), w)).collect(),
    };
    let norm = norm_stats(&raw);
    let a_used = raw.iter().map(|x| (x - norm.0) / norm.1).collect();
    Ok(Prepared { a_scalar, returns, a_k, g_k, a_used, norm })
}
