//! Reward schemes: sparse terminal, potential-based shaped, and dense
//! event-based, plus the per-factor reward channel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Outcome, StepEvents};
use crate::scm::{CausalVars, Var, NUM_FACTORS};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("negative event count for {0}")]
    NegativeEvent(&'static str),
    #[error("gamma must be in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("unknown reward scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScheme {
    Sparse,
    #[default]
    Shaped,
    /// Shaped plus per-step event bonuses.
    Dense,
}

impl RewardScheme {
    pub const ALL: [RewardScheme; 3] = [RewardScheme::Sparse, RewardScheme::Shaped, RewardScheme::Dense];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardScheme::Sparse => "sparse",
            RewardScheme::Shaped => "shaped",
            RewardScheme::Dense => "dense",
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardScheme {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RewardScheme::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| RewardError::UnknownScheme(s.to_string()))
    }
}

/// Potential coefficients over (mana_t, card_adv, board_press, tempo,
/// life_buffer) and the discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingCoeffs {
    pub alpha: [f64; 5],
    pub gamma: f64,
}

impl Default for ShapingCoeffs {
    fn default() -> Self {
        ShapingCoeffs { alpha: [0.02, 0.05, 0.05, 0.1, 0.05], gamma: 0.995 }
    }
}

impl ShapingCoeffs {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !self.alpha.iter().all(|a| a.is_finite()) {
            return Err(RewardError::NonFinite);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RewardError::BadGamma(self.gamma));
        }
        Ok(())
    }
}

/// Per-unit weights for damage dealt, cards drawn and creatures entered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseCoeffs {
    pub damage: f64,
    pub draw: f64,
    pub creature: f64,
}

impl Default for DenseCoeffs {
    fn default() -> Self {
        DenseCoeffs { damage: 0.1, draw: 0.05, creature: 0.05 }
    }
}

pub const POTENTIAL_VARS: [Var; 5] = [Var::ManaT, Var::CardAdv, Var::BoardPress, Var::Tempo, Var::LifeBuffer];

pub fn potential(vars: &CausalVars, coeffs: &ShapingCoeffs) -> f64 {
    POTENTIAL_VARS
        .iter()
        .zip(coeffs.alpha.iter())
        .map(|(v, a)| a * vars.get(*v))
        .sum()
}

/// `gamma * phi(s') - phi(s) + terminal`.
pub fn shaped_reward(vars_t: &CausalVars, vars_t1: &CausalVars, terminal: f64, coeffs: &ShapingCoeffs) -> f64 {
    shaped_from_potentials(potential(vars_t, coeffs), potential(vars_t1, coeffs), terminal, coeffs.gamma)
}

pub fn shaped_from_potentials(phi_t: f64, phi_t1: f64, terminal: f64, gamma: f64) -> f64 {
    gamma * phi_t1 - phi_t + terminal
}

pub fn sparse_reward(outcome: Outcome, perspective: usize) -> f64 {
    match outcome.winner() {
        Some(w) if w == perspective => 1.0,
        Some(_) => -1.0,
        None => 0.0,
    }
}

pub fn dense_reward(events: &StepEvents, weights: &DenseCoeffs) -> Result<f64, RewardError> {
    if events.damage_to_opponent < 0 {
        return Err(RewardError::NegativeEvent("damage_to_opponent"));
    }
    if events.cards_drawn < 0 {
        return Err(RewardError::NegativeEvent("cards_drawn"));
    }
    if events.creatures_entered < 0 {
        return Err(RewardError::NegativeEvent("creatures_entered"));
    }
    Ok(weights.damage * events.damage_to_opponent as f64
        + weights.draw * events.cards_drawn as f64
        + weights.creature * events.creatures_entered as f64)
}

/// Per-factor change `phi_k(s') - phi_k(s)`.
pub fn factor_rewards(phi_t: &[f64; NUM_FACTORS], phi_t1: &[f64; NUM_FACTORS]) -> [f64; NUM_FACTORS] {
    let mut r = [0.0; NUM_FACTORS];
    for k in 0..NUM_FACTORS {
        r[k] = phi_t1[k] - phi_t[k];
    }
    r
}

/// Full configuration of the scalar reward channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardConfig {
    pub scheme: RewardScheme,
    pub shaping: ShapingCoeffs,
    pub dense: DenseCoeffs,
}

impl RewardConfig {
    /// Scalar reward of one agent transition. `terminal` is the sparse
    /// outcome reward (0 on non-terminal steps).
    pub fn reward(
        &self,
        vars_t: &CausalVars,
        vars_t1: &CausalVars,
        terminal: f64,
        events: &StepEvents,
    ) -> Result<f64, RewardError> {
        match self.scheme {
            RewardScheme::Sparse => Ok(terminal),
            RewardScheme::Shaped => Ok(shaped_reward(vars_t, vars_t1, terminal, &self.shaping)),
            RewardScheme::Dense => {
                Ok(shaped_reward(vars_t, vars_t1, terminal, &self.shaping) + dense_reward(events, &self.dense)?)
            }
        }
    }
}
