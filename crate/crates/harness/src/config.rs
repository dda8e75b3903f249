//! Run configuration: a TOML file with CLI overrides on top.

use std::path::{Path, PathBuf};

use cmtg_core::cards::Archetype;
use cmtg_core::env::{Opponent, OpponentSchedule};
use cmtg_core::rewards::RewardScheme;
use cmtg_learn::train::{TrainConfig, Variant};
use cmtg_stats::CiMethod;
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// [64, 64] networks, 512-step rollouts, 5e4 steps.
    #[default]
    Desk,
    /// [512, 256] networks, 2048-step rollouts, 1e6 steps.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub run_dir: PathBuf,
    pub profile: Profile,
    pub seeds: Vec<u64>,
    pub episodes_per_opponent: usize,
    pub turn_cap: u32,
    /// Overrides the profile's step budget.
    pub total_steps: Option<u64>,
    pub reward: RewardScheme,
    pub schedule: OpponentSchedule,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Method for the bootstrap CI of mean per-cell rates.
    pub ci_method: CiMethod,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            run_dir: PathBuf::from("runs/default"),
            profile: Profile::Desk,
            seeds: vec![0, 1],
            episodes_per_opponent: 30,
            turn_cap: cmtg_core::engine::DEFAULT_TURN_CAP,
            total_steps: None,
            reward: RewardScheme::Shaped,
            schedule: OpponentSchedule::UniformPool,
            bootstrap_resamples: 10_000,
            bootstrap_seed: 0x0b00_7571,
            ci_method: CiMethod::Percentile,
        }
    }
}

impl HarnessConfig {
    /// Seven seeds, 300 episodes per opponent, the reference profile.
    pub fn full_protocol() -> Self {
        HarnessConfig {
            profile: Profile::Full,
            seeds: (0..7).collect(),
            episodes_per_opponent: 300,
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    /// Training configuration for one (deck, variant, seed) cell against
    /// `opponents`.
    pub fn train_config(&self, deck: Archetype, variant: Variant, seed: u64, opponents: Vec<Opponent>) -> TrainConfig {
        let mut c = match self.profile {
            Profile::Desk => TrainConfig::desk(deck, variant, seed),
            Profile::Full => TrainConfig::full(deck, variant, seed),
        };
        c.env.opponents = opponents;
        c.env.schedule = self.schedule;
        c.env.reward.scheme = self.reward;
        c.env.turn_cap = self.turn_cap;
        if let Some(s) = self.total_steps {
            c.total_steps = s;
        }
        c
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.run_dir.join("checkpoints")
    }
}

/// The in-distribution pool: the heuristic agent of every archetype.
pub fn heuristic_pool() -> Vec<Opponent> {
    Archetype::ALL.iter().map(|&a| Opponent::heuristic(a)).collect()
}
