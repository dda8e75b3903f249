//! Experiment orchestration: paired-seed matches, the headline, transfer
//! and ablation protocols, reproducibility manifests and report files.

pub mod config;
pub mod manifest;
pub mod matches;
pub mod protocols;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{HarnessConfig, Profile};
pub use manifest::{write_manifest, Manifest, ManifestCheck, RunContext};
pub use matches::{run_match, AgentSpec, EpisodeResult, EpisodeRow, MatchResult, MatchSpec, Player, Tally};
pub use protocols::{assemble_ablation, assemble_headline, assemble_transfer, evaluate_pool, FoldEval, PoolEval};
pub use report::{report, CalibrationRow, CaseStudyRow, Format, StatReport, SummaryRow, TransferRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("match needs at least one episode")]
    NoEpisodes,
    #[error("match needs at least one seed")]
    NoSeeds,
    #[error("duplicate seed {0}")]
    DuplicateSeed(u64),
    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("checkpoint {path} does not match: {reason}")]
    ConfigMismatch { path: PathBuf, reason: String },
    #[error("missing cell: {0}")]
    MissingCell(String),
    #[error("comparison is not paired: {0}")]
    Unpaired(String),
    #[error("transfer needs 5 folds per agent, {agent} has {got}")]
    FoldCount { agent: String, got: usize },
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
    #[error("report is empty")]
    EmptyReport,
    #[error("report invariant violated: {0}")]
    Invariant(String),
    #[error("cannot read lockfile {path}: {source}")]
    Lockfile { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("episode exceeded {0} decisions")]
    Runaway(usize),
    #[error(transparent)]
    Engine(#[from] cmtg_core::engine::EngineError),
    #[error(transparent)]
    Card(#[from] cmtg_core::cards::CardError),
    #[error(transparent)]
    Agent(#[from] cmtg_core::agents::AgentError),
    #[error(transparent)]
    Env(#[from] cmtg_core::env::EnvError),
    #[error(transparent)]
    Learn(#[from] cmtg_learn::LearnError),
    #[error(transparent)]
    Stat(#[from] cmtg_stats::StatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// SplitMix64 finaliser, used to derive per-episode game seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
