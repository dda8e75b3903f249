//! Deterministic matches between two agents on paired seed lists.
//!
//! Game seeds depend only on `(seed, episode)`, never on the agents, so
//! any two agents run on the same match face identical shuffles. Seats
//! alternate with the episode index so each agent moves first half the time.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cmtg_core::agents::ScriptedAgent;
use cmtg_core::cards::{deck_for, Archetype, Catalog};
use cmtg_core::engine::trace::trace_digest;
use cmtg_core::engine::{new_game_with_catalog, state_hash, GameState, Outcome, TraceRecord};
use cmtg_core::env::MAX_EPISODE_DECISIONS;
use cmtg_core::rewards::RewardScheme;
use cmtg_learn::checkpoint::Checkpoint;
use cmtg_learn::train::GreedyAgent;
use cmtg_stats::wilson_interval;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{mix64, HarnessError, Result};

/// How to obtain a player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Random,
    /// The scripted heuristic of the agent's own deck.
    Heuristic,
    /// A trained policy, played greedily.
    Checkpoint { path: PathBuf },
}

impl AgentSpec {
    pub fn name(&self) -> String {
        match self {
            AgentSpec::Random => "random".into(),
            AgentSpec::Heuristic => "heuristic".into(),
            AgentSpec::Checkpoint { path } => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "checkpoint".into())
            }
        }
    }
}

/// A resolved, ready-to-act player.
#[derive(Debug, Clone)]
pub enum Player {
    Scripted(ScriptedAgent),
    Learned(Box<GreedyAgent>),
}

impl Player {
    pub fn resolve(spec: &AgentSpec, deck: Archetype) -> Result<Self> {
        match spec {
            AgentSpec::Random => Ok(Player::Scripted(ScriptedAgent::Random)),
            AgentSpec::Heuristic => Ok(Player::Scripted(ScriptedAgent::heuristic(deck))),
            AgentSpec::Checkpoint { path } => Ok(Player::Learned(Box::new(load_agent(path, deck)?))),
        }
    }

    pub fn act(&self, state: &GameState, seat: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        match self {
            Player::Scripted(a) => Ok(a.act(state, rng)?),
            Player::Learned(a) => Ok(a.act(state, seat)?),
        }
    }
}

/// Load a checkpoint and check it was trained on `deck`.
pub fn load_agent(path: &Path, deck: Archetype) -> Result<GreedyAgent> {
    if !path.exists() {
        return Err(HarnessError::MissingCheckpoint(path.to_path_buf()));
    }
    let ck = Checkpoint::load(path)?;
    if ck.config.env.agent_deck != deck {
        return Err(HarnessError::ConfigMismatch {
            path: path.to_path_buf(),
            reason: format!("trained on {}, asked to play {}", ck.config.env.agent_deck.as_str(), deck.as_str()),
        });
    }
    Ok(ck.agent())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub agent_a: AgentSpec,
    pub agent_b: AgentSpec,
    pub deck_a: Archetype,
    pub deck_b: Archetype,
    /// Episodes per seed.
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub turn_cap: u32,
    /// Recorded for provenance; evaluation outcomes do not depend on it.
    pub reward: RewardScheme,
}

impl MatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(HarnessError::NoEpisodes);
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::NoSeeds);
        }
        let mut seen = BTreeSet::new();
        for &s in &self.seeds {
            if !seen.insert(s) {
                return Err(HarnessError::DuplicateSeed(s));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeResult {
    WinA,
    WinB,
    Draw,
}

impl fmt::Display for EpisodeResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpisodeResult::WinA => "win_a",
            EpisodeResult::WinB => "win_b",
            EpisodeResult::Draw => "draw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: usize,
    pub game_seed: u64,
    /// Seat of agent A (0 moves first).
    pub a_seat: usize,
    pub result: EpisodeResult,
    pub turns: u32,
    /// Decisions taken by both players.
    pub length: usize,
    /// Hex digest of the ordered (state hash, action) trace.
    pub trace_hash: String,
}

/// Game seed of episode `i` under `seed`.
pub fn game_seed(seed: u64, episode: usize) -> u64 {
    mix64(seed ^ mix64(episode as u64 ^ 0x6a09_e667_f3bc_c908))
}

/// Play one game. `trace` receives every decision when given.
#[allow(clippy::too_many_arguments)]
pub fn play_episode(
    catalog: &Arc<Catalog>,
    a: &Player,
    b: &Player,
    deck_a: Archetype,
    deck_b: Archetype,
    game_seed: u64,
    a_seat: usize,
    turn_cap: u32,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<(Outcome, u32, usize, u64)> {
    let da = deck_for(deck_a, catalog)?;
    let db = deck_for(deck_b, catalog)?;
    let (d0, d1) = if a_seat == 0 { (&da, &db) } else { (&db, &da) };
    let mut g = new_game_with_catalog(catalog.clone(), d0, d1, game_seed, turn_cap)?;
    let players = if a_seat == 0 { [a, b] } else { [b, a] };
    let mut rngs =
        [ChaCha8Rng::seed_from_u64(mix64(game_seed ^ 0xa0)), ChaCha8Rng::seed_from_u64(mix64(game_seed ^ 0xb1))];
    let mut records = Vec::new();
    while g.outcome.is_none() {
        if records.len() >= MAX_EPISODE_DECISIONS {
            return Err(HarnessError::Runaway(MAX_EPISODE_DECISIONS));
        }
        let seat = g.decision_player;
        let (turn, phase) = (g.turn, g.phase);
        let action = players[seat].act(&g, seat, &mut rngs[seat])?;
        let r = g.step(action)?;
        records.push(TraceRecord { turn, phase, decision_player: seat, action, events: r.events, state_hash: state_hash(&g) });
    }
    let digest = trace_digest(&records);
    let length = records.len();
    if let Some(t) = trace.as_mut() {
        t.extend(records);
    }
    Ok((g.outcome.unwrap(), g.turn, length, digest))
}

/// All episodes of one seed, in order.
#[allow(clippy::too_many_arguments)]
pub fn play_seed(
    catalog: &Arc<Catalog>,
    a: &Player,
    b: &Player,
    deck_a: Archetype,
    deck_b: Archetype,
    seed: u64,
    episodes: usize,
    turn_cap: u32,
) -> Result<Vec<EpisodeRow>> {
    (0..episodes)
        .map(|i| {
            let gs = game_seed(seed, i);
            let a_seat = i % 2;
            let (outcome, turns, length, digest) = play_episode(catalog, a, b, deck_a, deck_b, gs, a_seat, turn_cap, None)?;
            let result = match outcome.winner() {
                Some(w) if w == a_seat => EpisodeResult::WinA,
                Some(_) => EpisodeResult::WinB,
                None => EpisodeResult::Draw,
            };
            Ok(EpisodeRow {
                seed,
                episode: i,
                game_seed: gs,
                a_seat,
                result,
                turns,
                length,
                trace_hash: format!("{digest:016x}"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub spec: MatchSpec,
    pub rows: Vec<EpisodeRow>,
}

/// Resolve both agents and play the match. Seeds run in parallel; each
/// seed's episodes run sequentially.
pub fn run_match(spec: &MatchSpec) -> Result<MatchResult> {
    spec.validate()?;
    let a = Player::resolve(&spec.agent_a, spec.deck_a)?;
    let b = Player::resolve(&spec.agent_b, spec.deck_b)?;
    run_match_with(spec, &a, &b)
}

pub fn run_match_with(spec: &MatchSpec, a: &Player, b: &Player) -> Result<MatchResult> {
    spec.validate()?;
    let catalog = Catalog::bundled();
    let per_seed: Vec<Vec<EpisodeRow>> = spec
        .seeds
        .par_iter()
        .map(|&s| play_seed(&catalog, a, b, spec.deck_a, spec.deck_b, s, spec.episodes, spec.turn_cap))
        .collect::<Result<_>>()?;
    Ok(MatchResult { spec: spec.clone(), rows: per_seed.into_iter().flatten().collect() })
}

impl MatchResult {
    pub fn tally(&self) -> Tally {
        Tally::from_rows(&self.rows)
    }

    pub fn tally_for_seed(&self, seed: u64) -> Tally {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.seed == seed).cloned().collect();
        Tally::from_rows(&rows)
    }

    pub fn trace_hashes(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.trace_hash.as_str()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(&self.rows, path)
    }
}

pub fn write_rows(rows: &[EpisodeRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Win, draw and loss counts from agent A's side. Draws are excluded from
/// the win rate and reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
}

impl Tally {
    pub fn from_rows(rows: &[EpisodeRow]) -> Self {
        let mut t = Tally::default();
        for r in rows {
            t.add(r.result);
        }
        t
    }

    pub fn add(&mut self, r: EpisodeResult) {
        match r {
            EpisodeResult::WinA => self.wins += 1,
            EpisodeResult::WinB => self.losses += 1,
            EpisodeResult::Draw => self.draws += 1,
        }
    }

    pub fn merge(&mut self, o: &Tally) {
        self.wins += o.wins;
        self.draws += o.draws;
        self.losses += o.losses;
    }

    pub fn games(&self) -> u64 {
        self.wins + self.draws + self.losses
    }

    pub fn decisive(&self) -> u64 {
        self.wins + self.losses
    }

    /// `wins / (wins + losses)`; `None` when every game was drawn.
    pub fn win_rate(&self) -> Option<f64> {
        (self.decisive() > 0).then(|| self.wins as f64 / self.decisive() as f64)
    }

    pub fn wilson(&self, confidence: f64) -> Result<Option<(f64, f64)>> {
        if self.decisive() == 0 {
            return Ok(None);
        }
        Ok(Some(wilson_interval(self.wins, self.decisive(), confidence)?))
    }
}
