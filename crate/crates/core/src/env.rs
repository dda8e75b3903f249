//! Single-agent environment: one learning seat against a scripted opponent.
//!
//! Opponent decisions are played out inside [`Env::step`], so every
//! transition returned runs from one agent decision to the next (or to
//! the end of the game). Rewards, factor rewards and intervention effects
//! are all from the agent's perspective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::ActionMask;
use crate::agents::{AgentError, ScriptedAgent};
use crate::cards::{deck_for, Archetype, CardError, Catalog};
use crate::engine::{new_game_with_catalog, EngineError, EventLog, GameState, Outcome, StepEvents, DEFAULT_TURN_CAP};
use crate::observe::encode;
use crate::rewards::{factor_rewards, sparse_reward, RewardConfig, RewardError};
use crate::scm::{extract, CausalVars, Scm, ScmError, WinProbLearner, NUM_FACTORS};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Card(#[from] CardError),
    #[error("no opponents configured")]
    NoOpponents,
    #[error("opponent index {0} out of range")]
    BadOpponent(usize),
    #[error("episode is over; call reset")]
    Done,
    #[error("episode exceeded {0} decisions")]
    Runaway(usize),
}

/// A fixed opponent: its policy and the deck it plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opponent {
    pub agent: ScriptedAgent,
    pub deck: Archetype,
}

impl Opponent {
    pub fn heuristic(deck: Archetype) -> Self {
        Opponent { agent: ScriptedAgent::heuristic(deck), deck }
    }

    pub fn random(deck: Archetype) -> Self {
        Opponent { agent: ScriptedAgent::Random, deck }
    }

    pub fn name(&self) -> String {
        format!("{}@{}", self.agent.name(), self.deck.as_str())
    }
}

/// How the opponent of each training episode is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentSchedule {
    /// Always the first listed opponent.
    Fixed,
    /// Uniform over the list, drawn from the episode seed.
    #[default]
    UniformPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub agent_deck: Archetype,
    pub opponents: Vec<Opponent>,
    pub schedule: OpponentSchedule,
    pub reward: RewardConfig,
    pub turn_cap: u32,
    /// Alternate the agent between seat 0 and seat 1 each episode.
    pub alternate_seats: bool,
}

impl EnvConfig {
    /// The agent's deck against the heuristic of every archetype.
    pub fn heuristic_pool(agent_deck: Archetype) -> Self {
        EnvConfig {
            agent_deck,
            opponents: Archetype::ALL.iter().map(|&a| Opponent::heuristic(a)).collect(),
            schedule: OpponentSchedule::UniformPool,
            reward: RewardConfig::default(),
            turn_cap: DEFAULT_TURN_CAP,
            alternate_seats: true,
        }
    }
}

/// Upper bound on decisions in one episode before giving up.
pub const MAX_EPISODE_DECISIONS: usize = 50_000;

/// One agent transition.
#[derive(Debug, Clone)]
pub struct Transition {
    /// Observation at the next agent decision (or terminal state).
    pub obs: Vec<f32>,
    pub mask: ActionMask,
    pub reward: f64,
    pub done: bool,
    pub outcome: Option<Outcome>,
    pub phi: [f64; NUM_FACTORS],
    pub phi_next: [f64; NUM_FACTORS],
    pub r_factor: [f64; NUM_FACTORS],
    /// SCM-predicted factor change of the action taken.
    pub eps: [f64; NUM_FACTORS],
    pub events: StepEvents,
    /// Sparse terminal component alone (0 until the game ends).
    pub terminal_reward: f64,
}

/// Episode-level setup for [`Env::reset_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub seed: u64,
    pub agent_seat: usize,
    pub opponent: usize,
}

pub struct Env {
    pub config: EnvConfig,
    pub learner: WinProbLearner,
    catalog: std::sync::Arc<Catalog>,
    state: Option<GameState>,
    vars: Option<CausalVars>,
    agent_seat: usize,
    opponent: usize,
    opp_rng: ChaCha8Rng,
    episodes: u64,
    decisions: usize,
    done: bool,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        if config.opponents.is_empty() {
            return Err(EnvError::NoOpponents);
        }
        Ok(Env {
            config,
            learner: WinProbLearner::default(),
            catalog: Catalog::bundled(),
            state: None,
            vars: None,
            agent_seat: 0,
            opponent: 0,
            opp_rng: ChaCha8Rng::seed_from_u64(0),
            episodes: 0,
            decisions: 0,
            done: true,
        })
    }

    pub fn state(&self) -> Option<&GameState> {
        self.state.as_ref()
    }

    pub fn agent_seat(&self) -> usize {
        self.agent_seat
    }

    pub fn opponent_index(&self) -> usize {
        self.opponent
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Episode setup derived from `seed` and the running episode count.
    pub fn spec_for(&self, seed: u64) -> EpisodeSpec {
        let agent_seat = if self.config.alternate_seats { (self.episodes % 2) as usize } else { 0 };
        let opponent = match self.config.schedule {
            OpponentSchedule::Fixed => 0,
            OpponentSchedule::UniformPool => {
                let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x0990_0e17);
                r.gen_range(0..self.config.opponents.len())
            }
        };
        EpisodeSpec { seed, agent_seat, opponent }
    }

    pub fn reset(&mut self, seed: u64) -> Result<(Vec<f32>, ActionMask), EnvError> {
        let spec = self.spec_for(seed);
        self.reset_with(spec)
    }

    pub fn reset_with(&mut self, spec: EpisodeSpec) -> Result<(Vec<f32>, ActionMask), EnvError> {
        let opp = *self.config.opponents.get(spec.opponent).ok_or(EnvError::BadOpponent(spec.opponent))?;
        let mine = deck_for(self.config.agent_deck, &self.catalog)?;
        let theirs = deck_for(opp.deck, &self.catalog)?;
        let (d0, d1) = if spec.agent_seat == 0 { (&mine, &theirs) } else { (&theirs, &mine) };
        let state = new_game_with_catalog(self.catalog.clone(), d0, d1, spec.seed, self.config.turn_cap)?;
        self.agent_seat = spec.agent_seat;
        self.opponent = spec.opponent;
        self.opp_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
        self.state = Some(state);
        self.episodes += 1;
        self.decisions = 0;
        self.done = false;
        let mut sink = EventLog::default();
        self.play_opponent(&mut sink)?;
        let st = self.state.as_ref().unwrap();
        self.vars = Some(extract(st, self.agent_seat, &self.learner.weights));
        if st.outcome.is_some() {
            // Cannot happen with the bundled decks; kept total anyway.
            self.done = true;
            return Ok((encode(st, self.agent_seat), ActionMask::default()));
        }
        Ok((encode(st, self.agent_seat), st.mask()?))
    }

    fn play_opponent(&mut self, ev: &mut EventLog) -> Result<(), EnvError> {
        let opp = self.config.opponents[self.opponent];
        let state = self.state.as_mut().unwrap();
        while state.outcome.is_none() && state.decision_player != self.agent_seat {
            self.decisions += 1;
            if self.decisions > MAX_EPISODE_DECISIONS {
                return Err(EnvError::Runaway(MAX_EPISODE_DECISIONS));
            }
            let a = opp.agent.act(state, &mut self.opp_rng)?;
            let r = state.step(a)?;
            ev.merge(&r.events);
        }
        Ok(())
    }

    /// Apply the agent's action and play the opponent until the agent's
    /// next decision.
    pub fn step(&mut self, action: usize) -> Result<Transition, EnvError> {
        if self.done {
            return Err(EnvError::Done);
        }
        let me = self.agent_seat;
        let scm = Scm::new(self.learner.weights);
        let state = self.state.as_mut().unwrap();
        let vars_t = self.vars.expect("vars set on reset");
        let eps = scm.intervention_effect(state, action)?;
        let mut ev = EventLog::default();
        let r = state.step(action)?;
        ev.merge(&r.events);
        self.decisions += 1;
        self.play_opponent(&mut ev)?;
        let state = self.state.as_ref().unwrap();
        let vars_t1 = extract(state, me, &self.learner.weights);
        let outcome = state.outcome;
        let terminal = outcome.map(|o| sparse_reward(o, me)).unwrap_or(0.0);
        let events = ev.for_player(me);
        let reward = self.config.reward.reward(&vars_t, &vars_t1, terminal, &events)?;
        let (phi, phi_next) = (vars_t.factors(), vars_t1.factors());
        let done = outcome.is_some();
        let obs = encode(state, me);
        let mask = if done { ActionMask::default() } else { state.mask()? };
        if let Some(o) = outcome {
            self.learner.record(phi_next, o.winner() == Some(me));
            self.done = true;
        }
        self.vars = Some(vars_t1);
        Ok(Transition {
            obs,
            mask,
            reward,
            done,
            outcome,
            phi,
            phi_next,
            r_factor: factor_rewards(&phi, &phi_next),
            eps,
            events,
            terminal_reward: terminal,
        })
    }

    /// Causal variables at the current agent decision.
    pub fn vars(&self) -> Option<&CausalVars> {
        self.vars.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }
}
