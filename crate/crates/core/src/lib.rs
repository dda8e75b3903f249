//! Simplified Magic: The Gathering arena for causal reinforcement learning.
//!
//! The crate covers the game itself (card pool, rules engine, action and
//! observation encodings), the structural causal model over strategic
//! variables, the reward schemes, the scripted reference agents, and an
//! environment wrapper that ties them together for training.

pub mod actions;
pub mod agents;
pub mod cards;
pub mod engine;
pub mod env;
pub mod observe;
pub mod rewards;
pub mod scm;

pub use actions::{ActionMask, Category, Decision, NUM_ACTIONS};
pub use cards::{Archetype, CardId, Catalog, Deck};
pub use engine::{new_game, GameState, Outcome, Phase, StepEvents};
