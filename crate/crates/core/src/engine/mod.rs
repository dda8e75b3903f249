//! Deterministic two-player game state machine.
//!
//! A game is driven one flat action at a time through [`GameState::step`].
//! Multi-part decisions (mulligan bottoming, targeting, mana payment, block
//! assignment, discard) are modelled as a [`Pending`] cursor on the state so
//! that every decision is a single masked action. There is no priority
//! stack; instants are castable in a fixed set of windows:
//!
//! * the active player's main phases,
//! * the defending player's declare-blockers step,
//! * a response window opened for the opponent when a spell is cast and the
//!   opponent holds an affordable counterspell (counterspells are castable
//!   only there).
//!
//! Libraries are stored top-last (`library.last()` is the next draw). All
//! randomness comes from one ChaCha8 stream: at game start the first
//! player's library is shuffled, then the second player's; each mulligan
//! reshuffles the mulliganing player's library. Shuffles are Fisher-Yates.

mod combat;
pub mod mana;
pub mod trace;

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{
    decode, ActionMask, Category, Decision, BATTLEFIELD_SLOTS, HAND_SLOTS, TARGET_OPP_PLAYER,
    TARGET_OWN_PLAYER,
};
use crate::cards::{CardError, CardId, CardKind, Catalog, Color, ColorSet, Deck, Effect, ManaCost, TargetSpec};

pub use trace::{TraceRecord, TraceWriter};

pub const STARTING_LIFE: i32 = 20;
pub const OPENING_HAND: usize = 7;
pub const MAX_MULLIGANS: u8 = 3;
pub const MAX_HAND_END_OF_TURN: usize = 7;
pub const DEFAULT_TURN_CAP: u32 = 30;
/// Decisions a player may undo per turn (abandoning a cast, withdrawing an
/// attacker, leaving block assignment). Once spent, the undo options are no
/// longer offered, so every priority window terminates.
pub const MAX_UNDOS_PER_TURN: u32 = 4;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("turn cap must be at least 1")]
    InvalidTurnCap,
    #[error("invalid deck: {0}")]
    InvalidDeck(#[from] CardError),
    #[error("game is already over")]
    Terminal,
    #[error("illegal action {index} ({decision})")]
    IllegalAction { index: usize, decision: String },
    #[error("action index {0} out of range")]
    OutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Beginning,
    Main1,
    CombatDeclareAttackers,
    CombatDeclareBlockers,
    CombatDamage,
    Main2,
    End,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Beginning,
        Phase::Main1,
        Phase::CombatDeclareAttackers,
        Phase::CombatDeclareBlockers,
        Phase::CombatDamage,
        Phase::Main2,
        Phase::End,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Beginning => "beginning",
            Phase::Main1 => "main1",
            Phase::CombatDeclareAttackers => "combat_declare_attackers",
            Phase::CombatDeclareBlockers => "combat_declare_blockers",
            Phase::CombatDamage => "combat_damage",
            Phase::Main2 => "main2",
            Phase::End => "end",
        }
    }

    pub fn is_main(self) -> bool {
        matches!(self, Phase::Main1 | Phase::Main2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    WinP0,
    WinP1,
    Draw,
}

impl Outcome {
    pub fn winner(self) -> Option<usize> {
        match self {
            Outcome::WinP0 => Some(0),
            Outcome::WinP1 => Some(1),
            Outcome::Draw => None,
        }
    }

    pub fn win_for(player: usize) -> Outcome {
        if player == 0 {
            Outcome::WinP0
        } else {
            Outcome::WinP1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenStats {
    pub power: i32,
    pub toughness: i32,
    pub colors: ColorSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permanent {
    /// Card this permanent is, or for tokens the card that created it.
    pub card: CardId,
    /// Per-player entry ordinal; `ordinal % 60` is the action slot.
    pub ordinal: u32,
    pub tapped: bool,
    pub summoning_sick: bool,
    pub damage_marked: i32,
    pub attacking: bool,
    /// Ordinal of the attacker this creature blocks.
    pub blocking: Option<u32>,
    pub token: Option<TokenStats>,
    pub temp_power: i32,
    pub temp_toughness: i32,
    pub activated_this_turn: bool,
}

impl Permanent {
    pub fn slot(&self) -> usize {
        (self.ordinal as usize) % BATTLEFIELD_SLOTS
    }

    pub fn is_creature(&self, cat: &Catalog) -> bool {
        self.token.is_some() || cat.get(self.card).kind == CardKind::Creature
    }

    pub fn is_land(&self, cat: &Catalog) -> bool {
        self.token.is_none() && cat.get(self.card).kind == CardKind::Land
    }

    pub fn kind(&self, cat: &Catalog) -> CardKind {
        if self.token.is_some() {
            CardKind::Creature
        } else {
            cat.get(self.card).kind
        }
    }

    pub fn base_power(&self, cat: &Catalog) -> i32 {
        match self.token {
            Some(t) => t.power,
            None => cat.get(self.card).power.unwrap_or(0),
        }
    }

    pub fn base_toughness(&self, cat: &Catalog) -> i32 {
        match self.token {
            Some(t) => t.toughness,
            None => cat.get(self.card).toughness.unwrap_or(0),
        }
    }

    /// Current power including until-end-of-turn modifiers; 0 for
    /// non-creatures.
    pub fn power(&self, cat: &Catalog) -> i32 {
        if self.is_creature(cat) {
            self.base_power(cat) + self.temp_power
        } else {
            0
        }
    }

    pub fn toughness(&self, cat: &Catalog) -> i32 {
        if self.is_creature(cat) {
            self.base_toughness(cat) + self.temp_toughness
        } else {
            0
        }
    }

    pub fn colors(&self, cat: &Catalog) -> ColorSet {
        match self.token {
            Some(t) => t.colors,
            None => cat.get(self.card).colors(),
        }
    }

    pub fn is_threat(&self, cat: &Catalog) -> bool {
        self.token.is_some() || cat.get(self.card).flags.is_threat
    }

    pub fn is_mana_producer(&self, cat: &Catalog) -> bool {
        self.token.is_none() && cat.get(self.card).flags.mana_producer
    }

    pub fn has_haste(&self, cat: &Catalog) -> bool {
        self.token.is_none() && cat.get(self.card).keywords.haste
    }

    pub fn has_lifelink(&self, cat: &Catalog) -> bool {
        self.token.is_none() && cat.get(self.card).keywords.lifelink
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerState {
    pub life: i32,
    /// Top of library is the last element.
    pub library: Vec<CardId>,
    pub hand: Vec<CardId>,
    pub battlefield: Vec<Permanent>,
    pub graveyard: Vec<CardId>,
    pub mulligans_taken: u8,
    pub next_ordinal: u32,
    pub drew_from_empty: bool,
}

impl PlayerState {
    fn new(library: Vec<CardId>) -> Self {
        PlayerState {
            life: STARTING_LIFE,
            library,
            hand: Vec::new(),
            battlefield: Vec::new(),
            graveyard: Vec::new(),
            mulligans_taken: 0,
            next_ordinal: 0,
            drew_from_empty: false,
        }
    }

    pub fn permanent(&self, ordinal: u32) -> Option<&Permanent> {
        self.battlefield.iter().find(|p| p.ordinal == ordinal)
    }

    pub fn permanent_mut(&mut self, ordinal: u32) -> Option<&mut Permanent> {
        self.battlefield.iter_mut().find(|p| p.ordinal == ordinal)
    }

    pub fn permanent_at_slot(&self, slot: usize) -> Option<&Permanent> {
        self.battlefield.iter().find(|p| p.slot() == slot)
    }

    /// Card instances owned: library, hand, non-token permanents, graveyard.
    pub fn card_instances(&self) -> usize {
        self.library.len()
            + self.hand.len()
            + self.graveyard.len()
            + self.battlefield.iter().filter(|p| p.token.is_none()).count()
    }

    fn allocate_ordinal(&mut self) -> Option<u32> {
        if self.battlefield.len() >= BATTLEFIELD_SLOTS {
            return None;
        }
        let mut o = self.next_ordinal;
        while self.battlefield.iter().any(|p| p.slot() == (o as usize) % BATTLEFIELD_SLOTS) {
            o += 1;
        }
        self.next_ordinal = o + 1;
        Some(o)
    }

    pub fn has_room(&self) -> bool {
        self.battlefield.len() < BATTLEFIELD_SLOTS
    }
}

/// A chosen target, in absolute player terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetRef {
    Permanent { controller: usize, ordinal: u32 },
    Player(usize),
}

/// A spell being put together: chosen from hand, not yet paid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpellCtx {
    pub caster: usize,
    pub card: CardId,
    pub hand_pos: usize,
    pub target: Option<TargetRef>,
}

/// A paid spell that has left the hand and awaits resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CastSpell {
    pub caster: usize,
    pub card: CardId,
    pub target: Option<TargetRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pending {
    Mulligan { player: usize },
    Bottom { player: usize, remaining: u8 },
    Target { spell: SpellCtx },
    Payment {
        spell: SpellCtx,
        remaining: ManaCost,
        tapped: Vec<u32>,
        /// The spell this payment counters, when paying for a counterspell.
        countering: Option<Box<CastSpell>>,
    },
    Response { spell: CastSpell },
    BlockAssign { attacker: u32 },
    Discard { player: usize },
}

/// Raw per-player event counts for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventLog {
    pub damage_taken: [i32; 2],
    pub cards_drawn: [u32; 2],
    pub creatures_entered: [u32; 2],
    pub permanents_lost: [u32; 2],
    pub life_gained: [i32; 2],
}

impl EventLog {
    pub fn merge(&mut self, other: &EventLog) {
        for p in 0..2 {
            self.damage_taken[p] += other.damage_taken[p];
            self.cards_drawn[p] += other.cards_drawn[p];
            self.creatures_entered[p] += other.creatures_entered[p];
            self.permanents_lost[p] += other.permanents_lost[p];
            self.life_gained[p] += other.life_gained[p];
        }
    }

    /// Events as seen by `player`.
    pub fn for_player(&self, player: usize) -> StepEvents {
        let opp = 1 - player;
        StepEvents {
            damage_to_opponent: self.damage_taken[opp],
            cards_drawn: self.cards_drawn[player] as i32,
            creatures_entered: self.creatures_entered[player] as i32,
            permanents_destroyed: self.permanents_lost[opp] as i32,
            life_gained: self.life_gained[player],
            damage_taken: self.damage_taken[player],
        }
    }
}

/// Perspective-relative step signals used by the dense reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepEvents {
    pub damage_to_opponent: i32,
    pub cards_drawn: i32,
    pub creatures_entered: i32,
    /// Opponent permanents that left the battlefield.
    pub permanents_destroyed: i32,
    pub life_gained: i32,
    pub damage_taken: i32,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub events: EventLog,
    pub outcome: Option<Outcome>,
}

#[derive(Clone)]
pub struct GameState {
    pub players: [PlayerState; 2],
    pub turn: u32,
    pub phase: Phase,
    pub active_player: usize,
    pub decision_player: usize,
    pub pending: Option<Pending>,
    pub rng: ChaCha8Rng,
    pub turn_cap: u32,
    pub land_played_this_turn: [bool; 2],
    /// Mana spent this turn, reset at each turn start.
    pub mana_spent: [u32; 2],
    /// Undo budget used this turn, reset at each turn start.
    pub undos: [u32; 2],
    pub outcome: Option<Outcome>,
    /// Skip decision points whose only legal action is PASS.
    pub auto_pass: bool,
    catalog: Arc<Catalog>,
}

impl std::fmt::Debug for GameState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GameState")
            .field("turn", &self.turn)
            .field("phase", &self.phase)
            .field("active_player", &self.active_player)
            .field("decision_player", &self.decision_player)
            .field("pending", &self.pending)
            .field("life", &[self.players[0].life, self.players[1].life])
            .field("outcome", &self.outcome)
            .finish()
    }
}

impl PartialEq for GameState {
    fn eq(&self, other: &Self) -> bool {
        self.players == other.players
            && self.turn == other.turn
            && self.phase == other.phase
            && self.active_player == other.active_player
            && self.decision_player == other.decision_player
            && self.pending == other.pending
            && self.rng == other.rng
            && self.turn_cap == other.turn_cap
            && self.land_played_this_turn == other.land_played_this_turn
            && self.mana_spent == other.mana_spent
            && self.undos == other.undos
            && self.outcome == other.outcome
            && self.auto_pass == other.auto_pass
    }
}

impl Hash for GameState {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.players.hash(h);
        self.turn.hash(h);
        self.phase.hash(h);
        self.active_player.hash(h);
        self.decision_player.hash(h);
        self.pending.hash(h);
        self.rng.get_seed().hash(h);
        self.rng.get_stream().hash(h);
        self.rng.get_word_pos().hash(h);
        self.turn_cap.hash(h);
        self.land_played_this_turn.hash(h);
        self.mana_spent.hash(h);
        self.undos.hash(h);
        self.outcome.hash(h);
        self.auto_pass.hash(h);
    }
}

/// Stable 64-bit FNV-1a hash of a state (independent of process and
/// platform hash seeds).
pub fn state_hash(state: &GameState) -> u64 {
    let mut h = fnv::FnvHasher::default();
    state.hash(&mut h);
    h.finish()
}

/// Start a game: both libraries shuffled from `seed`, seven cards each,
/// player 0 to decide on a mulligan.
pub fn new_game(deck_a: &Deck, deck_b: &Deck, seed: u64, turn_cap: u32) -> Result<GameState, EngineError> {
    new_game_with_catalog(Catalog::bundled(), deck_a, deck_b, seed, turn_cap)
}

pub fn new_game_with_catalog(
    catalog: Arc<Catalog>,
    deck_a: &Deck,
    deck_b: &Deck,
    seed: u64,
    turn_cap: u32,
) -> Result<GameState, EngineError> {
    if turn_cap < 1 {
        return Err(EngineError::InvalidTurnCap);
    }
    deck_a.validate()?;
    deck_b.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lib_a = deck_a.cards();
    let mut lib_b = deck_b.cards();
    lib_a.shuffle(&mut rng);
    lib_b.shuffle(&mut rng);
    let mut state = GameState {
        players: [PlayerState::new(lib_a), PlayerState::new(lib_b)],
        turn: 1,
        phase: Phase::Beginning,
        active_player: 0,
        decision_player: 0,
        pending: Some(Pending::Mulligan { player: 0 }),
        rng,
        turn_cap,
        land_played_this_turn: [false; 2],
        mana_spent: [0; 2],
        undos: [0; 2],
        outcome: None,
        auto_pass: true,
        catalog,
    };
    let mut sink = EventLog::default();
    for p in 0..2 {
        for _ in 0..OPENING_HAND {
            state.draw(p, &mut sink);
        }
    }
    state.refresh_decision_player();
    Ok(state)
}

impl GameState {
    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn catalog_arc(&self) -> Arc<Catalog> {
        self.catalog.clone()
    }

    pub fn is_terminal(&self) -> Option<Outcome> {
        self.outcome
    }

    /// Cards of `player` that have been cast and await resolution.
    pub fn stack_cards(&self, player: usize) -> usize {
        match &self.pending {
            Some(Pending::Response { spell }) => usize::from(spell.caster == player),
            Some(Pending::Payment { countering: Some(orig), .. }) => usize::from(orig.caster == player),
            _ => 0,
        }
    }

    /// Every card instance `player` owns, wherever it is (60 for a legal deck).
    pub fn zone_total(&self, player: usize) -> usize {
        self.players[player].card_instances() + self.stack_cards(player)
    }

    pub fn opponent(player: usize) -> usize {
        1 - player
    }

    /// Player whose turn-structure decisions apply in the current phase
    /// with no pending cursor.
    fn phase_decider(&self) -> usize {
        if self.phase == Phase::CombatDeclareBlockers {
            1 - self.active_player
        } else {
            self.active_player
        }
    }

    fn refresh_decision_player(&mut self) {
        self.decision_player = match &self.pending {
            Some(Pending::Mulligan { player })
            | Some(Pending::Bottom { player, .. })
            | Some(Pending::Discard { player }) => *player,
            Some(Pending::Target { spell }) | Some(Pending::Payment { spell, .. }) => spell.caster,
            Some(Pending::Response { spell }) => 1 - spell.caster,
            Some(Pending::BlockAssign { .. }) => 1 - self.active_player,
            None => self.phase_decider(),
        };
    }

    /// Recompute the outcome from life totals, empty-library draws and the
    /// turn cap.
    pub fn compute_outcome(&self) -> Option<Outcome> {
        let dead = |p: usize| self.players[p].life <= 0 || self.players[p].drew_from_empty;
        match (dead(0), dead(1)) {
            (true, true) => Some(Outcome::Draw),
            (true, false) => Some(Outcome::WinP1),
            (false, true) => Some(Outcome::WinP0),
            (false, false) if self.turn > self.turn_cap => Some(Outcome::Draw),
            _ => None,
        }
    }

    /// Re-derive cached fields after direct edits (used by tests and
    /// scenario construction).
    pub fn refresh(&mut self) {
        self.outcome = self.compute_outcome();
        self.refresh_decision_player();
    }

    /// Put a card onto `player`'s battlefield directly. Returns its ordinal,
    /// or `None` when all 60 slots are taken.
    pub fn add_permanent(&mut self, player: usize, card: CardId, summoning_sick: bool) -> Option<u32> {
        let ordinal = self.players[player].allocate_ordinal()?;
        self.players[player].battlefield.push(Permanent {
            card,
            ordinal,
            tapped: false,
            summoning_sick,
            damage_marked: 0,
            attacking: false,
            blocking: None,
            token: None,
            temp_power: 0,
            temp_toughness: 0,
            activated_this_turn: false,
        });
        Some(ordinal)
    }

    fn add_token(&mut self, player: usize, source: CardId, stats: TokenStats) -> Option<u32> {
        let ordinal = self.add_permanent(player, source, true)?;
        self.players[player].permanent_mut(ordinal).unwrap().token = Some(stats);
        Some(ordinal)
    }

    fn draw(&mut self, player: usize, ev: &mut EventLog) {
        match self.players[player].library.pop() {
            Some(c) => {
                self.players[player].hand.push(c);
                ev.cards_drawn[player] += 1;
            }
            None => self.players[player].drew_from_empty = true,
        }
    }

    /// Flat action indices legal now.
    pub fn legal_actions(&self) -> Result<Vec<usize>, EngineError> {
        Ok(self.legal_decisions()?.into_iter().map(Decision::index).collect())
    }

    pub fn mask(&self) -> Result<ActionMask, EngineError> {
        Ok(ActionMask::from_indices(self.legal_actions()?))
    }

    /// Every (category, slot) pair legal now, sorted by action index.
    pub fn legal_decisions(&self) -> Result<Vec<Decision>, EngineError> {
        if self.outcome.is_some() {
            return Err(EngineError::Terminal);
        }
        let mut out = Vec::new();
        let d = |c: Category, s: usize| Decision::new(c, s);
        match &self.pending {
            Some(Pending::Mulligan { player }) => {
                out.push(d(Category::Keep, 0));
                if self.players[*player].mulligans_taken < MAX_MULLIGANS {
                    out.push(d(Category::Mulligan, 0));
                }
            }
            Some(Pending::Bottom { player, .. }) => {
                for i in 0..self.players[*player].hand.len().min(HAND_SLOTS) {
                    out.push(d(Category::Bottom, i));
                }
            }
            Some(Pending::Discard { player }) => {
                for i in 0..self.players[*player].hand.len().min(HAND_SLOTS) {
                    out.push(d(Category::Discard, i));
                }
            }
            Some(Pending::Target { spell }) => {
                let spec = self.catalog.get(spell.card).chosen_target().expect("targeted spell");
                for t in self.legal_targets(spell.caster, spec) {
                    out.push(d(Category::Target, self.target_slot(spell.caster, t)));
                }
                if self.can_undo(spell.caster) {
                    out.push(d(Category::Cancel, 0));
                }
            }
            Some(Pending::Payment { spell, remaining, .. }) => {
                if remaining.is_zero() {
                    out.push(d(Category::Confirm, 0));
                } else {
                    out.push(d(Category::AutoPay, 0));
                    let convoke = self.catalog.get(spell.card).has_convoke();
                    let srcs = mana::sources(&self.players[spell.caster], &self.catalog, convoke);
                    for i in 0..srcs.len() {
                        if mana::assign(remaining, &srcs, i).is_some() {
                            out.push(d(Category::ManaSource, (srcs[i].ordinal as usize) % BATTLEFIELD_SLOTS));
                        }
                    }
                }
                if self.can_undo(spell.caster) {
                    out.push(d(Category::Cancel, 0));
                }
            }
            Some(Pending::Response { spell }) => {
                out.push(d(Category::Pass, 0));
                let responder = 1 - spell.caster;
                for (i, &card) in self.players[responder].hand.iter().enumerate().take(HAND_SLOTS) {
                    let def = self.catalog.get(card);
                    if def.is_counterspell() && self.affordable(responder, card) {
                        out.push(d(Category::CastInstant, i));
                    }
                }
            }
            Some(Pending::BlockAssign { .. }) => {
                let defender = 1 - self.active_player;
                for perm in &self.players[defender].battlefield {
                    if self.can_block(perm) {
                        out.push(d(Category::BlockSelectBlocker, perm.slot()));
                    }
                }
                if self.can_undo(defender) {
                    out.push(d(Category::Cancel, 0));
                }
            }
            None => self.phase_decisions(&mut out),
        }
        out.sort_by_key(|x| x.index());
        Ok(out)
    }

    fn can_undo(&self, player: usize) -> bool {
        self.undos[player] < MAX_UNDOS_PER_TURN
    }

    fn phase_decisions(&self, out: &mut Vec<Decision>) {
        let p = self.phase_decider();
        let d = Decision::new;
        match self.phase {
            Phase::Main1 | Phase::Main2 => {
                out.push(d(Category::Pass, 0));
                let player = &self.players[p];
                for (i, &card) in player.hand.iter().enumerate().take(HAND_SLOTS) {
                    let def = self.catalog.get(card);
                    if def.is_land() {
                        if !self.land_played_this_turn[p] && player.has_room() {
                            out.push(d(Category::PlayLand, i));
                        }
                    } else if self.castable(p, card) {
                        let cat = if def.has_instant_timing() {
                            Category::CastInstant
                        } else {
                            Category::CastSorcery
                        };
                        out.push(d(cat, i));
                    }
                }
                for perm in &player.battlefield {
                    if self.can_activate(perm) {
                        out.push(d(Category::Activate, perm.slot()));
                    }
                }
            }
            Phase::CombatDeclareAttackers => {
                out.push(d(Category::Pass, 0));
                for perm in &self.players[p].battlefield {
                    if self.can_attack(perm) && (!perm.attacking || self.can_undo(p)) {
                        out.push(d(Category::AttackToggle, perm.slot()));
                    }
                }
            }
            Phase::CombatDeclareBlockers => {
                out.push(d(Category::Pass, 0));
                let attacker_side = &self.players[self.active_player];
                let has_blocker = self.players[p].battlefield.iter().any(|b| self.can_block(b));
                if has_blocker {
                    for perm in &attacker_side.battlefield {
                        if perm.attacking {
                            out.push(d(Category::BlockSelectAttacker, perm.slot()));
                        }
                    }
                }
                for (i, &card) in self.players[p].hand.iter().enumerate().take(HAND_SLOTS) {
                    let def = self.catalog.get(card);
                    if def.has_instant_timing() && !def.is_land() && self.castable(p, card) {
                        out.push(d(Category::CastInstant, i));
                    }
                }
            }
            Phase::End => out.push(d(Category::Pass, 0)),
            // Transient phases advance without a decision.
            Phase::Beginning | Phase::CombatDamage => out.push(d(Category::Pass, 0)),
        }
    }

    fn can_attack(&self, perm: &Permanent) -> bool {
        perm.is_creature(&self.catalog)
            && !perm.tapped
            && (!perm.summoning_sick || perm.has_haste(&self.catalog))
    }

    fn can_block(&self, perm: &Permanent) -> bool {
        perm.is_creature(&self.catalog) && !perm.tapped && perm.blocking.is_none()
    }

    fn can_activate(&self, perm: &Permanent) -> bool {
        perm.token.is_none()
            && !perm.activated_this_turn
            && self.catalog.get(perm.card).activated_token().is_some()
    }

    /// Castable outside a response window: not a counterspell, affordable,
    /// has a legal target when it needs one, and has room if it is a
    /// permanent.
    fn castable(&self, player: usize, card: CardId) -> bool {
        let def = self.catalog.get(card);
        if def.is_land() || def.is_counterspell() {
            return false;
        }
        if def.is_permanent() && !self.players[player].has_room() {
            return false;
        }
        if let Some(spec) = def.chosen_target() {
            if self.legal_targets(player, spec).is_empty() {
                return false;
            }
        }
        self.affordable(player, card)
    }

    pub fn affordable(&self, player: usize, card: CardId) -> bool {
        let def = self.catalog.get(card);
        let srcs = mana::sources(&self.players[player], &self.catalog, def.has_convoke());
        let colors: Vec<ColorSet> = srcs.iter().map(|s| s.colors).collect();
        mana::payable(&def.cost, &colors)
    }

    /// Legal targets of `spec` for a spell cast by `player`, own side first.
    pub fn legal_targets(&self, player: usize, spec: TargetSpec) -> Vec<TargetRef> {
        let cat = &self.catalog;
        let mut out = Vec::new();
        for side in [player, 1 - player] {
            for perm in &self.players[side].battlefield {
                let ok = match spec {
                    TargetSpec::AnyTarget | TargetSpec::Creature => perm.is_creature(cat),
                    TargetSpec::CreatureMaxStats(n) => {
                        perm.is_creature(cat) && perm.power(cat) + perm.toughness(cat) <= n
                    }
                    TargetSpec::OpponentNonlandPermanent => side != player && !perm.is_land(cat),
                    TargetSpec::AllCreatures => false,
                };
                if ok {
                    out.push(TargetRef::Permanent { controller: side, ordinal: perm.ordinal });
                }
            }
        }
        if spec == TargetSpec::AnyTarget {
            out.push(TargetRef::Player(player));
            out.push(TargetRef::Player(1 - player));
        }
        out
    }

    /// TARGET slot of `t` relative to `decider`.
    pub fn target_slot(&self, decider: usize, t: TargetRef) -> usize {
        match t {
            TargetRef::Permanent { controller, ordinal } => {
                let slot = (ordinal as usize) % BATTLEFIELD_SLOTS;
                if controller == decider {
                    slot
                } else {
                    BATTLEFIELD_SLOTS + slot
                }
            }
            TargetRef::Player(p) if p == decider => TARGET_OWN_PLAYER,
            TargetRef::Player(_) => TARGET_OPP_PLAYER,
        }
    }

    /// Inverse of [`GameState::target_slot`] against the current board.
    pub fn target_from_slot(&self, decider: usize, slot: usize) -> Option<TargetRef> {
        match slot {
            TARGET_OWN_PLAYER => Some(TargetRef::Player(decider)),
            TARGET_OPP_PLAYER => Some(TargetRef::Player(1 - decider)),
            s if s < BATTLEFIELD_SLOTS => self.players[decider]
                .permanent_at_slot(s)
                .map(|p| TargetRef::Permanent { controller: decider, ordinal: p.ordinal }),
            s if s < 2 * BATTLEFIELD_SLOTS => self.players[1 - decider]
                .permanent_at_slot(s - BATTLEFIELD_SLOTS)
                .map(|p| TargetRef::Permanent { controller: 1 - decider, ordinal: p.ordinal }),
            _ => None,
        }
    }

    /// Apply one legal action, run state-based checks, then advance through
    /// transient phases (and PASS-only decision points when `auto_pass`).
    pub fn step(&mut self, action: usize) -> Result<StepResult, EngineError> {
        if self.outcome.is_some() {
            return Err(EngineError::Terminal);
        }
        let decision = decode(action).map_err(|_| EngineError::OutOfRange(action))?;
        if !self.legal_decisions()?.contains(&decision) {
            return Err(EngineError::IllegalAction { index: action, decision: decision.to_string() });
        }
        let mut ev = EventLog::default();
        self.apply(decision, &mut ev);
        self.state_based_actions(&mut ev);
        self.advance(&mut ev);
        self.refresh_decision_player();
        Ok(StepResult { events: ev, outcome: self.outcome })
    }

    fn apply(&mut self, dec: Decision, ev: &mut EventLog) {
        match self.pending.take() {
            Some(Pending::Mulligan { player }) => self.apply_mulligan(player, dec.category),
            Some(Pending::Bottom { player, remaining }) => {
                let card = self.players[player].hand.remove(dec.slot);
                self.players[player].library.insert(0, card);
                if remaining > 1 {
                    self.pending = Some(Pending::Bottom { player, remaining: remaining - 1 });
                } else {
                    self.finish_mulligan(player);
                }
            }
            Some(Pending::Discard { player }) => {
                let card = self.players[player].hand.remove(dec.slot);
                self.players[player].graveyard.push(card);
                if self.players[player].hand.len() > MAX_HAND_END_OF_TURN {
                    self.pending = Some(Pending::Discard { player });
                }
            }
            Some(Pending::Target { mut spell }) => match dec.category {
                Category::Cancel => self.undos[spell.caster] += 1,
                _ => {
                    spell.target = self.target_from_slot(spell.caster, dec.slot);
                    self.begin_payment(spell, None);
                }
            },
            Some(Pending::Payment { spell, remaining, tapped, countering }) => {
                self.apply_payment(dec, spell, remaining, tapped, countering, ev)
            }
            Some(Pending::Response { spell }) => match dec.category {
                Category::Pass => self.resolve(spell, ev),
                _ => {
                    let responder = 1 - spell.caster;
                    let card = self.players[responder].hand[dec.slot];
                    let ctx = SpellCtx { caster: responder, card, hand_pos: dec.slot, target: None };
                    self.begin_payment(ctx, Some(Box::new(spell)));
                }
            },
            Some(Pending::BlockAssign { attacker }) => {
                if dec.category == Category::Cancel {
                    self.undos[1 - self.active_player] += 1;
                }
                if dec.category == Category::BlockSelectBlocker {
                    let defender = 1 - self.active_player;
                    let blocker = self.players[defender]
                        .battlefield
                        .iter_mut()
                        .find(|p| p.slot() == dec.slot)
                        .expect("legal blocker");
                    blocker.blocking = Some(attacker);
                }
            }
            None => self.apply_phase_decision(dec, ev),
        }
    }

    fn apply_mulligan(&mut self, player: usize, cat: Category) {
        if cat == Category::Mulligan {
            let ps = &mut self.players[player];
            ps.library.append(&mut ps.hand);
            ps.library.shuffle(&mut self.rng);
            ps.mulligans_taken += 1;
            let mut sink = EventLog::default();
            for _ in 0..OPENING_HAND {
                self.draw(player, &mut sink);
            }
            self.pending = Some(Pending::Mulligan { player });
        } else {
            let n = self.players[player].mulligans_taken;
            if n > 0 {
                self.pending = Some(Pending::Bottom { player, remaining: n });
            } else {
                self.finish_mulligan(player);
            }
        }
    }

    fn finish_mulligan(&mut self, player: usize) {
        if player == 0 {
            self.pending = Some(Pending::Mulligan { player: 1 });
        } else {
            self.pending = None;
            self.phase = Phase::Beginning;
            let mut sink = EventLog::default();
            self.begin_turn(&mut sink);
        }
    }

    fn begin_payment(&mut self, spell: SpellCtx, countering: Option<Box<CastSpell>>) {
        let remaining = self.catalog.get(spell.card).cost;
        self.pending = Some(Pending::Payment { spell, remaining, tapped: Vec::new(), countering });
    }

    fn apply_payment(
        &mut self,
        dec: Decision,
        spell: SpellCtx,
        mut remaining: ManaCost,
        mut tapped: Vec<u32>,
        countering: Option<Box<CastSpell>>,
        ev: &mut EventLog,
    ) {
        let caster = spell.caster;
        let convoke = self.catalog.get(spell.card).has_convoke();
        match dec.category {
            Category::Cancel => {
                self.undos[caster] += 1;
                for o in tapped {
                    if let Some(p) = self.players[caster].permanent_mut(o) {
                        p.tapped = false;
                    }
                }
                if let Some(orig) = countering {
                    self.pending = Some(Pending::Response { spell: *orig });
                }
            }
            Category::ManaSource => {
                let srcs = mana::sources(&self.players[caster], &self.catalog, convoke);
                let idx = srcs
                    .iter()
                    .position(|s| (s.ordinal as usize) % BATTLEFIELD_SLOTS == dec.slot)
                    .expect("legal source");
                let a = mana::assign(&remaining, &srcs, idx).expect("legal assignment");
                mana::apply_assignment(&mut remaining, a);
                self.tap(caster, srcs[idx].ordinal);
                tapped.push(srcs[idx].ordinal);
                self.pending = Some(Pending::Payment { spell, remaining, tapped, countering });
            }
            Category::AutoPay => {
                let mut srcs = mana::sources(&self.players[caster], &self.catalog, convoke);
                mana::auto_pay_order(&mut srcs);
                while !remaining.is_zero() {
                    let Some(idx) = (0..srcs.len()).find(|&i| mana::assign(&remaining, &srcs, i).is_some())
                    else {
                        break;
                    };
                    let a = mana::assign(&remaining, &srcs, idx).unwrap();
                    mana::apply_assignment(&mut remaining, a);
                    self.tap(caster, srcs[idx].ordinal);
                    tapped.push(srcs[idx].ordinal);
                    srcs.remove(idx);
                }
                self.pending = Some(Pending::Payment { spell, remaining, tapped, countering });
            }
            Category::Confirm => self.commit_cast(spell, countering, ev),
            _ => unreachable!("payment decisions are filtered by legality"),
        }
    }

    fn tap(&mut self, player: usize, ordinal: u32) {
        if let Some(p) = self.players[player].permanent_mut(ordinal) {
            p.tapped = true;
        }
    }

    /// Paid spell leaves the hand; prowess triggers; the opponent may get a
    /// counter window; otherwise it resolves.
    fn commit_cast(&mut self, spell: SpellCtx, countering: Option<Box<CastSpell>>, ev: &mut EventLog) {
        let caster = spell.caster;
        let card = self.players[caster].hand.remove(spell.hand_pos);
        debug_assert_eq!(card, spell.card);
        let def = self.catalog.get(card).clone();
        self.mana_spent[caster] += def.cost.total();
        if !def.is_creature() {
            let cat = self.catalog.clone();
            for perm in self.players[caster].battlefield.iter_mut() {
                if perm.token.is_none() && cat.get(perm.card).has_prowess() {
                    perm.temp_power += 1;
                    perm.temp_toughness += 1;
                }
            }
        }
        let cast = CastSpell { caster, card, target: spell.target };
        if let Some(orig) = countering {
            // The counterspell resolves at once; the original is countered.
            self.players[orig.caster].graveyard.push(orig.card);
            self.players[caster].graveyard.push(card);
            return;
        }
        if self.opponent_can_counter(caster) {
            self.pending = Some(Pending::Response { spell: cast });
        } else {
            self.resolve(cast, ev);
        }
    }

    fn opponent_can_counter(&self, caster: usize) -> bool {
        let opp = 1 - caster;
        self.players[opp]
            .hand
            .iter()
            .take(HAND_SLOTS)
            .any(|&c| self.catalog.get(c).is_counterspell() && self.affordable(opp, c))
    }

    fn target_alive(&self, t: TargetRef) -> bool {
        match t {
            TargetRef::Player(_) => true,
            TargetRef::Permanent { controller, ordinal } => self.players[controller].permanent(ordinal).is_some(),
        }
    }

    fn resolve(&mut self, spell: CastSpell, ev: &mut EventLog) {
        let cat = self.catalog.clone();
        let def = cat.get(spell.card);
        let caster = spell.caster;
        if def.is_permanent() {
            match self.add_permanent(caster, spell.card, true) {
                Some(_) => {
                    if def.is_creature() {
                        ev.creatures_entered[caster] += 1;
                    }
                }
                None => {
                    self.players[caster].graveyard.push(spell.card);
                    return;
                }
            }
        }
        for effect in &def.effects {
            match *effect {
                Effect::DealDamage { amount, .. } => {
                    if let Some(t) = spell.target.filter(|&t| self.target_alive(t)) {
                        self.deal_damage(t, amount, ev);
                    }
                }
                Effect::Destroy { target: TargetSpec::AllCreatures } => {
                    for side in 0..2 {
                        let doomed: Vec<u32> = self.players[side]
                            .battlefield
                            .iter()
                            .filter(|p| p.is_creature(&cat))
                            .map(|p| p.ordinal)
                            .collect();
                        for o in doomed {
                            self.remove_permanent(side, o, ev);
                        }
                    }
                }
                Effect::Destroy { .. } => {
                    if let Some(TargetRef::Permanent { controller, ordinal }) =
                        spell.target.filter(|&t| self.target_alive(t))
                    {
                        self.remove_permanent(controller, ordinal, ev);
                    }
                }
                Effect::Pump { power, toughness, .. } => {
                    if let Some(TargetRef::Permanent { controller, ordinal }) =
                        spell.target.filter(|&t| self.target_alive(t))
                    {
                        let p = self.players[controller].permanent_mut(ordinal).unwrap();
                        p.temp_power += power;
                        p.temp_toughness += toughness;
                    }
                }
                Effect::Draw { count } => {
                    for _ in 0..count {
                        self.draw(caster, ev);
                    }
                }
                Effect::GainLife { amount } => {
                    self.players[caster].life += amount;
                    ev.life_gained[caster] += amount;
                }
                Effect::CreateToken { power, toughness, count, activated: false } => {
                    self.create_tokens(caster, spell.card, power, toughness, count, ev);
                }
                Effect::AddMana { ramp: true } => self.ramp_land(caster),
                Effect::CreateToken { activated: true, .. }
                | Effect::AddMana { ramp: false }
                | Effect::Counter
                | Effect::CostReductionConvoke
                | Effect::StaticProwessTrigger => {}
            }
        }
        if !def.is_permanent() {
            self.players[caster].graveyard.push(spell.card);
        }
    }

    fn create_tokens(&mut self, player: usize, source: CardId, power: i32, toughness: i32, count: u32, ev: &mut EventLog) {
        for _ in 0..count {
            let stats = TokenStats { power, toughness, colors: ColorSet::single(Color::W) };
            if self.add_token(player, source, stats).is_some() {
                ev.creatures_entered[player] += 1;
            }
        }
    }

    /// First land found from the top of the library enters tapped.
    fn ramp_land(&mut self, player: usize) {
        let cat = self.catalog.clone();
        let lib = &self.players[player].library;
        let Some(pos) = lib.iter().rposition(|&c| cat.get(c).is_land()) else {
            return;
        };
        if !self.players[player].has_room() {
            return;
        }
        let card = self.players[player].library.remove(pos);
        let o = self.add_permanent(player, card, false).unwrap();
        self.tap(player, o);
    }

    fn deal_damage(&mut self, target: TargetRef, amount: i32, ev: &mut EventLog) {
        let amount = amount.max(0);
        match target {
            TargetRef::Player(p) => {
                self.players[p].life -= amount;
                ev.damage_taken[p] += amount;
            }
            TargetRef::Permanent { controller, ordinal } => {
                if let Some(perm) = self.players[controller].permanent_mut(ordinal) {
                    perm.damage_marked += amount;
                }
            }
        }
    }

    /// Permanent leaves the battlefield; cards go to the graveyard, tokens
    /// cease to exist.
    fn remove_permanent(&mut self, player: usize, ordinal: u32, ev: &mut EventLog) {
        let ps = &mut self.players[player];
        let Some(pos) = ps.battlefield.iter().position(|p| p.ordinal == ordinal) else {
            return;
        };
        let perm = ps.battlefield.remove(pos);
        if perm.token.is_none() {
            ps.graveyard.push(perm.card);
        }
        ev.permanents_lost[player] += 1;
        // Blockers of a removed attacker stay blocking nothing.
        if perm.attacking {
            for b in self.players[1 - player].battlefield.iter_mut() {
                if b.blocking == Some(ordinal) {
                    b.blocking = None;
                }
            }
        }
    }

    fn state_based_actions(&mut self, ev: &mut EventLog) {
        let cat = self.catalog.clone();
        for side in 0..2 {
            let dead: Vec<u32> = self.players[side]
                .battlefield
                .iter()
                .filter(|p| p.is_creature(&cat) && (p.toughness(&cat) <= 0 || p.damage_marked >= p.toughness(&cat)))
                .map(|p| p.ordinal)
                .collect();
            for o in dead {
                self.remove_permanent(side, o, ev);
            }
        }
        self.outcome = self.compute_outcome();
    }

    fn apply_phase_decision(&mut self, dec: Decision, ev: &mut EventLog) {
        let p = self.phase_decider();
        match dec.category {
            Category::Pass => self.pass_phase(ev),
            Category::PlayLand => {
                let card = self.players[p].hand.remove(dec.slot);
                self.add_permanent(p, card, false);
                self.land_played_this_turn[p] = true;
            }
            Category::CastSorcery | Category::CastInstant => {
                let card = self.players[p].hand[dec.slot];
                let spell = SpellCtx { caster: p, card, hand_pos: dec.slot, target: None };
                if self.catalog.get(card).chosen_target().is_some() {
                    self.pending = Some(Pending::Target { spell });
                } else {
                    self.begin_payment(spell, None);
                }
            }
            Category::Activate => {
                let perm = self.players[p]
                    .battlefield
                    .iter_mut()
                    .find(|x| x.slot() == dec.slot)
                    .expect("legal activation");
                perm.activated_this_turn = true;
                let source = perm.card;
                let (pw, tg, n) = self.catalog.get(source).activated_token().unwrap();
                self.create_tokens(p, source, pw, tg, n, ev);
            }
            Category::AttackToggle => {
                let perm = self.players[p]
                    .battlefield
                    .iter_mut()
                    .find(|x| x.slot() == dec.slot)
                    .expect("legal attacker");
                if perm.attacking {
                    self.undos[p] += 1;
                }
                perm.attacking = !perm.attacking;
            }
            Category::BlockSelectAttacker => {
                let attacker = self.players[self.active_player]
                    .permanent_at_slot(dec.slot)
                    .expect("legal attacker")
                    .ordinal;
                self.pending = Some(Pending::BlockAssign { attacker });
            }
            _ => unreachable!("phase decisions are filtered by legality"),
        }
    }

    /// PASS with no pending cursor: leave the current phase.
    fn pass_phase(&mut self, ev: &mut EventLog) {
        match self.phase {
            Phase::Beginning => self.phase = Phase::Main1,
            Phase::Main1 => self.phase = Phase::CombatDeclareAttackers,
            Phase::CombatDeclareAttackers => {
                let a = self.active_player;
                let mut any = false;
                for perm in self.players[a].battlefield.iter_mut() {
                    if perm.attacking {
                        perm.tapped = true;
                        any = true;
                    }
                }
                self.phase = if any { Phase::CombatDeclareBlockers } else { Phase::Main2 };
            }
            Phase::CombatDeclareBlockers => self.phase = Phase::CombatDamage,
            Phase::CombatDamage => {
                self.resolve_combat(ev);
                self.phase = Phase::Main2;
            }
            Phase::Main2 => self.enter_end(),
            Phase::End => self.end_turn(ev),
        }
    }

    fn enter_end(&mut self) {
        self.phase = Phase::End;
        let a = self.active_player;
        if self.players[a].hand.len() > MAX_HAND_END_OF_TURN {
            self.pending = Some(Pending::Discard { player: a });
        }
    }

    fn end_turn(&mut self, ev: &mut EventLog) {
        for ps in self.players.iter_mut() {
            for perm in ps.battlefield.iter_mut() {
                perm.damage_marked = 0;
                perm.temp_power = 0;
                perm.temp_toughness = 0;
                perm.attacking = false;
                perm.blocking = None;
            }
        }
        self.turn += 1;
        self.outcome = self.compute_outcome();
        if self.outcome.is_some() {
            return;
        }
        self.active_player = 1 - self.active_player;
        self.phase = Phase::Beginning;
        self.begin_turn(ev);
    }

    /// Untap, clear summoning sickness, reset per-turn counters, draw.
    fn begin_turn(&mut self, ev: &mut EventLog) {
        let a = self.active_player;
        for perm in self.players[a].battlefield.iter_mut() {
            perm.tapped = false;
            perm.summoning_sick = false;
        }
        for ps in self.players.iter_mut() {
            for perm in ps.battlefield.iter_mut() {
                perm.activated_this_turn = false;
            }
        }
        self.land_played_this_turn = [false; 2];
        self.mana_spent = [0; 2];
        self.undos = [0; 2];
        // The first player skips the draw on the first turn of the game.
        if self.turn > 1 {
            self.draw(a, ev);
        }
        self.outcome = self.compute_outcome();
    }

    /// Drive the state forward while no real decision is available.
    fn advance(&mut self, ev: &mut EventLog) {
        loop {
            if self.outcome.is_some() || self.pending.is_some() {
                return;
            }
            match self.phase {
                Phase::Beginning => self.phase = Phase::Main1,
                Phase::CombatDamage => self.pass_phase(ev),
                _ => {
                    let only_pass = self.auto_pass && {
                        let mut v = Vec::new();
                        self.phase_decisions(&mut v);
                        v.len() == 1 && v[0].category == Category::Pass
                    };
                    if !only_pass {
                        return;
                    }
                    self.pass_phase(ev);
                    self.state_based_actions(ev);
                }
            }
        }
    }
}
