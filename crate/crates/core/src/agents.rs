//! Non-learned reference policies: uniform random and one scripted
//! heuristic per archetype.
//!
//! The heuristic works through a fixed priority list: mulligan by land
//! count, play a land, cast spells (removal first when the opponent is
//! ahead on board), activate, attack by aggression level, block to survive
//! and, under the life threshold, to trade favorably, then pass.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{encode, ActionMask, Category, Decision};
use crate::cards::{Archetype, CardDef, CardId, Catalog, Effect, TargetSpec};
use crate::engine::{GameState, Pending, Permanent, Phase, TargetRef};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("no legal action in mask")]
    EmptyMask,
    #[error("state is terminal")]
    Terminal,
}

/// Pick uniformly among the set bits of `mask`.
pub fn random_act<R: Rng + ?Sized>(mask: &ActionMask, rng: &mut R) -> Result<usize, AgentError> {
    let n = mask.popcount();
    if n == 0 {
        return Err(AgentError::EmptyMask);
    }
    let k = rng.gen_range(0..n);
    Ok(mask.iter_set().nth(k).expect("k < popcount"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggression {
    /// Hold back unless the attack is safe.
    Defensive,
    /// Attack when the attacker is not eaten for free.
    FavorableTrades,
    /// Attack with everything that can.
    AttackAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Keep a hand with this many lands (inclusive).
    pub mulligan_land_range: (u8, u8),
    pub aggression: Aggression,
    /// Block for value when own life is below this.
    pub defensive_life_threshold: Option<i32>,
}

impl HeuristicParams {
    pub fn for_archetype(a: Archetype) -> Self {
        match a {
            Archetype::MonoRedAggro | Archetype::BorosConvoke => HeuristicParams {
                mulligan_land_range: (1, 5),
                aggression: Aggression::AttackAll,
                defensive_life_threshold: None,
            },
            Archetype::DimirMidrange => HeuristicParams {
                mulligan_land_range: (2, 5),
                aggression: Aggression::FavorableTrades,
                defensive_life_threshold: Some(10),
            },
            Archetype::AzoriusControl => HeuristicParams {
                mulligan_land_range: (2, 5),
                aggression: Aggression::Defensive,
                defensive_life_threshold: Some(8),
            },
            Archetype::DomainRamp => HeuristicParams {
                mulligan_land_range: (2, 5),
                aggression: Aggression::Defensive,
                defensive_life_threshold: Some(10),
            },
        }
    }

    pub fn is_valid(&self) -> bool {
        self.mulligan_land_range.0 <= self.mulligan_land_range.1
    }
}

fn idx(c: Category, slot: usize) -> usize {
    encode(c, slot).expect("slot in range")
}

fn pass() -> usize {
    idx(Category::Pass, 0)
}

/// Scripted action for the current decision player.
pub fn heuristic_act(state: &GameState, params: &HeuristicParams, archetype: Archetype) -> Result<usize, AgentError> {
    let legal = state.legal_decisions().map_err(|_| AgentError::Terminal)?;
    let choice = Script { state, params, archetype, legal: &legal }.choose();
    // Every branch picks from `legal`; fall back defensively anyway.
    if legal.iter().any(|d| d.index() == choice) {
        Ok(choice)
    } else {
        Ok(legal.first().map(|d| d.index()).unwrap_or_else(pass))
    }
}

struct Script<'a> {
    state: &'a GameState,
    params: &'a HeuristicParams,
    archetype: Archetype,
    legal: &'a [Decision],
}

impl Script<'_> {
    fn cat(&self) -> &Catalog {
        self.state.catalog()
    }

    fn me(&self) -> usize {
        self.state.decision_player
    }

    fn has(&self, c: Category, slot: usize) -> bool {
        self.legal.contains(&Decision::new(c, slot))
    }

    fn slots(&self, c: Category) -> Vec<usize> {
        self.legal.iter().filter(|d| d.category == c).map(|d| d.slot).collect()
    }

    fn first(&self, c: Category) -> Option<usize> {
        self.slots(c).into_iter().next().map(|s| idx(c, s))
    }

    fn choose(&self) -> usize {
        match &self.state.pending {
            Some(Pending::Mulligan { .. }) => self.mulligan(),
            Some(Pending::Bottom { .. }) => idx(Category::Bottom, self.worst_card()),
            Some(Pending::Discard { .. }) => idx(Category::Discard, self.worst_card()),
            Some(Pending::Target { spell }) => match self.best_target(spell.card) {
                Some(t) => idx(Category::Target, self.state.target_slot(self.me(), t)),
                None => idx(Category::Cancel, 0),
            },
            Some(Pending::Payment { .. }) => self
                .first(Category::Confirm)
                .or_else(|| self.first(Category::AutoPay))
                .unwrap_or_else(|| idx(Category::Cancel, 0)),
            Some(Pending::Response { spell }) => {
                let cost = self.cat().get(spell.card).cost.total();
                match self.slots(Category::CastInstant).first() {
                    Some(&s) if cost >= 2 => idx(Category::CastInstant, s),
                    _ => pass(),
                }
            }
            Some(Pending::BlockAssign { attacker }) => {
                let plan = self.block_plan();
                plan.iter()
                    .find(|(a, _)| a == attacker)
                    .map(|(_, b)| self.slot_of(1 - self.state.active_player, *b))
                    .filter(|s| self.has(Category::BlockSelectBlocker, *s))
                    .map(|s| idx(Category::BlockSelectBlocker, s))
                    .unwrap_or_else(|| idx(Category::Cancel, 0))
            }
            None => match self.state.phase {
                Phase::Main1 | Phase::Main2 => self.main_phase(),
                Phase::CombatDeclareAttackers => self.attack(),
                Phase::CombatDeclareBlockers => self.block(),
                _ => pass(),
            },
        }
    }

    fn lands_in_hand(&self) -> usize {
        let cat = self.cat();
        self.state.players[self.me()].hand.iter().filter(|&&c| cat.get(c).is_land()).count()
    }

    fn mulligan(&self) -> usize {
        let lands = self.lands_in_hand();
        let (lo, hi) = self.params.mulligan_land_range;
        let keep = lands >= lo as usize && lands <= hi as usize;
        if !keep && self.has(Category::Mulligan, 0) {
            idx(Category::Mulligan, 0)
        } else {
            idx(Category::Keep, 0)
        }
    }

    /// Hand slot to get rid of: a land when flooded, else the most
    /// expensive card.
    fn worst_card(&self) -> usize {
        let cat = self.cat();
        let hand = &self.state.players[self.me()].hand;
        let n = hand.len().min(crate::actions::HAND_SLOTS);
        let lands = self.lands_in_hand();
        let flooded = lands > 3 && lands * 2 > hand.len();
        let pick = |want_land: bool| {
            (0..n)
                .filter(|&i| cat.get(hand[i]).is_land() == want_land)
                .max_by_key(|&i| (cat.get(hand[i]).cost.total(), std::cmp::Reverse(i)))
        };
        let first = if flooded { pick(true) } else { pick(false) };
        first.or_else(|| pick(!flooded)).unwrap_or(0)
    }

    fn slot_of(&self, player: usize, ordinal: u32) -> usize {
        self.state.players[player].permanent(ordinal).map(|p| p.slot()).unwrap_or(0)
    }

    fn creatures(&self, player: usize) -> impl Iterator<Item = &Permanent> {
        let cat = self.cat();
        self.state.players[player].battlefield.iter().filter(move |p| p.is_creature(cat))
    }

    fn board_power(&self, player: usize) -> i32 {
        let cat = self.cat();
        self.creatures(player).map(|p| p.power(cat)).sum()
    }

    fn main_phase(&self) -> usize {
        if let Some(a) = self.first(Category::PlayLand) {
            return a;
        }
        if let Some(a) = self.cast_choice() {
            return a;
        }
        if let Some(a) = self.first(Category::Activate) {
            return a;
        }
        pass()
    }

    fn cast_choice(&self) -> Option<usize> {
        let me = self.me();
        let hand = &self.state.players[me].hand;
        let cat = self.cat();
        let mut options: Vec<(Category, usize)> = Vec::new();
        for c in [Category::CastSorcery, Category::CastInstant] {
            for s in self.slots(c) {
                options.push((c, s));
            }
        }
        let opp_ahead = self.board_power(1 - me) - self.board_power(me) > 0;
        let useful: Vec<(Category, usize, &CardDef)> = options
            .into_iter()
            .map(|(c, s)| (c, s, cat.get(hand[s])))
            .filter(|(_, s, def)| self.worth_casting(hand[*s], def))
            .collect();
        if opp_ahead {
            if let Some((c, s, _)) = useful
                .iter()
                .filter(|(_, _, d)| d.flags.is_removal)
                .max_by_key(|(_, s, d)| (d.cost.total(), std::cmp::Reverse(*s)))
            {
                return Some(idx(*c, *s));
            }
        }
        if self.archetype == Archetype::DomainRamp {
            // Ramp develops mana before anything else.
            if let Some((c, s, _)) = useful
                .iter()
                .find(|(_, _, d)| d.effects.contains(&Effect::AddMana { ramp: true }) || d.flags.mana_producer)
            {
                return Some(idx(*c, *s));
            }
        }
        useful
            .iter()
            .max_by_key(|(_, s, d)| (d.cost.total(), std::cmp::Reverse(*s)))
            .map(|(c, s, _)| idx(*c, *s))
    }

    fn worth_casting(&self, card: CardId, def: &CardDef) -> bool {
        let me = self.me();
        if def.effects.iter().any(|e| matches!(e, Effect::Destroy { target: TargetSpec::AllCreatures })) {
            return self.board_power(1 - me) > self.board_power(me);
        }
        if def.is_creature() || def.is_permanent() {
            return true;
        }
        if def.chosen_target().is_some() {
            return self.best_target(card).is_some();
        }
        true
    }

    /// The target this script wants for `card`, or `None` if nothing is
    /// worth hitting.
    fn best_target(&self, card: CardId) -> Option<TargetRef> {
        let cat = self.cat();
        let def = cat.get(card);
        let spec = def.chosen_target()?;
        let me = self.me();
        let targets = self.state.legal_targets(me, spec);
        let perm = |t: &TargetRef| match *t {
            TargetRef::Permanent { controller, ordinal } => {
                self.state.players[controller].permanent(ordinal).map(|p| (controller, p))
            }
            TargetRef::Player(_) => None,
        };
        let threat_value = |p: &Permanent| (p.power(cat), p.toughness(cat), std::cmp::Reverse(p.ordinal));

        for e in &def.effects {
            match *e {
                Effect::Pump { .. } => {
                    // Only worth it before attacks, on a creature that can swing.
                    if self.state.phase != Phase::Main1 || self.params.aggression == Aggression::Defensive {
                        return None;
                    }
                    return targets
                        .iter()
                        .filter_map(|t| perm(t).map(|(c, p)| (t, c, p)))
                        .filter(|(_, c, p)| *c == me && !p.tapped && (!p.summoning_sick || p.has_haste(cat)))
                        .max_by_key(|(_, _, p)| threat_value(p))
                        .map(|(t, _, _)| *t);
                }
                Effect::DealDamage { amount, .. } => {
                    let kill = targets
                        .iter()
                        .filter_map(|t| perm(t).map(|(c, p)| (t, c, p)))
                        .filter(|(_, c, p)| *c != me && p.toughness(cat) - p.damage_marked <= amount)
                        .max_by_key(|(_, _, p)| threat_value(p))
                        .map(|(t, _, _)| *t);
                    let face = TargetRef::Player(1 - me);
                    let lethal = self.state.players[1 - me].life <= amount;
                    let burn_face = self.params.aggression == Aggression::AttackAll || lethal;
                    if lethal && targets.contains(&face) {
                        return Some(face);
                    }
                    if kill.is_some() {
                        return kill;
                    }
                    if burn_face && targets.contains(&face) {
                        return Some(face);
                    }
                    return None;
                }
                Effect::Destroy { .. } => {
                    return targets
                        .iter()
                        .filter_map(|t| perm(t).map(|(c, p)| (t, c, p)))
                        .filter(|(_, c, _)| *c != me)
                        .max_by_key(|(_, _, p)| (p.is_threat(cat), threat_value(p)))
                        .map(|(t, _, _)| *t);
                }
                _ => {}
            }
        }
        None
    }

    fn attack(&self) -> usize {
        let cat = self.cat();
        let me = self.me();
        let opp = 1 - me;
        let blockers: Vec<&Permanent> = self.creatures(opp).filter(|b| !b.tapped).collect();
        for s in self.slots(Category::AttackToggle) {
            let Some(a) = self.state.players[me].permanent_at_slot(s) else {
                continue;
            };
            let want = match self.params.aggression {
                Aggression::AttackAll => true,
                Aggression::FavorableTrades => blockers
                    .iter()
                    .all(|b| b.power(cat) < a.toughness(cat) || a.power(cat) >= b.toughness(cat)),
                Aggression::Defensive => blockers.iter().all(|b| b.power(cat) < a.toughness(cat)),
            };
            let want = want && a.power(cat) > 0;
            if want != a.attacking {
                return idx(Category::AttackToggle, s);
            }
        }
        pass()
    }

    /// Blocks still to be declared, as (attacker ordinal, blocker ordinal).
    /// Recomputed from the current declarations, so it shrinks by one pair
    /// after each assignment.
    fn block_plan(&self) -> Vec<(u32, u32)> {
        let cat = self.cat();
        let me = 1 - self.state.active_player;
        let atk = self.state.active_player;
        let mine = &self.state.players[me].battlefield;
        let mut free: Vec<&Permanent> = mine
            .iter()
            .filter(|p| p.is_creature(cat) && !p.tapped && p.blocking.is_none())
            .collect();
        let mut unblocked: Vec<&Permanent> = self.state.players[atk]
            .battlefield
            .iter()
            .filter(|a| a.attacking && !mine.iter().any(|b| b.blocking == Some(a.ordinal)))
            .collect();
        unblocked.sort_by_key(|a| (std::cmp::Reverse(a.power(cat)), a.ordinal));
        let life = self.state.players[me].life;
        let mut incoming: i32 = unblocked.iter().map(|a| a.power(cat).max(0)).sum();
        let mut plan = Vec::new();

        let kills = |b: &Permanent, a: &Permanent| b.power(cat) >= a.toughness(cat) - a.damage_marked;
        let survives = |b: &Permanent, a: &Permanent| a.power(cat) < b.toughness(cat) - b.damage_marked;

        // Survive first: block the biggest attackers until the rest is not lethal.
        let mut i = 0;
        while incoming >= life && i < unblocked.len() && !free.is_empty() {
            let a = unblocked[i];
            let pick = (0..free.len())
                .max_by_key(|&j| {
                    let b = free[j];
                    (survives(b, a), kills(b, a), std::cmp::Reverse(b.power(cat)), std::cmp::Reverse(b.ordinal))
                })
                .unwrap();
            let b = free.remove(pick);
            plan.push((a.ordinal, b.ordinal));
            incoming -= a.power(cat).max(0);
            unblocked.remove(i);
            i = 0;
        }
        // Then value blocks when under the threshold.
        if let Some(th) = self.params.defensive_life_threshold {
            if life < th {
                for a in unblocked {
                    let good = (0..free.len())
                        .filter(|&j| {
                            let b = free[j];
                            survives(b, a) || (kills(b, a) && b.power(cat) + b.toughness(cat) <= a.power(cat) + a.toughness(cat))
                        })
                        .max_by_key(|&j| (survives(free[j], a), std::cmp::Reverse(free[j].ordinal)));
                    if let Some(j) = good {
                        let b = free.remove(j);
                        plan.push((a.ordinal, b.ordinal));
                    }
                }
            }
        }
        plan
    }

    fn block(&self) -> usize {
        let atk = self.state.active_player;
        for (a, _) in self.block_plan() {
            let s = self.slot_of(atk, a);
            if self.has(Category::BlockSelectAttacker, s) {
                return idx(Category::BlockSelectAttacker, s);
            }
        }
        pass()
    }
}

/// A non-learned seat: random or scripted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScriptedAgent {
    Random,
    Heuristic { archetype: Archetype, params: HeuristicParams },
}

impl ScriptedAgent {
    pub fn heuristic(archetype: Archetype) -> Self {
        ScriptedAgent::Heuristic { archetype, params: HeuristicParams::for_archetype(archetype) }
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &GameState, rng: &mut R) -> Result<usize, AgentError> {
        match self {
            ScriptedAgent::Random => {
                let mask = state.mask().map_err(|_| AgentError::Terminal)?;
                random_act(&mask, rng)
            }
            ScriptedAgent::Heuristic { archetype, params } => heuristic_act(state, params, *archetype),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScriptedAgent::Random => "random".into(),
            ScriptedAgent::Heuristic { archetype, .. } => format!("heuristic:{}", archetype.as_str()),
        }
    }
}
