//! Fixed-length partial observation from one player's perspective.
//!
//! Everything is perspective-relative ("own" is the observing player). The
//! opponent's hand contributes only its size and no library order is ever
//! read, so two states that differ only in hidden zones encode identically.
//! Counts are scaled into `[0, 1]` by the divisors listed in
//! [`layout_spec`]; signed quantities are not used.

use serde::{Deserialize, Serialize};

use crate::actions::{BATTLEFIELD_SLOTS, HAND_SLOTS};
use crate::cards::{CardKind, Catalog, Color, POOL_SIZE};
use crate::engine::{mana, GameState, Pending, Permanent, Phase, PlayerState};

pub const OBS_DIM: usize = 3077;
pub const LAYOUT_VERSION: u32 = 1;

const GLOBAL_LEN: usize = 15;
const OPP_PUBLIC_LEN: usize = 1;
const PHASE_LEN: usize = 7;
const PENDING_LEN: usize = 10;
const MANA_LEN: usize = 12;
const HAND_CARD_LEN: usize = POOL_SIZE + 8;
const PERM_LEN: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
    pub semantics: &'static str,
}

/// The frozen segment table. Offsets are contiguous and sum to 3,077.
pub fn layout_spec() -> Vec<Segment> {
    let parts: [(&'static str, usize, &'static str); 10] = [
        (
            "global",
            GLOBAL_LEN,
            "own life/20, opp life/20, turn/turn_cap, own library/60, opp library/60, own hand/15, \
             own graveyard/60, opp graveyard/60, own permanents/60, opp permanents/60, is active, \
             is deciding, land played this turn, own mulligans/3, opp mulligans/3 (all clipped to [0,1])",
        ),
        ("opp_public", OPP_PUBLIC_LEN, "opponent hand size/15"),
        ("phase", PHASE_LEN, "one-hot over beginning, main1, declare attackers, declare blockers, combat damage, main2, end"),
        (
            "pending",
            PENDING_LEN,
            "one-hot over none, mulligan, bottom, target, payment, response, block assign, discard; \
             bottom remaining/3; payment remaining/10",
        ),
        (
            "mana",
            MANA_LEN,
            "own untapped sources per color W,U,B,R,G /10; own untapped sources/10; own mana producers/10; \
             opp untapped sources/10; opp mana producers/10; own mana spent/10; opp mana spent/10; own land drop available",
        ),
        (
            "own_hand",
            HAND_SLOTS * HAND_CARD_LEN,
            "10 slots x (56 card one-hot, mana value/10, power/10, toughness/10, land, creature, instant timing, removal, affordable)",
        ),
        (
            "own_battlefield",
            BATTLEFIELD_SLOTS * PERM_LEN,
            "60 slots x (present, tapped, summoning sick, power/10, toughness/10, damage/10, attacking, blocking, land, \
             creature, planeswalker, enchantment, token, mana producer, W, U, B, R, G)",
        ),
        ("opp_battlefield", BATTLEFIELD_SLOTS * PERM_LEN, "as own_battlefield for the opponent"),
        ("own_graveyard", POOL_SIZE, "per-card copies in own graveyard/8"),
        ("opp_graveyard", POOL_SIZE, "per-card copies in opponent graveyard/8"),
    ];
    let mut offset = 0;
    parts
        .into_iter()
        .map(|(name, len, semantics)| {
            let s = Segment { name, offset, len, semantics };
            offset += len;
            s
        })
        .collect()
}

/// Offset and length of a named segment.
pub fn segment(name: &str) -> Option<(usize, usize)> {
    layout_spec().into_iter().find(|s| s.name == name).map(|s| (s.offset, s.len))
}

fn frac(x: f64, div: f64) -> f32 {
    (x / div).clamp(0.0, 1.0) as f32
}

fn flag(b: bool) -> f32 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn untapped_sources(ps: &PlayerState, cat: &Catalog) -> Vec<mana::Source> {
    mana::sources(ps, cat, false)
}

/// Encode `state` as seen by `perspective`.
pub fn encode(state: &GameState, perspective: usize) -> Vec<f32> {
    let cat = state.catalog();
    let me = perspective;
    let opp = 1 - perspective;
    let own = &state.players[me];
    let other = &state.players[opp];
    let mut v: Vec<f32> = Vec::with_capacity(OBS_DIM);

    // global
    v.push(frac(own.life as f64, 20.0));
    v.push(frac(other.life as f64, 20.0));
    v.push(frac(state.turn as f64, state.turn_cap.max(1) as f64));
    v.push(frac(own.library.len() as f64, 60.0));
    v.push(frac(other.library.len() as f64, 60.0));
    v.push(frac(own.hand.len() as f64, 15.0));
    v.push(frac(own.graveyard.len() as f64, 60.0));
    v.push(frac(other.graveyard.len() as f64, 60.0));
    v.push(frac(own.battlefield.len() as f64, 60.0));
    v.push(frac(other.battlefield.len() as f64, 60.0));
    v.push(flag(state.active_player == me));
    v.push(flag(state.decision_player == me));
    v.push(flag(state.land_played_this_turn[me]));
    v.push(frac(own.mulligans_taken as f64, 3.0));
    v.push(frac(other.mulligans_taken as f64, 3.0));

    // opponent public
    v.push(frac(other.hand.len() as f64, 15.0));

    // phase
    for p in Phase::ALL {
        v.push(flag(state.phase == p));
    }

    // pending
    let kind = match &state.pending {
        None => 0,
        Some(Pending::Mulligan { .. }) => 1,
        Some(Pending::Bottom { .. }) => 2,
        Some(Pending::Target { .. }) => 3,
        Some(Pending::Payment { .. }) => 4,
        Some(Pending::Response { .. }) => 5,
        Some(Pending::BlockAssign { .. }) => 6,
        Some(Pending::Discard { .. }) => 7,
    };
    for k in 0..8 {
        v.push(flag(kind == k));
    }
    let bottom_left = match &state.pending {
        Some(Pending::Bottom { remaining, .. }) => *remaining as f64,
        _ => 0.0,
    };
    let pay_left = match &state.pending {
        Some(Pending::Payment { remaining, .. }) => remaining.total() as f64,
        _ => 0.0,
    };
    v.push(frac(bottom_left, 3.0));
    v.push(frac(pay_left, 10.0));

    // mana
    let own_src = untapped_sources(own, cat);
    for c in Color::ALL {
        let n = own_src.iter().filter(|s| s.colors.contains(c)).count();
        v.push(frac(n as f64, 10.0));
    }
    v.push(frac(own_src.len() as f64, 10.0));
    v.push(frac(own.battlefield.iter().filter(|p| p.is_mana_producer(cat)).count() as f64, 10.0));
    v.push(frac(untapped_sources(other, cat).len() as f64, 10.0));
    v.push(frac(other.battlefield.iter().filter(|p| p.is_mana_producer(cat)).count() as f64, 10.0));
    v.push(frac(state.mana_spent[me] as f64, 10.0));
    v.push(frac(state.mana_spent[opp] as f64, 10.0));
    v.push(flag(!state.land_played_this_turn[me]));

    // own hand
    for slot in 0..HAND_SLOTS {
        let start = v.len();
        v.resize(start + HAND_CARD_LEN, 0.0);
        if let Some(&card) = own.hand.get(slot) {
            let def = cat.get(card);
            let f = &mut v[start..];
            f[card.index()] = 1.0;
            let s = &mut f[POOL_SIZE..];
            s[0] = frac(def.cost.total() as f64, 10.0);
            s[1] = frac(def.power.unwrap_or(0) as f64, 10.0);
            s[2] = frac(def.toughness.unwrap_or(0) as f64, 10.0);
            s[3] = flag(def.is_land());
            s[4] = flag(def.is_creature());
            s[5] = flag(def.has_instant_timing());
            s[6] = flag(def.flags.is_removal);
            s[7] = flag(!def.is_land() && state.affordable(me, card));
        }
    }

    // battlefields
    for ps in [own, other] {
        let start = v.len();
        v.resize(start + BATTLEFIELD_SLOTS * PERM_LEN, 0.0);
        for perm in &ps.battlefield {
            let off = start + perm.slot() * PERM_LEN;
            encode_permanent(perm, cat, &mut v[off..off + PERM_LEN]);
        }
    }

    // graveyards
    for ps in [own, other] {
        let start = v.len();
        v.resize(start + POOL_SIZE, 0.0);
        for &c in &ps.graveyard {
            v[start + c.index()] += 1.0 / 8.0;
        }
        for x in &mut v[start..] {
            *x = x.min(1.0);
        }
    }

    debug_assert_eq!(v.len(), OBS_DIM);
    v
}

fn encode_permanent(perm: &Permanent, cat: &Catalog, f: &mut [f32]) {
    let kind = perm.kind(cat);
    f[0] = 1.0;
    f[1] = flag(perm.tapped);
    f[2] = flag(perm.summoning_sick);
    f[3] = frac(perm.power(cat) as f64, 10.0);
    f[4] = frac(perm.toughness(cat) as f64, 10.0);
    f[5] = frac(perm.damage_marked as f64, 10.0);
    f[6] = flag(perm.attacking);
    f[7] = flag(perm.blocking.is_some());
    f[8] = flag(kind == CardKind::Land);
    f[9] = flag(kind == CardKind::Creature);
    f[10] = flag(kind == CardKind::Planeswalker);
    f[11] = flag(kind == CardKind::Enchantment);
    f[12] = flag(perm.token.is_some());
    f[13] = flag(perm.is_mana_producer(cat));
    let colors = if perm.is_land(cat) { cat.get(perm.card).produces } else { perm.colors(cat) };
    for c in Color::ALL {
        f[14 + c.index()] = flag(colors.contains(c));
    }
}
