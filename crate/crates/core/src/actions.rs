//! Flat 478-slot action indexing and the legality mask.
//!
//! The layout is fixed: each category owns a contiguous index range. Slot
//! meaning depends on the category: hand categories use hand positions 0-9,
//! battlefield categories use a permanent's stable slot (ordinal mod 60), and
//! TARGET uses `[0, 60)` own permanents, `[60, 120)` opponent permanents,
//! `120` own player, `121` opponent player, all relative to the decider.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Total number of flat actions.
pub const NUM_ACTIONS: usize = 478;

/// Hand positions addressable by hand categories.
pub const HAND_SLOTS: usize = 10;

/// Battlefield slots per player.
pub const BATTLEFIELD_SLOTS: usize = 60;

/// TARGET slot of the deciding player.
pub const TARGET_OWN_PLAYER: usize = 120;
/// TARGET slot of the deciding player's opponent.
pub const TARGET_OPP_PLAYER: usize = 121;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ActionError {
    #[error("slot {slot} out of range for {category} ({count} slots)")]
    SlotOutOfRange { category: Category, slot: usize, count: usize },
    #[error("action index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Pass,
    Keep,
    Mulligan,
    Confirm,
    Cancel,
    AutoPay,
    Bottom,
    Discard,
    PlayLand,
    CastSorcery,
    CastInstant,
    Activate,
    AttackToggle,
    BlockSelectAttacker,
    BlockSelectBlocker,
    Target,
    ManaSource,
}

/// (category, base, count) in index order.
pub const LAYOUT: [(Category, usize, usize); 17] = [
    (Category::Pass, 0, 1),
    (Category::Keep, 1, 1),
    (Category::Mulligan, 2, 1),
    (Category::Confirm, 3, 1),
    (Category::Cancel, 4, 1),
    (Category::AutoPay, 5, 1),
    (Category::Bottom, 6, 10),
    (Category::Discard, 16, 10),
    (Category::PlayLand, 26, 10),
    (Category::CastSorcery, 36, 10),
    (Category::CastInstant, 46, 10),
    (Category::Activate, 56, 60),
    (Category::AttackToggle, 116, 60),
    (Category::BlockSelectAttacker, 176, 60),
    (Category::BlockSelectBlocker, 236, 60),
    (Category::Target, 296, 122),
    (Category::ManaSource, 418, 60),
];

impl Category {
    pub const ALL: [Category; 17] = [
        Category::Pass,
        Category::Keep,
        Category::Mulligan,
        Category::Confirm,
        Category::Cancel,
        Category::AutoPay,
        Category::Bottom,
        Category::Discard,
        Category::PlayLand,
        Category::CastSorcery,
        Category::CastInstant,
        Category::Activate,
        Category::AttackToggle,
        Category::BlockSelectAttacker,
        Category::BlockSelectBlocker,
        Category::Target,
        Category::ManaSource,
    ];

    pub fn base(self) -> usize {
        LAYOUT[self as usize].1
    }

    pub fn count(self) -> usize {
        LAYOUT[self as usize].2
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Pass => "PASS",
            Category::Keep => "KEEP",
            Category::Mulligan => "MULLIGAN",
            Category::Confirm => "CONFIRM",
            Category::Cancel => "CANCEL",
            Category::AutoPay => "AUTO_PAY",
            Category::Bottom => "BOTTOM",
            Category::Discard => "DISCARD",
            Category::PlayLand => "PLAY_LAND",
            Category::CastSorcery => "CAST_SORCERY",
            Category::CastInstant => "CAST_INSTANT",
            Category::Activate => "ACTIVATE",
            Category::AttackToggle => "ATTACK_TOGGLE",
            Category::BlockSelectAttacker => "BLOCK_SELECT_ATTACKER",
            Category::BlockSelectBlocker => "BLOCK_SELECT_BLOCKER",
            Category::Target => "TARGET",
            Category::ManaSource => "MANA_SOURCE",
        }
    }

    /// Human-readable slot semantics, used by the layout export.
    pub fn slot_semantics(self) -> &'static str {
        match self {
            Category::Pass => "end current phase or decline to act",
            Category::Keep => "keep current opening hand",
            Category::Mulligan => "shuffle hand away and redraw seven",
            Category::Confirm => "confirm the fully paid pending spell",
            Category::Cancel => "cancel the pending spell or block assignment",
            Category::AutoPay => "tap sources automatically for the remaining cost",
            Category::Bottom => "hand position to put on the library bottom",
            Category::Discard => "hand position to discard",
            Category::PlayLand => "hand position of a land to play",
            Category::CastSorcery => "hand position of a sorcery-speed spell",
            Category::CastInstant => "hand position of an instant-speed spell",
            Category::Activate => "own permanent slot (ordinal mod 60)",
            Category::AttackToggle => "own creature slot (ordinal mod 60)",
            Category::BlockSelectAttacker => "attacking creature slot (ordinal mod 60)",
            Category::BlockSelectBlocker => "own untapped creature slot (ordinal mod 60)",
            Category::Target => "0-59 own permanents, 60-119 opponent permanents, 120 own player, 121 opponent player",
            Category::ManaSource => "own mana source slot (ordinal mod 60)",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ActionError::UnknownCategory(s.to_string()))
    }
}

/// A decoded action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Decision {
    pub category: Category,
    pub slot: usize,
}

impl Decision {
    pub fn new(category: Category, slot: usize) -> Self {
        Decision { category, slot }
    }

    pub fn index(self) -> usize {
        self.category.base() + self.slot
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.category.count() == 1 {
            write!(f, "{}", self.category)
        } else {
            write!(f, "{}[{}]", self.category, self.slot)
        }
    }
}

pub fn encode(category: Category, slot: usize) -> Result<usize, ActionError> {
    let count = category.count();
    if slot >= count {
        return Err(ActionError::SlotOutOfRange { category, slot, count });
    }
    Ok(category.base() + slot)
}

pub fn decode(index: usize) -> Result<Decision, ActionError> {
    if index >= NUM_ACTIONS {
        return Err(ActionError::IndexOutOfRange(index));
    }
    // LAYOUT is sorted by base; find the last base <= index.
    let pos = LAYOUT.partition_point(|&(_, base, _)| base <= index) - 1;
    let (category, base, _) = LAYOUT[pos];
    Ok(Decision { category, slot: index - base })
}

/// 478-bit legality vector.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct ActionMask {
    bits: [u64; 8],
}

impl fmt::Debug for ActionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter_set()).finish()
    }
}

impl ActionMask {
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = ActionMask::default();
        for i in indices {
            m.set(i);
        }
        m
    }

    pub fn set(&mut self, index: usize) {
        assert!(index < NUM_ACTIONS, "action index {index} out of range");
        self.bits[index / 64] |= 1 << (index % 64);
    }

    pub fn get(&self, index: usize) -> bool {
        index < NUM_ACTIONS && self.bits[index / 64] & (1 << (index % 64)) != 0
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.popcount() == 0
    }

    /// Set indices in increasing order.
    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_ACTIONS).filter(move |&i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter_set().collect()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..NUM_ACTIONS).map(|i| self.get(i)).collect()
    }
}

/// One row of the exported layout table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct LayoutRow {
    pub category: String,
    pub base: usize,
    pub count: usize,
    pub semantics: String,
}

pub fn layout_table() -> Vec<LayoutRow> {
    LAYOUT
        .iter()
        .map(|&(c, base, count)| LayoutRow {
            category: c.name().to_string(),
            base,
            count,
            semantics: c.slot_semantics().to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode(Category::Pass, 0).unwrap(), 0);
        assert_eq!(encode(Category::PlayLand, 0).unwrap(), 26);
        assert_eq!(encode(Category::Target, 121).unwrap(), 417);
        assert!(encode(Category::Target, 122).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode(477).unwrap(), Decision::new(Category::ManaSource, 59));
        assert_eq!(decode(2).unwrap(), Decision::new(Category::Mulligan, 0));
        assert_eq!(decode(478), Err(ActionError::IndexOutOfRange(478)));
    }

    #[test]
    fn category_order_matches_layout() {
        for (i, c) in Category::ALL.iter().enumerate() {
            assert_eq!(*c as usize, i);
            assert_eq!(LAYOUT[i].0, *c);
        }
    }

    #[test]
    fn mask_bits() {
        let m = ActionMask::from_indices([0, 63, 64, 477]);
        assert_eq!(m.popcount(), 4);
        assert_eq!(m.to_vec(), vec![0, 63, 64, 477]);
        assert!(!m.get(478));
    }
}
