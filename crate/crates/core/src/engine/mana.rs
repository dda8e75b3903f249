//! Mana sources and cost payment.
//!
//! There is no mana pool: paying a spell taps specific sources, each
//! covering one pip of a color it produces or one generic. Payability is a
//! bipartite matching of pips to sources plus a count check for generic.

use crate::cards::{Catalog, Color, ColorSet, ManaCost};

use super::{Permanent, PlayerState};

/// One untapped permanent that can pay for the spell being cast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Source {
    pub ordinal: u32,
    pub colors: ColorSet,
    /// Ordering key for automatic payment: lands, then mana creatures, then
    /// convoke creatures.
    pub rank: u8,
}

/// Untapped sources `player` may tap for a spell. `convoke` admits every
/// untapped creature, summoning sick or not, paying with its colors.
pub fn sources(player: &PlayerState, cat: &Catalog, convoke: bool) -> Vec<Source> {
    let mut out = Vec::new();
    for perm in &player.battlefield {
        if perm.tapped {
            continue;
        }
        if let Some(src) = source_of(perm, cat, convoke) {
            out.push(src);
        }
    }
    out
}

fn source_of(perm: &Permanent, cat: &Catalog, convoke: bool) -> Option<Source> {
    let creature = perm.is_creature(cat);
    let def = cat.get(perm.card);
    if perm.token.is_none() && def.is_land() {
        return Some(Source { ordinal: perm.ordinal, colors: def.produces, rank: 0 });
    }
    let taps_for_mana = perm.token.is_none() && def.flags.mana_producer && !perm.summoning_sick;
    let mut colors = ColorSet::default();
    let mut rank = 2;
    if taps_for_mana {
        colors = colors.union(def.produces);
        rank = 1;
    }
    if convoke && creature {
        colors = colors.union(perm.colors(cat));
    }
    if taps_for_mana || (convoke && creature) {
        Some(Source { ordinal: perm.ordinal, colors, rank })
    } else {
        None
    }
}

/// Whether `cost` can be paid from the given source color sets.
pub fn payable(cost: &ManaCost, sources: &[ColorSet]) -> bool {
    let pips: Vec<Color> = Color::ALL
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, cost.pips[c.index()] as usize))
        .collect();
    if pips.len() + cost.generic as usize > sources.len() {
        return false;
    }
    // Kuhn's augmenting-path matching, pips on the left.
    let mut owner: Vec<Option<usize>> = vec![None; sources.len()];
    for pip in 0..pips.len() {
        let mut seen = vec![false; sources.len()];
        if !augment(pip, &pips, sources, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(
    pip: usize,
    pips: &[Color],
    sources: &[ColorSet],
    owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for s in 0..sources.len() {
        if seen[s] || !sources[s].contains(pips[pip]) {
            continue;
        }
        seen[s] = true;
        let free = match owner[s] {
            None => true,
            Some(other) => augment(other, pips, sources, owner, seen),
        };
        if free {
            owner[s] = Some(pip);
            return true;
        }
    }
    false
}

/// What a tapped source pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Pip(Color),
    Generic,
}

/// Choose what source `idx` pays so that the rest stays payable by the other
/// sources. Pips are tried in WUBRG order before generic.
pub fn assign(remaining: &ManaCost, sources: &[Source], idx: usize) -> Option<Assignment> {
    let others: Vec<ColorSet> = sources
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != idx)
        .map(|(_, s)| s.colors)
        .collect();
    let src = sources[idx];
    for c in Color::ALL {
        if remaining.pips[c.index()] > 0 && src.colors.contains(c) {
            let mut rest = *remaining;
            rest.pips[c.index()] -= 1;
            if payable(&rest, &others) {
                return Some(Assignment::Pip(c));
            }
        }
    }
    if remaining.generic > 0 {
        let mut rest = *remaining;
        rest.generic -= 1;
        if payable(&rest, &others) {
            return Some(Assignment::Generic);
        }
    }
    None
}

pub fn apply_assignment(remaining: &mut ManaCost, a: Assignment) {
    match a {
        Assignment::Pip(c) => remaining.pips[c.index()] -= 1,
        Assignment::Generic => remaining.generic -= 1,
    }
}

/// Deterministic automatic payment order: lands before creatures, fewer
/// colors first, then by ordinal.
pub fn auto_pay_order(sources: &mut [Source]) {
    sources.sort_by_key(|s| (s.rank, s.colors.len(), s.ordinal));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cs: &[Color]) -> ColorSet {
        let mut s = ColorSet::default();
        for &c in cs {
            s.insert(c);
        }
        s
    }

    fn cost(generic: u8, pips: &[(Color, u8)]) -> ManaCost {
        let mut c = ManaCost { generic, ..Default::default() };
        for &(col, n) in pips {
            c.pips[col.index()] = n;
        }
        c
    }

    #[test]
    fn matching_handles_dual_lands() {
        // WU dual plus Island pays W + U only if the dual takes W.
        let srcs = [set(&[Color::W, Color::U]), set(&[Color::U])];
        assert!(payable(&cost(0, &[(Color::W, 1), (Color::U, 1)]), &srcs));
        assert!(!payable(&cost(0, &[(Color::W, 2)]), &srcs));
        assert!(payable(&cost(1, &[(Color::U, 1)]), &srcs));
        assert!(!payable(&cost(2, &[(Color::U, 1)]), &srcs));
    }

    #[test]
    fn assignment_keeps_rest_payable() {
        let srcs = [
            Source { ordinal: 0, colors: set(&[Color::W, Color::U]), rank: 0 },
            Source { ordinal: 1, colors: set(&[Color::U]), rank: 0 },
        ];
        let c = cost(0, &[(Color::W, 1), (Color::U, 1)]);
        assert_eq!(assign(&c, &srcs, 0), Some(Assignment::Pip(Color::W)));
        assert_eq!(assign(&c, &srcs, 1), Some(Assignment::Pip(Color::U)));
        // With only a W pip left the island cannot help.
        let c = cost(0, &[(Color::W, 1)]);
        assert_eq!(assign(&c, &srcs, 1), None);
    }
}
