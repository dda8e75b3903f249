#![allow(dead_code)]

use cmtg_core::agents::ScriptedAgent;
use cmtg_core::cards::{deck_for, Archetype, Catalog};
use cmtg_core::engine::{GameState, Pending, TargetRef};
use cmtg_core::new_game;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn game(a: Archetype, b: Archetype, seed: u64) -> GameState {
    let cat = Catalog::bundled();
    new_game(&deck_for(a, &cat).unwrap(), &deck_for(b, &cat).unwrap(), seed, 30).unwrap()
}

/// Random archetype pairing for `seed`.
pub fn random_game(seed: u64) -> GameState {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
    let a = Archetype::ALL[r.gen_range(0..5)];
    let b = Archetype::ALL[r.gen_range(0..5)];
    game(a, b, seed)
}

/// Play one game with the given seats, calling `visit` on every
/// non-terminal state before acting. Returns the terminal state.
pub fn rollout(
    mut g: GameState,
    agents: [ScriptedAgent; 2],
    seed: u64,
    mut visit: impl FnMut(&GameState),
) -> GameState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0;
    while g.outcome.is_none() {
        visit(&g);
        let a = agents[g.decision_player].act(&g, &mut rng).unwrap();
        g.step(a).unwrap();
        n += 1;
        assert!(n < 50_000, "runaway episode");
    }
    g
}

/// Sample up to `per_game` states from random-vs-random games until `n`
/// states are collected.
pub fn sample_states(n: usize, seed: u64) -> Vec<GameState> {
    let mut out = Vec::with_capacity(n);
    let mut s = seed;
    let mut pick = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < n {
        let g = random_game(s);
        let agents = if s % 2 == 0 {
            [ScriptedAgent::Random, ScriptedAgent::Random]
        } else {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            [ScriptedAgent::heuristic(Archetype::ALL[r.gen_range(0..5)]), ScriptedAgent::Random]
        };
        rollout(g, agents, s, |st| {
            if out.len() < n && pick.gen_bool(0.2) {
                out.push(st.clone());
            }
        });
        s += 1;
    }
    out
}

fn swap_target(t: TargetRef) -> TargetRef {
    match t {
        TargetRef::Permanent { controller, ordinal } => TargetRef::Permanent { controller: 1 - controller, ordinal },
        TargetRef::Player(p) => TargetRef::Player(1 - p),
    }
}

/// The same position with the two seats exchanged.
pub fn swap_seats(g: &GameState) -> GameState {
    let mut s = g.clone();
    s.players.swap(0, 1);
    s.active_player = 1 - g.active_player;
    s.decision_player = 1 - g.decision_player;
    s.land_played_this_turn.swap(0, 1);
    s.mana_spent.swap(0, 1);
    s.pending = g.pending.clone().map(|p| match p {
        Pending::Mulligan { player } => Pending::Mulligan { player: 1 - player },
        Pending::Bottom { player, remaining } => Pending::Bottom { player: 1 - player, remaining },
        Pending::Discard { player } => Pending::Discard { player: 1 - player },
        Pending::Target { mut spell } => {
            spell.caster = 1 - spell.caster;
            spell.target = spell.target.map(swap_target);
            Pending::Target { spell }
        }
        Pending::Payment { mut spell, remaining, tapped, countering } => {
            spell.caster = 1 - spell.caster;
            spell.target = spell.target.map(swap_target);
            let countering = countering.map(|mut c| {
                c.caster = 1 - c.caster;
                c.target = c.target.map(swap_target);
                c
            });
            Pending::Payment { spell, remaining, tapped, countering }
        }
        Pending::Response { mut spell } => {
            spell.caster = 1 - spell.caster;
            spell.target = spell.target.map(swap_target);
            Pending::Response { spell }
        }
        Pending::BlockAssign { attacker } => Pending::BlockAssign { attacker },
    });
    s.outcome = g.outcome.map(|o| match o.winner() {
        Some(w) => cmtg_core::Outcome::win_for(1 - w),
        None => o,
    });
    s
}
