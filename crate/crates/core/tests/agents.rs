mod common;

use cmtg_core::actions::{decode, encode, ActionMask, Category};
use cmtg_core::agents::{heuristic_act, random_act, HeuristicParams, ScriptedAgent};
use cmtg_core::cards::{Archetype, Catalog, Color, ColorSet};
use cmtg_core::engine::{GameState, TokenStats};
use cmtg_core::Phase;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_split_is_fair() {
    let m = ActionMask::from_indices([0, 26]);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 10_000;
    let hits = (0..n).filter(|_| random_act(&m, &mut rng).unwrap() == 26).count() as f64;
    // Binomial(10^4, 1/2): 3 sigma = 150.
    assert!((hits - 5000.0).abs() <= 150.0, "{hits}");
}

#[test]
fn random_is_reproducible() {
    let m = ActionMask::from_indices([0, 3, 26, 300, 477]);
    let draw = |seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..100).map(|_| random_act(&m, &mut r).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(4), draw(4));
    assert_ne!(draw(4), draw(5));
}

#[test]
fn aggro_mulligans_landless_hand() {
    let cat = Catalog::bundled();
    let mut g = common::game(Archetype::MonoRedAggro, Archetype::MonoRedAggro, 1);
    let spell = cat.lookup("shock").unwrap();
    g.players[0].hand = vec![spell; 7];
    let p = HeuristicParams::for_archetype(Archetype::MonoRedAggro);
    assert_eq!(heuristic_act(&g, &p, Archetype::MonoRedAggro).unwrap(), 2);
    let land = cat.lookup("mountain").unwrap();
    g.players[0].hand[0] = land;
    assert_eq!(heuristic_act(&g, &p, Archetype::MonoRedAggro).unwrap(), 1);
    // Control wants two.
    let pc = HeuristicParams::for_archetype(Archetype::AzoriusControl);
    assert_eq!(heuristic_act(&g, &pc, Archetype::AzoriusControl).unwrap(), 2);
}

#[test]
fn keeps_after_three_mulligans() {
    let cat = Catalog::bundled();
    let mut g = common::game(Archetype::MonoRedAggro, Archetype::MonoRedAggro, 1);
    for _ in 0..3 {
        g.step(2).unwrap();
    }
    g.players[0].hand = vec![cat.lookup("shock").unwrap(); 7];
    let p = HeuristicParams::for_archetype(Archetype::MonoRedAggro);
    assert_eq!(heuristic_act(&g, &p, Archetype::MonoRedAggro).unwrap(), 1);
}

fn main_phase_state(seed: u64) -> GameState {
    let mut g = common::game(Archetype::DomainRamp, Archetype::AzoriusControl, seed);
    g.step(1).unwrap();
    g.step(1).unwrap();
    g
}

#[test]
fn plays_land_first() {
    let cat = Catalog::bundled();
    for a in Archetype::ALL {
        let mut g = main_phase_state(3);
        assert!(g.phase.is_main());
        let me = g.active_player;
        g.players[me].hand.insert(0, cat.lookup("forest").unwrap());
        g.refresh();
        let act = heuristic_act(&g, &HeuristicParams::for_archetype(a), a).unwrap();
        assert_eq!(decode(act).unwrap().category, Category::PlayLand, "{a:?}");
    }
}

fn token(g: &mut GameState, player: usize, power: i32, toughness: i32) -> u32 {
    let cat = Catalog::bundled();
    let o = g.add_permanent(player, cat.lookup("deep_cavern_bat").unwrap(), false).unwrap();
    g.players[player].permanent_mut(o).unwrap().token =
        Some(TokenStats { power, toughness, colors: ColorSet::single(Color::B) });
    o
}

/// Drive the defender's block declarations with the heuristic until it
/// passes, then return the final state.
fn run_blocks(mut g: GameState, a: Archetype) -> GameState {
    let p = HeuristicParams::for_archetype(a);
    let def = 1 - g.active_player;
    for _ in 0..50 {
        if g.phase != Phase::CombatDeclareBlockers || g.decision_player != def || g.outcome.is_some() {
            break;
        }
        let act = heuristic_act(&g, &p, a).unwrap();
        assert!(g.legal_actions().unwrap().contains(&act));
        g.step(act).unwrap();
    }
    g
}

/// Every small lethal-attack scenario with at least one usable blocker:
/// the defender never takes lethal damage while a block could prevent it.
#[test]
fn never_passes_into_preventable_lethal() {
    for a in Archetype::ALL {
        for life in 1..=8 {
            for n_att in 1..=3 {
                for att_power in 1..=4 {
                    for n_blk in 1..=2 {
                        let mut g = main_phase_state(7);
                        let atk = g.active_player;
                        let def = 1 - atk;
                        for p in &mut g.players {
                            p.battlefield.clear();
                        }
                        let mut total = 0;
                        for i in 0..n_att {
                            let o = token(&mut g, atk, att_power + i, 2);
                            g.players[atk].permanent_mut(o).unwrap().attacking = true;
                            g.players[atk].permanent_mut(o).unwrap().tapped = true;
                            total += att_power + i;
                        }
                        for _ in 0..n_blk {
                            token(&mut g, def, 1, 1);
                        }
                        g.players[def].life = life;
                        g.players[def].hand.clear();
                        g.phase = Phase::CombatDeclareBlockers;
                        g.refresh();
                        let first = heuristic_act(&g, &HeuristicParams::for_archetype(a), a).unwrap();
                        let end = run_blocks(g, a);
                        // Biggest attackers blocked first: the remaining damage.
                        let mut powers: Vec<i32> = (0..n_att).map(|i| att_power + i).collect();
                        powers.sort_unstable_by(|x, y| y.cmp(x));
                        let mut incoming = total;
                        let mut blocks = 0;
                        for p in &powers {
                            if incoming < life || blocks == n_blk {
                                break;
                            }
                            incoming -= p;
                            blocks += 1;
                        }
                        let survivable = incoming < life;
                        if total >= life {
                            assert_eq!(
                                decode(first).unwrap().category,
                                Category::BlockSelectAttacker,
                                "{a:?} life {life} attackers {n_att}x{att_power} blockers {n_blk}"
                            );
                        }
                        if survivable {
                            assert!(end.players[def].life > 0, "{a:?} died at life {life}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn control_blocks_at_seven_life() {
    let mut g = main_phase_state(9);
    let atk = g.active_player;
    let def = 1 - atk;
    for p in &mut g.players {
        p.battlefield.clear();
    }
    let o = token(&mut g, atk, 7, 2);
    g.players[atk].permanent_mut(o).unwrap().attacking = true;
    token(&mut g, def, 2, 2);
    g.players[def].life = 7;
    g.phase = Phase::CombatDeclareBlockers;
    g.refresh();
    let a = Archetype::AzoriusControl;
    let act = heuristic_act(&g, &HeuristicParams::for_archetype(a), a).unwrap();
    assert_eq!(act, encode(Category::BlockSelectAttacker, (o % 60) as usize).unwrap());
}

#[test]
fn fuzz_actions_always_masked_in() {
    for seed in 0..10_000u64 {
        let a = Archetype::ALL[(seed % 5) as usize];
        let b = Archetype::ALL[((seed / 5) % 5) as usize];
        let agents = if seed % 4 == 0 {
            [ScriptedAgent::Random, ScriptedAgent::heuristic(b)]
        } else {
            [ScriptedAgent::heuristic(a), ScriptedAgent::heuristic(b)]
        };
        let g = common::game(a, b, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = g;
        let mut n = 0;
        while g.outcome.is_none() {
            let act = agents[g.decision_player].act(&g, &mut rng).unwrap();
            assert!(g.mask().unwrap().get(act));
            g.step(act).unwrap();
            n += 1;
            assert!(n < 50_000);
        }
    }
}
