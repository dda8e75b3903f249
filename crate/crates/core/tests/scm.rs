mod common;

use std::collections::BTreeSet;

use cmtg_core::actions::{encode, Category};
use cmtg_core::cards::{Archetype, Catalog, Color, ColorSet};
use cmtg_core::engine::{GameState, TokenStats};
use cmtg_core::scm::{
    extract, fit_winprob, win_prob, CausalGraph, CausalVars, OutcomeBuffer, Scm, TempoInputs, Var, WinWeights,
    FACTORS, NUM_FACTORS, NUM_VARS,
};
use cmtg_core::Phase;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edges copied independently from the drawn causal graph.
const DRAWN: [(&str, &str); 17] = [
    ("mana_t", "mana_t1"),
    ("mana_creatures", "mana_t1"),
    ("land_drop", "mana_t1"),
    ("mana_t", "tempo"),
    ("mana_t1", "board_press"),
    ("mana_t1", "threat_density"),
    ("board_press", "card_adv"),
    ("board_press", "tempo"),
    ("board_press", "win_prob"),
    ("threat_density", "win_prob"),
    ("threat_density", "board_press"),
    ("card_count", "card_adv"),
    ("has_removal", "removal_avail"),
    ("removal_avail", "win_prob"),
    ("card_adv", "win_prob"),
    ("tempo", "win_prob"),
    ("life_buffer", "win_prob"),
];

/// Warshall transitive closure over the drawn edges.
fn closure_oracle() -> [[bool; NUM_VARS]; NUM_VARS] {
    let ix = |n: &str| n.parse::<Var>().unwrap().index();
    let mut r = [[false; NUM_VARS]; NUM_VARS];
    for (a, b) in DRAWN {
        r[ix(a)][ix(b)] = true;
    }
    for k in 0..NUM_VARS {
        for i in 0..NUM_VARS {
            for j in 0..NUM_VARS {
                r[i][j] = r[i][j] || (r[i][k] && r[k][j]);
            }
        }
    }
    r
}

fn oracle_desc(v: Var) -> BTreeSet<Var> {
    let r = closure_oracle();
    Var::ALL.into_iter().filter(|w| r[v.index()][w.index()]).collect()
}

fn random_value<R: Rng>(v: Var, r: &mut R) -> f64 {
    if v.is_binary() {
        return if r.gen_bool(0.5) { 1.0 } else { 0.0 };
    }
    let (lo, hi) = v.range();
    match v {
        Var::ManaT | Var::ManaCreatures | Var::ManaT1 | Var::CardCount | Var::BoardPress | Var::CardAdv | Var::LifeBuffer => {
            r.gen_range(lo as i32..=hi as i32) as f64
        }
        Var::WinProb => r.gen_range(0.01..0.99),
        _ => r.gen_range(lo..=hi),
    }
}

fn random_vars<R: Rng>(r: &mut R) -> CausalVars {
    let mut v = CausalVars { values: [0.0; NUM_VARS], tempo_inputs: TempoInputs::default() };
    for var in Var::ALL {
        v.set(var, random_value(var, r));
    }
    v.tempo_inputs = TempoInputs {
        mana_spent: r.gen_range(0..8) as f64,
        opp_mana_spent: r.gen_range(0..8) as f64,
        opp_mana: r.gen_range(0..8) as f64,
    };
    v
}

fn random_weights<R: Rng>(r: &mut R) -> WinWeights {
    let mut w = WinWeights::default();
    for k in 0..NUM_FACTORS {
        w.w[k] = r.gen_range(-1.0..1.0);
        w.means[k] = r.gen_range(-2.0..2.0);
        w.stds[k] = r.gen_range(0.5..3.0);
    }
    w.intercept = r.gen_range(-1.0..1.0);
    w
}

#[test]
fn graph_structure() {
    let g = CausalGraph::default();
    assert_eq!(g.edges.len(), 17);
    let parents: BTreeSet<Var> = g.parents(Var::WinProb).into_iter().collect();
    assert_eq!(parents, FACTORS.into_iter().collect());
    assert!(g.descendants(Var::WinProb).is_empty());
    let land = g.descendants(Var::LandDrop);
    assert!(land.contains(&Var::ManaT1) && land.contains(&Var::WinProb));
    assert_eq!(g.descendants(Var::HasRemoval), [Var::RemovalAvail, Var::WinProb].into_iter().collect());
    // The operator's closure matches the independent one for every node.
    for v in Var::ALL {
        assert_eq!(g.descendants(v), oracle_desc(v), "{v}");
    }
    assert!(g.descendants_by_name("mana").is_err());
    let dot = g.to_dot();
    assert_eq!(dot.matches("->").count(), 17);
}

#[test]
fn topological_order_respects_edges() {
    let g = CausalGraph::default();
    let order = g.topological_order();
    assert_eq!(order.len(), NUM_VARS);
    let pos = |v: Var| order.iter().position(|&x| x == v).unwrap();
    for (a, b) in &g.edges {
        assert!(pos(*a) < pos(*b));
    }
}

fn board(seed: u64) -> GameState {
    let mut g = common::game(Archetype::DimirMidrange, Archetype::MonoRedAggro, seed);
    g.step(1).unwrap();
    g.step(1).unwrap();
    for p in &mut g.players {
        p.battlefield.clear();
        p.hand.clear();
    }
    g.mana_spent = [0, 0];
    g
}

fn token(g: &mut GameState, player: usize, power: i32, toughness: i32) -> u32 {
    let cat = Catalog::bundled();
    let o = g.add_permanent(player, cat.lookup("deep_cavern_bat").unwrap(), false).unwrap();
    g.players[player].permanent_mut(o).unwrap().token = Some(TokenStats { power, toughness, colors: ColorSet::single(Color::B) });
    o
}

fn land(g: &mut GameState, player: usize, id: &str) {
    let cat = Catalog::bundled();
    g.add_permanent(player, cat.lookup(id).unwrap(), false).unwrap();
}

#[test]
fn extract_examples() {
    let mut g = board(1);
    token(&mut g, 0, 2, 2);
    token(&mut g, 0, 2, 2);
    token(&mut g, 1, 3, 3);
    let v = extract(&g, 0, &WinWeights::default());
    assert_eq!(v.get(Var::BoardPress), 1.0);
    assert_eq!(extract(&g, 1, &WinWeights::default()).get(Var::BoardPress), -1.0);

    land(&mut g, 0, "swamp");
    land(&mut g, 0, "island");
    let v = extract(&g, 0, &WinWeights::default());
    assert_eq!(v.get(Var::ThreatDensity), 0.5);
    assert_eq!(v.get(Var::ManaT), 2.0);
    assert_eq!(v.get(Var::CardAdv), 3.0);

    let empty = board(2);
    let v = extract(&empty, 0, &WinWeights::default());
    assert_eq!(v.get(Var::ThreatDensity), 0.0);
    assert_eq!(v.get(Var::BoardPress), 0.0);
}

#[test]
fn extract_hand_variables() {
    let cat = Catalog::bundled();
    let mut g = board(3);
    g.players[0].hand = vec![cat.lookup("go_for_the_throat").unwrap(), cat.lookup("swamp").unwrap()];
    let v = extract(&g, 0, &WinWeights::default());
    assert_eq!(v.get(Var::HasRemoval), 1.0);
    assert_eq!(v.get(Var::RemovalAvail), 1.0);
    assert_eq!(v.get(Var::LandDrop), 1.0);
    assert_eq!(v.get(Var::CardCount), 2.0);
    let opp = extract(&g, 1, &WinWeights::default());
    assert_eq!(opp.get(Var::HasRemoval), 0.0);
    assert_eq!(opp.get(Var::CardCount), 0.0);
}

#[test]
fn do_examples() {
    let scm = Scm::default();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut v = random_vars(&mut r);
    v.set(Var::ManaT, 2.0);
    v.set(Var::ManaCreatures, 0.0);
    v.set(Var::LandDrop, 0.0);
    let v = scm.structural_eval(&v);
    let after = scm.do_intervene(&v, &[(Var::LandDrop, 1.0)]).unwrap();
    assert_eq!(after.get(Var::ManaT1), 3.0);
    assert_eq!(after.get(Var::BoardPress), v.get(Var::BoardPress));
    assert_eq!(after.get(Var::WinProb), win_prob(&after, &scm.weights));

    let mut w = WinWeights::default();
    w.w[3] = 0.8;
    let scm = Scm::new(w);
    let mut base = scm.structural_eval(&v);
    base.set(Var::LifeBuffer, 0.0);
    let base = scm.structural_eval(&base);
    let up = scm.do_intervene(&base, &[(Var::LifeBuffer, 20.0)]).unwrap();
    assert!(up.get(Var::WinProb) > base.get(Var::WinProb));

    let m = scm.do_intervene(&base, &[(Var::ManaT, 5.0)]).unwrap();
    assert_eq!(m.get(Var::CardAdv), base.get(Var::CardAdv));
    assert!(scm.do_intervene(&base, &[(Var::ManaT, 11.0)]).is_err());
    assert!(scm.do_intervene(&base, &[(Var::LandDrop, 0.5)]).is_err());
    assert!(scm.do_intervene(&base, &[(Var::WinProb, 1.0)]).is_err());
}

#[test]
fn win_prob_examples() {
    let v = CausalVars { values: [0.0; NUM_VARS], tempo_inputs: TempoInputs::default() };
    assert_eq!(win_prob(&v, &WinWeights::zero()), 0.5);
    let w = WinWeights { w: [0.3; NUM_FACTORS], ..Default::default() };
    let mut a = v;
    for f in FACTORS {
        a.set(f, 0.4);
    }
    let mut b = a;
    for f in FACTORS {
        b.set(f, 0.8);
    }
    assert!(win_prob(&b, &w) >= win_prob(&a, &w));
    let mut extreme = v;
    extreme.set(Var::LifeBuffer, 20.0);
    let huge = WinWeights { w: [1e6; NUM_FACTORS], ..Default::default() };
    let p = win_prob(&extreme, &huge);
    assert!(p > 0.0 && p < 1.0);
}

fn synthetic_buffer(n: usize, seed: u64, label: impl Fn(&[f64; NUM_FACTORS]) -> bool) -> OutcomeBuffer {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut b = OutcomeBuffer::default();
    for _ in 0..n {
        let mut phi = [0.0; NUM_FACTORS];
        for (k, f) in FACTORS.iter().enumerate() {
            phi[k] = random_value(*f, &mut r);
        }
        let y = label(&phi);
        b.push(phi, y);
    }
    b
}

#[test]
fn fit_recovers_life_weight() {
    let buf = synthetic_buffer(1000, 3, |phi| phi[3] > 0.0);
    let w = fit_winprob(&buf, &WinWeights::zero());
    assert!(w.w[3] > 0.0);
    let correct = buf.iter().filter(|(phi, y)| (w.prob(phi) > 0.5) == *y).count();
    assert!(correct as f64 / buf.len() as f64 > 0.9, "accuracy {correct}");
    let w2 = fit_winprob(&buf, &WinWeights::default());
    assert!(w2.w[3] > w2.w[0]);
}

#[test]
fn fit_edge_cases() {
    let empty = OutcomeBuffer::default();
    let w0 = WinWeights::default();
    assert_eq!(fit_winprob(&empty, &w0), w0);

    let mut buf = synthetic_buffer(300, 4, |phi| phi[1] > 0.0);
    // Make removal_avail constant.
    let items: Vec<_> = buf.iter().cloned().collect();
    buf = OutcomeBuffer::default();
    for (mut phi, y) in items {
        phi[5] = 1.0;
        buf.push(phi, y);
    }
    let w = fit_winprob(&buf, &w0);
    assert!(w.w.iter().all(|x| x.is_finite()) && w.intercept.is_finite());
    assert!(w.stds.iter().all(|s| *s > 0.0));
    // The constant column standardizes to zero, so its gradient is zero.
    assert_eq!(w.w[5], w0.w[5]);
}

#[test]
fn buffer_evicts_oldest() {
    let mut b = OutcomeBuffer::new(3);
    for i in 0..5 {
        b.push([i as f64; NUM_FACTORS], i % 2 == 0);
    }
    assert_eq!(b.len(), 3);
    assert_eq!(b.iter().next().unwrap().0[0], 2.0);
    assert_eq!(OutcomeBuffer::default().capacity(), 2000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// For every variable: intervening changes nothing outside its
    /// descendants, values stay in range, and structural_eval is idempotent.
    #[test]
    fn intervention_locality(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let scm = Scm::new(random_weights(&mut r));
        let vars = scm.structural_eval(&random_vars(&mut r));
        prop_assert_eq!(scm.structural_eval(&vars), vars);
        for v in Var::ALL {
            let x = random_value(v, &mut r);
            let out = scm.do_intervene(&vars, &[(v, x)]).unwrap();
            let allowed = oracle_desc(v);
            for w in Var::ALL {
                if w != v && !allowed.contains(&w) {
                    prop_assert_eq!(out.get(w).to_bits(), vars.get(w).to_bits(), "do({}) moved {}", v, w);
                }
            }
            prop_assert_eq!(out.get(v), x);
            prop_assert!(out.all_in_range());
        }
        prop_assert_eq!(scm.do_intervene(&vars, &[]).unwrap(), vars);
    }
}

#[test]
fn extracted_states_in_range() {
    let scm = Scm::default();
    for g in common::sample_states(1500, 9) {
        for p in 0..2 {
            let v = scm.extract(&g, p);
            assert!(v.all_in_range(), "{v:?}");
            assert_eq!(v.get(Var::RemovalAvail), v.get(Var::HasRemoval));
            assert_eq!(scm.structural_eval(&v), v);
        }
    }
}

#[test]
fn every_legal_action_has_finite_effect() {
    let scm = Scm::default();
    for g in common::sample_states(400, 13) {
        for a in g.legal_actions().unwrap() {
            let eps = scm.intervention_effect(&g, a).unwrap();
            assert!(eps.iter().all(|x| x.is_finite()));
        }
        assert!(scm.intervention_effect(&g, 477).is_err() || g.legal_actions().unwrap().contains(&477));
    }
}

#[test]
fn pass_has_zero_effect() {
    let scm = Scm::default();
    for g in common::sample_states(200, 17) {
        if g.legal_actions().unwrap().contains(&0) {
            assert_eq!(scm.intervention_effect(&g, 0).unwrap(), [0.0; NUM_FACTORS]);
        }
    }
}

#[test]
fn removal_on_three_power_creature() {
    let cat = Catalog::bundled();
    let mut g = board(21);
    let me = g.active_player;
    g.phase = Phase::Main1;
    land(&mut g, me, "swamp");
    land(&mut g, me, "swamp");
    let target = token(&mut g, 1 - me, 3, 3);
    g.players[me].hand = vec![cat.lookup("go_for_the_throat").unwrap()];
    g.refresh();
    let scm = Scm::default();
    let cast = encode(Category::CastInstant, 0).unwrap();
    // Targeted spells are credited when the target is chosen.
    assert_eq!(scm.intervention_effect(&g, cast).unwrap(), [0.0; NUM_FACTORS]);
    g.step(cast).unwrap();
    let slot = g.target_slot(me, cmtg_core::engine::TargetRef::Permanent { controller: 1 - me, ordinal: target });
    let eps = scm.intervention_effect(&g, encode(Category::Target, slot).unwrap()).unwrap();
    assert_eq!(eps[1], 3.0, "{eps:?}");
    assert_eq!(eps[0], 1.0);
    // Casting the only removal spell empties removal availability.
    assert_eq!(eps[5], -1.0);
}

#[test]
fn play_land_effect_follows_tempo_equation() {
    let cat = Catalog::bundled();
    let mut g = board(22);
    let me = g.active_player;
    g.phase = Phase::Main1;
    land(&mut g, me, "swamp");
    land(&mut g, 1 - me, "mountain");
    g.mana_spent = [0, 0];
    g.mana_spent[me] = 1;
    g.mana_spent[1 - me] = 1;
    g.players[me].hand = vec![cat.lookup("island").unwrap()];
    g.refresh();
    let scm = Scm::default();
    let before = scm.extract(&g, me);
    let eps = scm.intervention_effect(&g, encode(Category::PlayLand, 0).unwrap()).unwrap();
    // Oracle: tempo = clip(1/max(1, 2) - 1/max(1, 1)) after the land adds a source.
    let tempo_after: f64 = (1.0_f64 / 2.0 - 1.0 / 1.0).clamp(-1.0, 1.0);
    assert!((eps[2] - (tempo_after - before.get(Var::Tempo))).abs() < 1e-12);
    assert_eq!(eps[1], 0.0);
}
