mod common;

use cmtg_core::actions::{decode, encode, layout_table, Category, NUM_ACTIONS};
use cmtg_core::cards::{classify, deck_by_name, deck_for, load_catalog, Archetype, Catalog};
use proptest::prelude::*;

const TABLE: [(&str, usize, usize); 17] = [
    ("PASS", 0, 1),
    ("KEEP", 1, 1),
    ("MULLIGAN", 2, 1),
    ("CONFIRM", 3, 1),
    ("CANCEL", 4, 1),
    ("AUTO_PAY", 5, 1),
    ("BOTTOM", 6, 10),
    ("DISCARD", 16, 10),
    ("PLAY_LAND", 26, 10),
    ("CAST_SORCERY", 36, 10),
    ("CAST_INSTANT", 46, 10),
    ("ACTIVATE", 56, 60),
    ("ATTACK_TOGGLE", 116, 60),
    ("BLOCK_SELECT_ATTACKER", 176, 60),
    ("BLOCK_SELECT_BLOCKER", 236, 60),
    ("TARGET", 296, 122),
    ("MANA_SOURCE", 418, 60),
];

#[test]
fn layout_matches_table() {
    let rows = layout_table();
    assert_eq!(rows.len(), TABLE.len());
    for (row, (name, base, count)) in rows.iter().zip(TABLE) {
        assert_eq!((row.category.as_str(), row.base, row.count), (name, base, count));
    }
    assert_eq!(TABLE.iter().map(|r| r.2).sum::<usize>(), NUM_ACTIONS);
    // Ranges partition [0, 478).
    let mut next = 0;
    for (_, base, count) in TABLE {
        assert_eq!(base, next);
        next += count;
    }
    assert_eq!(next, 478);
}

#[test]
fn encode_examples() {
    assert_eq!(encode(Category::Pass, 0).unwrap(), 0);
    assert_eq!(encode(Category::PlayLand, 0).unwrap(), 26);
    assert_eq!(encode(Category::Target, 121).unwrap(), 417);
    assert!(encode(Category::Target, 122).is_err());
    let d = decode(477).unwrap();
    assert_eq!((d.category, d.slot), (Category::ManaSource, 59));
    let d = decode(2).unwrap();
    assert_eq!((d.category, d.slot), (Category::Mulligan, 0));
    assert!(decode(478).is_err());
}

#[test]
fn bijection_exhaustive() {
    for i in 0..NUM_ACTIONS {
        let d = decode(i).unwrap();
        assert_eq!(encode(d.category, d.slot).unwrap(), i);
    }
}

proptest! {
    #[test]
    fn encode_decode_roundtrip(cat_ix in 0usize..17, slot in 0usize..122) {
        let cat = Category::ALL[cat_ix];
        match encode(cat, slot) {
            Ok(i) => {
                let d = decode(i).unwrap();
                prop_assert_eq!((d.category, d.slot), (cat, slot));
            }
            Err(_) => prop_assert!(slot >= cat.count()),
        }
    }
}

#[test]
fn catalog_has_pool() {
    assert_eq!(Catalog::bundled().len(), 56);
}

#[test]
fn decks_sum_to_sixty() {
    let cat = Catalog::bundled();
    for a in Archetype::ALL {
        let d = deck_for(a, &cat).unwrap();
        assert_eq!(d.total(), 60, "{a:?}");
        assert!(d.entries.iter().all(|(_, n)| *n >= 1));
    }
    let red = deck_for(Archetype::MonoRedAggro, &cat).unwrap();
    assert_eq!(red.count_of(cat.lookup("mountain").unwrap()), 20);
    assert_eq!(red.count_of(cat.lookup("monastery_swiftspear").unwrap()), 4);
    assert!(deck_by_name("Jund", &cat).is_err());
}

#[test]
fn classify_examples() {
    let cat = Catalog::bundled();
    let get = |id: &str| cat.get(cat.lookup(id).unwrap());
    assert!(classify(get("mountain")).mana_producer);
    assert!(classify(get("go_for_the_throat")).is_removal);
    assert!(classify(get("llanowar_elves")).mana_producer);
    // Total and deterministic.
    for (_, c) in cat.cards() {
        assert_eq!(classify(c), classify(c));
    }
}

#[test]
fn catalog_rejects_bad_documents() {
    let bad_dup = format!(
        "{}\n{}",
        Catalog::bundled_source(),
        "[[card]]\nid = \"mountain\"\nname = \"Mountain\"\nkind = \"land\"\nproduces = [\"R\"]\neffects = [{ type = \"add_mana\" }]\nflags = { mana_producer = true }\n"
    );
    assert!(load_catalog(&bad_dup).is_err());
    let no_toughness = "schema_version = 1\n[[card]]\nid = \"x\"\nname = \"X\"\nkind = \"creature\"\npower = 2\nflags = { is_threat = true }\n";
    assert!(load_catalog(no_toughness).is_err());
}

#[test]
fn fresh_game_mask_is_keep_mulligan() {
    let g = common::game(Archetype::MonoRedAggro, Archetype::AzoriusControl, 7);
    assert_eq!(g.mask().unwrap().to_vec(), vec![1, 2]);
}

#[test]
fn mulligan_capped_at_three() {
    let mut g = common::game(Archetype::DomainRamp, Archetype::DimirMidrange, 3);
    for _ in 0..3 {
        g.step(2).unwrap();
    }
    let m = g.mask().unwrap();
    assert!(m.get(1));
    assert!(!m.get(2));
    g.step(1).unwrap();
    // Bottom three, ending at four cards.
    for _ in 0..3 {
        let a = g.legal_actions().unwrap()[0];
        assert_eq!(decode(a).unwrap().category, Category::Bottom);
        g.step(a).unwrap();
    }
    assert_eq!(g.players[0].hand.len(), 4);
    assert_eq!(g.players[0].mulligans_taken, 3);
}
