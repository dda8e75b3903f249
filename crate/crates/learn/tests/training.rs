use cmtg_core::Archetype;
use cmtg_learn::checkpoint::Checkpoint;
use cmtg_learn::train::{TrainConfig, Trainer, Variant};
use cmtg_learn::NetConfig;

fn tiny(variant: Variant, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::desk(Archetype::MonoRedAggro, variant, seed);
    c.net = NetConfig { hidden: vec![16], gate_hidden: 8, ..NetConfig::desk() };
    c.coeffs.n_steps = 128;
    c.coeffs.minibatch = 64;
    c.coeffs.epochs = 2;
    c.total_steps = 256;
    c.warmup_games = 10;
    c
}

#[test]
fn every_variant_trains_and_is_deterministic() {
    for v in Variant::ALL {
        let mut a = Trainer::new(tiny(v, 3)).unwrap();
        a.train().unwrap();
        assert_eq!(a.updates, 2, "{v}");
        assert_eq!(a.env_steps, 256);
        assert!(a.net.theta.iter().all(|x| x.is_finite()));
        let m = &a.metrics[1];
        assert!((m.mixture.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.lr < a.config.coeffs.lr_start);
        assert!((0.0..=1.0).contains(&m.calibration.gate_mean));
        let mut b = Trainer::new(tiny(v, 3)).unwrap();
        b.train().unwrap();
        assert_eq!(a.net.theta, b.net.theta, "{v}");
    }
}

#[test]
fn variants_parse_and_configure() {
    assert_eq!("no_gate".parse::<Variant>().unwrap(), Variant::NoGate);
    assert!("frobnicate".parse::<Variant>().is_err());
    let c = TrainConfig::desk(Archetype::MonoRedAggro, Variant::NoCalibration, 0);
    assert_eq!(c.coeffs.c_c, 0.0);
    assert_eq!(c.coeffs.c_f, 0.5);
    let s = TrainConfig::desk(Archetype::MonoRedAggro, Variant::ScalarOnly, 0);
    assert_eq!((s.coeffs.c_f, s.coeffs.c_c, s.coeffs.c_e), (0.0, 0.0, 0.0));
    assert_eq!(s.net.hidden, vec![64, 64]);
    assert_eq!(s.total_updates(), 98);
    let f = TrainConfig::full(Archetype::MonoRedAggro, Variant::Cgfa, 0);
    assert_eq!(f.net.hidden, vec![512, 256]);
    assert_eq!(f.coeffs.n_steps, 2048);
}

#[test]
fn checkpoint_round_trip() {
    let mut t = Trainer::new(tiny(Variant::Cwm, 1)).unwrap();
    t.iterate().unwrap();
    let ck = Checkpoint::from_trainer(&t);
    let dir = std::env::temp_dir().join(format!("cmtg-ck-{}", std::process::id()));
    let path = dir.join("agent.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert!(back == ck, "checkpoint changed on round trip");
    back.check_config(&t.config).unwrap();
    assert!(back.check_config(&tiny(Variant::Cgfa, 1)).is_err());
    assert!(Checkpoint::load(&dir.join("missing.json")).is_err());
    std::fs::remove_dir_all(dir).ok();

    let agent = back.agent();
    let game = cmtg_core::new_game(
        &cmtg_core::cards::deck_for(Archetype::MonoRedAggro, &cmtg_core::Catalog::bundled()).unwrap(),
        &cmtg_core::cards::deck_for(Archetype::AzoriusControl, &cmtg_core::Catalog::bundled()).unwrap(),
        5,
        30,
    )
    .unwrap();
    let a = agent.act(&game, game.decision_player).unwrap();
    assert!(game.mask().unwrap().get(a));
    assert_eq!(a, agent.act(&game, game.decision_player).unwrap());
}
