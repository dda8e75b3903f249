use cmtg_core::agents::ScriptedAgent;
use cmtg_core::cards::Archetype;
use cmtg_core::env::{Env, EnvConfig, Opponent};
use cmtg_core::rewards::{
    dense_reward, factor_rewards, potential, shaped_reward, DenseCoeffs, RewardConfig, RewardScheme, ShapingCoeffs,
};
use cmtg_core::scm::{CausalVars, TempoInputs, Var, NUM_FACTORS, NUM_VARS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn env(scheme: RewardScheme, gamma: f64) -> Env {
    let mut cfg = EnvConfig::heuristic_pool(Archetype::MonoRedAggro);
    cfg.opponents.push(Opponent::random(Archetype::DomainRamp));
    cfg.reward = RewardConfig { scheme, shaping: ShapingCoeffs { gamma, ..Default::default() }, dense: DenseCoeffs::default() };
    Env::new(cfg).unwrap()
}

#[test]
fn shaped_episode_telescopes() {
    let coeffs = ShapingCoeffs { gamma: 1.0, ..Default::default() };
    let mut e = env(RewardScheme::Shaped, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for ep in 0..100u64 {
        e.reset(ep).unwrap();
        let phi0 = potential(e.vars().unwrap(), &coeffs);
        let start_factors = e.vars().unwrap().factors();
        let (mut total, mut sparse) = (0.0, 0.0);
        let mut fsum = [0.0; NUM_FACTORS];
        loop {
            let a = ScriptedAgent::Random.act(e.state().unwrap(), &mut rng).unwrap();
            let t = e.step(a).unwrap();
            total += t.reward;
            sparse += t.terminal_reward;
            for k in 0..NUM_FACTORS {
                fsum[k] += t.r_factor[k];
            }
            if t.done {
                break;
            }
        }
        let phi_t = potential(e.vars().unwrap(), &coeffs);
        assert!((total - (sparse + phi_t - phi0)).abs() < 1e-9, "episode {ep}");
        let end = e.vars().unwrap().factors();
        for k in 0..NUM_FACTORS {
            assert!((fsum[k] - (end[k] - start_factors[k])).abs() < 1e-9);
        }
    }
}

#[test]
fn sparse_and_dense_channels() {
    let mut sparse = env(RewardScheme::Sparse, 0.995);
    let mut dense = env(RewardScheme::Dense, 0.995);
    let mut shaped = env(RewardScheme::Shaped, 0.995);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for ep in 0..20u64 {
        sparse.reset(ep).unwrap();
        dense.reset(ep).unwrap();
        shaped.reset(ep).unwrap();
        loop {
            let a = ScriptedAgent::Random.act(sparse.state().unwrap(), &mut rng).unwrap();
            let ts = sparse.step(a).unwrap();
            let td = dense.step(a).unwrap();
            let th = shaped.step(a).unwrap();
            if !ts.done {
                assert_eq!(ts.reward, 0.0);
            }
            let bonus = dense_reward(&td.events, &DenseCoeffs::default()).unwrap();
            assert!((td.reward - (th.reward + bonus)).abs() < 1e-12);
            if ts.done {
                assert!(matches!(ts.reward as i32, -1..=1));
                break;
            }
        }
    }
}

fn vars_from(x: [f64; 5]) -> CausalVars {
    let mut v = CausalVars { values: [0.0; NUM_VARS], tempo_inputs: TempoInputs::default() };
    for (var, val) in [Var::ManaT, Var::CardAdv, Var::BoardPress, Var::Tempo, Var::LifeBuffer].into_iter().zip(x) {
        v.set(var, val);
    }
    v
}

proptest! {
    #[test]
    fn potential_is_linear(x in prop::array::uniform5(-5.0f64..5.0), a in -2.0f64..2.0) {
        let c = ShapingCoeffs::default();
        let scaled = x.map(|v| v * a);
        let lhs = potential(&vars_from(scaled), &c);
        let rhs = a * potential(&vars_from(x), &c);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn trajectory_telescopes(traj in prop::collection::vec(prop::array::uniform5(-5.0f64..5.0), 2..40)) {
        let c = ShapingCoeffs { gamma: 1.0, ..Default::default() };
        let vs: Vec<_> = traj.iter().map(|x| vars_from(*x)).collect();
        let sum: f64 = vs.windows(2).map(|w| shaped_reward(&w[0], &w[1], 0.0, &c)).sum();
        let want = potential(vs.last().unwrap(), &c) - potential(&vs[0], &c);
        prop_assert!((sum - want).abs() < 1e-9);
        let fsum = vs.windows(2).fold([0.0; NUM_FACTORS], |mut acc, w| {
            let r = factor_rewards(&w[0].factors(), &w[1].factors());
            for k in 0..NUM_FACTORS { acc[k] += r[k]; }
            acc
        });
        let (a, b) = (vs[0].factors(), vs.last().unwrap().factors());
        for k in 0..NUM_FACTORS {
            prop_assert!((fsum[k] - (b[k] - a[k])).abs() < 1e-9);
        }
    }
}

#[test]
fn scheme_names_roundtrip() {
    for s in RewardScheme::ALL {
        assert_eq!(s.as_str().parse::<RewardScheme>().unwrap(), s);
    }
    assert!("curiosity".parse::<RewardScheme>().is_err());
    assert!(ShapingCoeffs { gamma: 0.0, ..Default::default() }.validate().is_err());
    assert!(ShapingCoeffs::default().validate().is_ok());
}
