use cmtg_core::scm::WinWeights;
use cmtg_learn::gradcheck::{small_net, synthetic_rollout};
use cmtg_learn::loss::{calibration_loss, gate_entropy};
use cmtg_learn::{beta_from_weights, NetConfig, PolicyNet, K};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(seed: u64, dim: usize) -> Vec<(u32, f32)> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..dim as u32).filter(|_| r.gen_bool(0.5)).map(|i| (i, 0.7)).collect()
}

#[test]
fn masked_distribution_contract() {
    let net = small_net(1);
    let o = obs(1, 10);
    let single = net.forward(&o, &[4]).unwrap();
    assert_eq!(single.prob(4), 1.0);
    assert_eq!(single.entropy(), 0.0);
    for seed in 0..50 {
        let legal: Vec<usize> = (0..7).filter(|a| (seed >> a) & 1 == 1 || *a == 6).collect();
        let out = net.forward(&obs(seed, 10), &legal).unwrap();
        let total: f64 = (0..7).map(|a| out.prob(a)).sum();
        assert!((total - 1.0).abs() < 1e-6);
        for a in 0..7 {
            if !legal.contains(&a) {
                assert_eq!(out.prob(a), 0.0);
                assert_eq!(out.log_probs_full(7)[a], f64::NEG_INFINITY);
            }
        }
        assert!(out.g > 0.0 && out.g < 1.0);
    }
    assert!(net.forward(&o, &[]).is_err());
}

#[test]
fn illegal_actions_never_sampled() {
    let net = small_net(2);
    let out = net.forward(&obs(3, 10), &[1, 5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100_000 {
        let a = out.sample(&mut rng);
        assert!(a == 1 || a == 5);
    }
}

#[test]
fn argmax_breaks_ties_low() {
    let cfg = NetConfig { obs_dim: 4, n_actions: 5, hidden: vec![3], gate_hidden: 2 };
    let mut net = PolicyNet::new(cfg, &WinWeights::default(), 0);
    let last = *net.actor.layers.last().unwrap();
    net.theta[last.w..last.b + last.n_out].iter_mut().for_each(|x| *x = 0.0);
    let out = net.forward(&[(0, 1.0)], &[3, 1, 4]).unwrap();
    assert_eq!(out.argmax(), 1);
}

#[test]
fn initial_gate_and_policy_are_neutral() {
    let net = PolicyNet::new(NetConfig::desk(), &WinWeights::default(), 4);
    let o = vec![(3u32, 1.0f32), (900, 0.5), (2000, 1.0)];
    let legal: Vec<usize> = (0..40).collect();
    let out = net.forward(&o, &legal).unwrap();
    assert!((out.g - 0.5).abs() < 0.05, "{}", out.g);
    let top = out.logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((top.exp() - 1.0 / 40.0).abs() < 0.01);
}

#[test]
fn beta_init_preserves_weight_ranking() {
    let mut w = WinWeights::default();
    w.w = [0.9, -0.4, 0.3, 0.05, 1.7, 0.0];
    let b = beta_from_weights(&w);
    let net = PolicyNet::new(NetConfig { obs_dim: 4, n_actions: 3, hidden: vec![4], gate_hidden: 2 }, &w, 0);
    let mix = net.mixture();
    assert!((mix.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for i in 0..K {
        assert!((mix[i] - b[i].exp()).abs() < 1e-12);
        for j in 0..K {
            if w.w[i] > w.w[j] && w.w[i] > 1e-3 {
                assert!(mix[i] > mix[j]);
            }
        }
    }
    // Negative and tiny weights share the floor.
    assert!((mix[1] - mix[5]).abs() < 1e-15);
}

#[test]
fn calibration_loss_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a: Vec<[f64; K]> = (0..50).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let (l, _) = calibration_loss(&a, &a, 1e-6);
    assert!((l + 1.0).abs() < 1e-4, "{l}");
    let neg: Vec<[f64; K]> = a.iter().map(|x| x.map(|v| -v)).collect();
    assert!((calibration_loss(&a, &neg, 1e-6).0 - 1.0).abs() < 1e-4);
    let mut flat = a.clone();
    flat.iter_mut().for_each(|x| x[2] = 0.25);
    let (l, g) = calibration_loss(&flat, &a, 1e-6);
    assert!(l.is_finite());
    // Five perfectly correlated factors, one contributing nothing.
    assert!((l + 5.0 / 6.0).abs() < 1e-4, "{l}");
    assert!(g.iter().all(|x| x.iter().all(|v| v.is_finite())));
}

#[test]
fn gate_entropy_peaks_at_half() {
    assert!((gate_entropy(0.5) - 2f64.ln()).abs() < 1e-15);
    assert!(gate_entropy(0.9) < gate_entropy(0.6));
}

#[test]
fn synthetic_rollouts_are_well_formed() {
    let net = small_net(0);
    let b = synthetic_rollout(&net, 30, 0).unwrap();
    b.validate().unwrap();
    assert_eq!(b.len(), 30);
}
