use cmtg_learn::buffer::{prepare, RolloutBuffer, Step};
use cmtg_learn::{blend_advantage, factor_returns_advantages, gae, K};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct double sum: A_t = sum_i (gamma lambda)^i delta_{t+i}, stopping
/// after the first terminal.
fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let nv = if d[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { boot };
            r[t] + g * nv - v[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut s = 0.0;
            let mut w = 1.0;
            for i in t..n {
                s += w * delta[i];
                if d[i] {
                    break;
                }
                w *= g * l;
            }
            s
        })
        .collect()
}

#[test]
fn gae_examples() {
    let (a, ret) = gae(&[1.0], &[0.5], &[false], 2.0, 0.9, 0.3).unwrap();
    assert!((a[0] - (1.0 + 0.9 * 2.0 - 0.5)).abs() < 1e-15);
    assert!((ret[0] - (a[0] + 0.5)).abs() < 1e-15);
    let (a, _) = gae(&[1.0], &[0.5], &[true], 2.0, 0.9, 0.3).unwrap();
    assert!((a[0] - 0.5).abs() < 1e-15);
    let r = [0.1, -0.2, 0.3, 0.4];
    let v = [0.5, 0.1, -0.3, 0.2];
    let d = [false, true, false, false];
    let (a, _) = gae(&r, &v, &d, 0.7, 0.99, 0.0).unwrap();
    for t in 0..4 {
        let nv = if d[t] { 0.0 } else if t < 3 { v[t + 1] } else { 0.7 };
        assert!((a[t] - (r[t] + 0.99 * nv - v[t])).abs() < 1e-15);
    }
    assert!(gae(&r, &v[..3], &d, 0.0, 0.9, 0.9).is_err());
}

#[test]
fn gae_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let n = 20;
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.15)).collect();
        let boot = rng.gen_range(-1.0..1.0);
        let (g, l) = (rng.gen_range(0.5..1.0), rng.gen_range(0.0..1.0));
        let (a, _) = gae(&r, &v, &d, boot, g, l).unwrap();
        for (x, y) in a.iter().zip(gae_oracle(&r, &v, &d, boot, g, l)) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn factor_channels_are_scalar_gae() {
    let z = vec![[0.0; K]; 5];
    let (_, a) = factor_returns_advantages(&z, &z, &[false; 5], &[0.0; K], 0.99, 0.95).unwrap();
    assert!(a.iter().all(|x| x.iter().all(|v| *v == 0.0)));

    let mut ones = vec![[0.0; K]; 5];
    ones.iter_mut().for_each(|x| x[2] = 1.0);
    let (_, a) = factor_returns_advantages(&ones, &z, &[false; 5], &[3.0; K], 0.0, 0.95).unwrap();
    assert!(a.iter().all(|x| x[2] == 1.0 && x[0] == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 30;
    let rf: Vec<[f64; K]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let vk: Vec<[f64; K]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let d: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
    let boot: [f64; K] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let (g, a) = factor_returns_advantages(&rf, &vk, &d, &boot, 0.95, 0.9).unwrap();
    for k in 0..K {
        let r: Vec<f64> = rf.iter().map(|x| x[k]).collect();
        let v: Vec<f64> = vk.iter().map(|x| x[k]).collect();
        let want = gae_oracle(&r, &v, &d, boot[k], 0.95, 0.9);
        for t in 0..n {
            assert!((a[t][k] - want[t]).abs() < 1e-12);
            assert!((g[t][k] - (a[t][k] + vk[t][k])).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn blend_endpoints(a_s in -5.0f64..5.0, a_k in prop::array::uniform6(-5.0f64..5.0), beta in prop::array::uniform6(-3.0f64..3.0)) {
        prop_assert_eq!(blend_advantage(a_s, &a_k, 0.0, &beta), a_s);
        let mean = a_k.iter().sum::<f64>() / K as f64;
        prop_assert!((blend_advantage(a_s, &a_k, 1.0, &[0.0; K]) - mean).abs() < 1e-12);
        let mut one_hot = [-1e3; K];
        one_hot[3] = 0.0;
        prop_assert!((blend_advantage(a_s, &a_k, 0.5, &one_hot) - 0.5 * (a_s + a_k[3])).abs() < 1e-9);
    }

    #[test]
    fn normalised_advantage_is_standard(seed in any::<u64>(), gate in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 64;
        let steps = (0..n).map(|t| Step {
            obs: vec![],
            legal: vec![0],
            action: 0,
            logp: 0.0,
            reward: rng.gen_range(-2.0..2.0),
            done: t % 9 == 8,
            r_factor: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            eps: [0.0; K],
            v: rng.gen_range(-1.0..1.0),
            vk: [0.0; K],
            g: gate,
        }).collect();
        let buf = RolloutBuffer { steps, bootstrap_v: 0.3, bootstrap_vk: [0.0; K] };
        let w = [1.0 / K as f64; K];
        let g = |t: usize| buf.steps[t].g;
        let p = prepare(&buf, 0.99, 0.95, Some((&g, &w))).unwrap();
        let m = p.a_used.iter().sum::<f64>() / n as f64;
        let var = p.a_used.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        prop_assert!(m.abs() < 1e-6);
        prop_assert!((var - 1.0).abs() < 1e-4);
    }
}
