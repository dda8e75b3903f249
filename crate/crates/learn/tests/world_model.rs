use cmtg_learn::cwm::{cwm_act, Cwm, CwmConfig, Sample};
use cmtg_learn::{PolicyOutput, K};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> CwmConfig {
    CwmConfig { replay_capacity: 2000, action_embed: 8, hidden: 32, minibatch: 64, steps_per_rollout: 16, ..Default::default() }
}

fn sample(rng: &mut ChaCha8Rng, won: bool) -> Sample {
    let x = rng.gen_range(0..4u32);
    let action = rng.gen_range(0..5);
    // Deterministic dynamics: the change depends on one feature and the action.
    let mut dcv = [0.0; K];
    dcv[0] = action as f64 * 0.25 - 0.5;
    dcv[3] = if x == 2 { 0.4 } else { -0.2 };
    Sample { obs: vec![(x, 1.0)], action, dcv, won }
}

#[test]
fn learns_deterministic_dynamics() {
    let mut m = Cwm::new(small(), 4, 5, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..2000 {
        let s = sample(&mut rng, i % 2 == 0);
        m.push(s);
    }
    for _ in 0..150 {
        m.update().unwrap();
    }
    let mut worst: f64 = 0.0;
    for x in 0..4u32 {
        for a in 0..5 {
            let (d, _) = m.predict(&[(x, 1.0)], a);
            worst = worst.max((d[0] - (a as f64 * 0.25 - 0.5)).abs());
            worst = worst.max((d[3] - if x == 2 { 0.4 } else { -0.2 }).abs());
        }
    }
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn empty_replay_is_noop_and_untrained_bce_is_ln2() {
    let mut m = Cwm::new(small(), 4, 5, 2);
    let before = m.theta.clone();
    assert!(m.update().unwrap().is_none());
    assert_eq!(m.theta, before);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let batch: Vec<Sample> = (0..200).map(|i| sample(&mut rng, i % 2 == 0)).collect();
    let refs: Vec<&Sample> = batch.iter().collect();
    let mut g = vec![0.0; m.theta.len()];
    let l = m.loss_grad(&refs, &mut g);
    assert!((l.bce - 2f64.ln()).abs() < 0.02, "{}", l.bce);
}

#[test]
fn replay_evicts_oldest() {
    let mut m = Cwm::new(CwmConfig { replay_capacity: 3, ..small() }, 4, 5, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..5 {
        let s = sample(&mut rng, true);
        m.push(s);
    }
    assert_eq!(m.replay.len(), 3);
}

fn output(logp: Vec<f64>, legal: Vec<usize>) -> PolicyOutput {
    PolicyOutput { legal, logp, v: 0.0, vk: [0.0; K], g: 0.5 }
}

#[test]
fn action_selection_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = output(vec![(0.2f64).ln(), (0.5f64).ln(), (0.3f64).ln()], vec![1, 4, 9]);
    assert_eq!(cwm_act(&out, |_| 100.0, 0.0, 0.0, &mut rng).unwrap(), 4);
    let tie = output(vec![(0.5f64).ln(); 2], vec![2, 6]);
    assert_eq!(cwm_act(&tie, |a| if a == 6 { 0.1 } else { 0.0 }, 0.6, 0.0, &mut rng).unwrap(), 6);
    assert_eq!(cwm_act(&tie, |_| 0.0, 0.6, 0.0, &mut rng).unwrap(), 2);

    // Uniform exploration: 1e4 draws over two actions within 3 sigma.
    let n = 10_000;
    let hits = (0..n).filter(|_| cwm_act(&out, |_| 0.0, 0.6, 1.0, &mut rng).unwrap() == 9).count() as f64;
    let p = 1.0 / 3.0;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((hits - n as f64 * p).abs() < 3.0 * sd, "{hits}");
    assert!(cwm_act(&output(vec![], vec![]), |_| 0.0, 0.6, 0.0, &mut rng).is_err());
}
