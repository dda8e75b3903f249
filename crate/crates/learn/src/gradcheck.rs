//! Finite-difference checks for the analytic gradients, plus a synthetic
//! rollout generator for small networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::buffer::{prepare, Prepared, RolloutBuffer, Step};
use crate::loss::{minibatch_grad, GateMode, LossCoeffs, Terms, UpdateMode};
use crate::policy::{NetConfig, PolicyNet, K};
use crate::LearnError;

/// A random small-net rollout whose stored log-probabilities are
/// perturbed away from the current policy so both surrogate branches occur.
pub fn synthetic_rollout(net: &PolicyNet, n: usize, seed: u64) -> Result<RolloutBuffer, LearnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = &net.config;
    let mut buf = RolloutBuffer::default();
    for t in 0..n {
        let mut obs: Vec<(u32, f32)> = Vec::new();
        for i in 0..cfg.obs_dim {
            if rng.gen_bool(0.6) {
                obs.push((i as u32, rng.gen_range(-1.0f32..1.0)));
            }
        }
        let mut legal: Vec<usize> = (0..cfg.n_actions).filter(|_| rng.gen_bool(0.6)).collect();
        if legal.is_empty() {
            legal.push(rng.gen_range(0..cfg.n_actions));
        }
        let out = net.forward(&obs, &legal)?;
        let action = legal[rng.gen_range(0..legal.len())];
        let mut r = [0.0; K];
        let mut eps = [0.0; K];
        for k in 0..K {
            r[k] = rng.gen_range(-1.0..1.0);
            eps[k] = 0.5 * r[k] + rng.gen_range(-0.5..0.5);
        }
        buf.steps.push(Step {
            obs,
            legal,
            action,
            logp: out.log_prob(action) + rng.gen_range(-0.4..0.4),
            reward: rng.gen_range(-1.0..1.0),
            done: t % 7 == 6,
            r_factor: r,
            eps,
            v: out.v,
            vk: out.vk,
            g: out.g,
        });
    }
    buf.bootstrap_v = rng.gen_range(-1.0..1.0);
    for k in 0..K {
        buf.bootstrap_vk[k] = rng.gen_range(-1.0..1.0);
    }
    Ok(buf)
}

pub fn small_net(seed: u64) -> PolicyNet {
    let cfg = NetConfig { obs_dim: 10, n_actions: 7, hidden: vec![12, 16], gate_hidden: 8 };
    let mut net = PolicyNet::new(cfg, &Default::default(), seed);
    // Move the heads off their near-zero init so every term is exercised.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    for x in net.theta.iter_mut() {
        *x += rng.gen_range(-0.2..0.2);
    }
    net
}

pub fn prepare_for(buf: &RolloutBuffer, net: &PolicyNet, mode: UpdateMode, gamma: f64, lambda: f64) -> Result<Prepared, LearnError> {
    match mode {
        UpdateMode::Ppo => prepare(buf, gamma, lambda, None),
        UpdateMode::Cgfa { gate } => {
            let w = net.mixture();
            let g = |t: usize| match gate {
                GateMode::Learned => buf.steps[t].g,
                GateMode::Fixed(v) => v,
            };
            prepare(buf, gamma, lambda, Some((&g, &w)))
        }
    }
}

/// Largest relative error `|a - n| / max(|a| + |n|, 1e-6)` between the
/// analytic gradient and central differences with step `h`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    net: &PolicyNet,
    buf: &RolloutBuffer,
    prep: &Prepared,
    mode: UpdateMode,
    coeffs: &LossCoeffs,
    terms: Terms,
    h: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>), LearnError> {
    let idx: Vec<usize> = (0..buf.len()).collect();
    let mut analytic = vec![0.0; net.n_params()];
    minibatch_grad(net, buf, prep, &idx, mode, coeffs, terms, &mut analytic)?;
    if let UpdateMode::Cgfa { gate: GateMode::Fixed(_) } = mode {
        analytic[net.gate_range()].iter_mut().for_each(|g| *g = 0.0);
    }
    let mut numeric = vec![0.0; net.n_params()];
    let mut probe = net.clone();
    let mut scratch = vec![0.0; net.n_params()];
    for i in 0..net.n_params() {
        let x = net.theta[i];
        probe.theta[i] = x + h;
        let up = minibatch_grad(&probe, buf, prep, &idx, mode, coeffs, terms, &mut scratch)?.total;
        probe.theta[i] = x - h;
        let down = minibatch_grad(&probe, buf, prep, &idx, mode, coeffs, terms, &mut scratch)?.total;
        probe.theta[i] = x;
        numeric[i] = (up - down) / (2.0 * h);
    }
    let worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6))
        .fold(0.0, f64::max);
    Ok((worst, analytic, numeric))
}
