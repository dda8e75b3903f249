//! Advantage estimation and the residual blend.

use crate::policy::{softmax, K};
use crate::LearnError;

/// Truncated GAE. `dones[t]` marks that step `t` ended an episode, so
/// nothing is bootstrapped across it. `bootstrap` is the value of the
/// state after the last step (ignored if that step is terminal). Returns
/// advantages and the matching return targets `A + V`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(LearnError::LengthMismatch { what: "gae inputs", expected: n, got: values.len().min(dones.len()) });
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let next_v = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_v * cont - values[t];
        next_adv = delta + gamma * lambda * cont * next_adv;
        adv[t] = next_adv;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Channelwise GAE for the factor critics. Returns `(G_k, A_k)` per step.
pub fn factor_returns_advantages(
    r_factor: &[[f64; K]],
    vk: &[[f64; K]],
    dones: &[bool],
    bootstrap: &[f64; K],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<[f64; K]>, Vec<[f64; K]>), LearnError> {
    let n = r_factor.len();
    if vk.len() != n || dones.len() != n {
        return Err(LearnError::LengthMismatch { what: "factor inputs", expected: n, got: vk.len().min(dones.len()) });
    }
    let mut g = vec![[0.0; K]; n];
    let mut a = vec![[0.0; K]; n];
    for k in 0..K {
        let r: Vec<f64> = r_factor.iter().map(|x| x[k]).collect();
        let v: Vec<f64> = vk.iter().map(|x| x[k]).collect();
        let (adv, ret) = gae(&r, &v, dones, bootstrap[k], gamma, lambda)?;
        for t in 0..n {
            a[t][k] = adv[t];
            g[t][k] = ret[t];
        }
    }
    Ok((g, a))
}

/// `(1 - g) A_scalar + g sum_k softmax(beta)_k A_k`.
pub fn blend_advantage(a_scalar: f64, a_k: &[f64; K], g: f64, beta: &[f64]) -> f64 {
    let w = softmax(beta);
    blend_with_weights(a_scalar, a_k, g, &w)
}

pub(crate) fn blend_with_weights(a_scalar: f64, a_k: &[f64; K], g: f64, w: &[f64]) -> f64 {
    let mix: f64 = w.iter().zip(a_k).map(|(w, a)| w * a).sum();
    (1.0 - g) * a_scalar + g * mix
}

/// Mean and standard deviation used to normalise advantages.
pub fn norm_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt() + 1e-8)
}

pub fn normalize(xs: &[f64]) -> Vec<f64> {
    let (m, s) = norm_stats(xs);
    xs.iter().map(|x| (x - m) / s).collect()
}
