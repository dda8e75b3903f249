//! Causal world model baseline: predicts the factor change of a candidate
//! action and an episode win probability, and biases PPO's greedy choice
//! toward actions whose predicted change raises the WinProb logit.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::net::Linear;
use crate::optim::{linear_schedule, Adam};
use crate::policy::{sigmoid, PolicyOutput, K};
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwmConfig {
    pub replay_capacity: usize,
    pub action_embed: usize,
    pub hidden: usize,
    pub lr: f64,
    pub steps_per_rollout: usize,
    pub minibatch: usize,
    /// Weight of the causal score in action selection.
    pub lambda: f64,
    pub explore_start: f64,
    pub explore_end: f64,
    /// Weight of the win-head cross-entropy.
    pub wp_coef: f64,
}

impl Default for CwmConfig {
    fn default() -> Self {
        CwmConfig {
            replay_capacity: 20_000,
            action_embed: 32,
            hidden: 128,
            lr: 1e-3,
            steps_per_rollout: 16,
            minibatch: 128,
            lambda: 0.6,
            explore_start: 0.10,
            explore_end: 0.01,
            wp_coef: 0.5,
        }
    }
}

impl CwmConfig {
    pub fn explore_at(&self, frac: f64) -> f64 {
        linear_schedule(self.explore_start, self.explore_end, frac)
    }
}

/// One replayed transition with its episode outcome label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub obs: Vec<(u32, f32)>,
    pub action: usize,
    pub dcv: [f64; K],
    pub won: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CwmLoss {
    pub mse: f64,
    pub bce: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cwm {
    pub config: CwmConfig,
    pub obs_dim: usize,
    pub embed: Linear,
    pub l1: Linear,
    pub l2: Linear,
    pub theta: Vec<f64>,
    pub opt: Adam,
    pub replay: VecDeque<Sample>,
    pub rng: ChaCha8Rng,
}

struct Fwd {
    e: Vec<f64>,
    h: Vec<f64>,
    out: Vec<f64>,
}

impl Cwm {
    pub fn new(config: CwmConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Self {
        let embed = Linear { n_in: n_actions, n_out: config.action_embed, w: 0, b: n_actions * config.action_embed };
        let n1 = obs_dim + config.action_embed;
        let l1 = Linear { n_in: n1, n_out: config.hidden, w: embed.len(), b: embed.len() + n1 * config.hidden };
        let o2 = embed.len() + l1.len();
        let l2 = Linear { n_in: config.hidden, n_out: K + 1, w: o2, b: o2 + config.hidden * (K + 1) };
        let n = o2 + l2.len();
        let mut theta = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        embed.init(&mut theta, 1.0, &mut rng);
        l1.init(&mut theta, 2f64.sqrt(), &mut rng);
        l2.init(&mut theta, 0.01, &mut rng);
        Cwm {
            config,
            obs_dim,
            embed,
            l1,
            l2,
            theta,
            opt: Adam::new(n),
            replay: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
        }
    }

    fn inputs<'a>(&self, obs: &'a [(u32, f32)], e: &'a [f64]) -> impl Iterator<Item = (usize, f64)> + 'a {
        let d = self.obs_dim;
        obs.iter().map(|&(i, v)| (i as usize, v as f64)).chain(e.iter().enumerate().map(move |(j, v)| (d + j, *v)))
    }

    fn fwd(&self, obs: &[(u32, f32)], action: usize) -> Fwd {
        let mut e = Vec::new();
        self.embed.forward(&self.theta, std::iter::once((action, 1.0)), &mut e);
        let mut h = Vec::new();
        self.l1.forward(&self.theta, self.inputs(obs, &e), &mut h);
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut out = Vec::new();
        self.l2.forward(&self.theta, h.iter().copied().enumerate(), &mut out);
        Fwd { e, h, out }
    }

    /// Predicted factor change and win probability.
    pub fn predict(&self, obs: &[(u32, f32)], action: usize) -> ([f64; K], f64) {
        let f = self.fwd(obs, action);
        let mut d = [0.0; K];
        d.copy_from_slice(&f.out[..K]);
        (d, sigmoid(f.out[K]))
    }

    /// Projected change of the WinProb logit: `slopes . dCV_pred`.
    pub fn score(&self, obs: &[(u32, f32)], action: usize, slopes: &[f64; K]) -> f64 {
        let (d, _) = self.predict(obs, action);
        d.iter().zip(slopes).map(|(a, b)| a * b).sum()
    }

    pub fn push(&mut self, s: Sample) {
        if self.replay.len() == self.config.replay_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(s);
    }

    /// Loss and gradient over the given samples.
    pub fn loss_grad(&self, batch: &[&Sample], grad: &mut [f64]) -> CwmLoss {
        let n = batch.len() as f64;
        let pos = batch.iter().filter(|s| s.won).count() as f64;
        let neg = n - pos;
        let (wp, wn) = if pos > 0.0 && neg > 0.0 { (n / (2.0 * pos), n / (2.0 * neg)) } else { (1.0, 1.0) };
        let mut loss = CwmLoss::default();
        for s in batch {
            let f = self.fwd(&s.obs, s.action);
            let mut dout = vec![0.0; K + 1];
            for k in 0..K {
                let e = f.out[k] - s.dcv[k];
                loss.mse += e * e / (K as f64 * n);
                dout[k] = 2.0 * e / (K as f64 * n);
            }
            let z = f.out[K];
            let (y, wt) = if s.won { (1.0, wp) } else { (0.0, wn) };
            // Stable BCE on logits: softplus(z) - y z.
            let bce = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
            loss.bce += wt * bce / n;
            dout[K] = self.config.wp_coef * wt * (sigmoid(z) - y) / n;

            let mut dh = vec![0.0; self.config.hidden];
            self.l2.backward(&self.theta, f.h.iter().copied().enumerate(), &dout, grad, Some(&mut dh));
            for (g, h) in dh.iter_mut().zip(&f.h) {
                if *h <= 0.0 {
                    *g = 0.0;
                }
            }
            self.l1.backward(&self.theta, self.inputs(&s.obs, &f.e), &dh, grad, None);
            let de: Vec<f64> = (0..self.config.action_embed)
                .map(|j| {
                    let row = self.l1.w + (self.obs_dim + j) * self.l1.n_out;
                    self.theta[row..row + self.l1.n_out].iter().zip(&dh).map(|(w, d)| w * d).sum()
                })
                .collect();
            self.embed.backward(&self.theta, std::iter::once((s.action, 1.0)), &de, grad, None);
        }
        loss.total = loss.mse + self.config.wp_coef * loss.bce;
        loss
    }

    /// Optimizer steps on uniformly drawn replay minibatches. A no-op until
    /// the replay holds one minibatch.
    pub fn update(&mut self) -> Result<Option<CwmLoss>, LearnError> {
        let mb = self.config.minibatch;
        if self.replay.len() < mb || mb == 0 {
            return Ok(None);
        }
        let mut last = None;
        let mut grad = vec![0.0; self.theta.len()];
        for _ in 0..self.config.steps_per_rollout {
            let idx: Vec<usize> = (0..mb).map(|_| self.rng.gen_range(0..self.replay.len())).collect();
            let batch: Vec<&Sample> = idx.iter().map(|&i| &self.replay[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let l = self.loss_grad(&batch, &mut grad);
            if !l.total.is_finite() {
                return Err(LearnError::NonFiniteLoss(format!("cwm {l:?}")));
            }
            let lr = self.config.lr;
            self.opt.update(&mut self.theta, &grad, lr);
            last = Some(l);
        }
        Ok(last)
    }
}

/// With probability `explore` a uniform legal action; otherwise the
/// argmax of `log pi(a) + lambda * score(a)` (ties to the lowest index).
pub fn cwm_act(
    out: &PolicyOutput,
    score: impl Fn(usize) -> f64,
    lambda: f64,
    explore: f64,
    rng: &mut impl Rng,
) -> Result<usize, LearnError> {
    if out.legal.is_empty() {
        return Err(LearnError::EmptyMask);
    }
    let u: f64 = rng.gen();
    if u < explore {
        return Ok(out.legal[rng.gen_range(0..out.legal.len())]);
    }
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for (a, lp) in out.legal.iter().zip(&out.logp) {
        let s = lp + if lambda != 0.0 { lambda * score(*a) } else { 0.0 };
        if s > best.0 || (s == best.0 && *a < best.1) {
            best = (s, *a);
        }
    }
    Ok(best.1)
}
