//! Actor-critic network: masked policy, scalar and per-factor critics on a
//! shared critic trunk, a residual gate over the critic features, and the
//! mixture logits over factor heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cmtg_core::scm::{WinWeights, NUM_FACTORS};

use crate::net::{Linear, Mlp, Tape};
use crate::LearnError;

pub const K: usize = NUM_FACTORS;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub hidden: Vec<usize>,
    pub gate_hidden: usize,
}

impl NetConfig {
    /// Reference widths.
    pub fn full() -> Self {
        NetConfig { obs_dim: cmtg_core::observe::OBS_DIM, n_actions: cmtg_core::NUM_ACTIONS, hidden: vec![512, 256], gate_hidden: 32 }
    }

    /// Laptop-scale widths.
    pub fn desk() -> Self {
        NetConfig { hidden: vec![64, 64], ..Self::full() }
    }
}

/// Parameter layout. All parameters, including the mixture logits, live
/// in `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub config: NetConfig,
    pub actor: Mlp,
    /// Critic trunk; its rectified output is the shared latent.
    pub critic: Mlp,
    pub v_head: Linear,
    pub vk_head: Linear,
    pub gate: Mlp,
    pub beta: usize,
    pub theta: Vec<f64>,
}

/// Result of one forward pass. Log-probabilities are aligned with `legal`;
/// actions outside it have probability exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub legal: Vec<usize>,
    pub logp: Vec<f64>,
    pub v: f64,
    pub vk: [f64; K],
    pub g: f64,
}

impl PolicyOutput {
    pub fn prob(&self, action: usize) -> f64 {
        self.legal.iter().position(|&a| a == action).map(|i| self.logp[i].exp()).unwrap_or(0.0)
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.legal.iter().position(|&a| a == action).map(|i| self.logp[i]).unwrap_or(f64::NEG_INFINITY)
    }

    /// Full-width log-probabilities, `-inf` on illegal actions.
    pub fn log_probs_full(&self, n_actions: usize) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; n_actions];
        for (a, lp) in self.legal.iter().zip(&self.logp) {
            out[*a] = *lp;
        }
        out
    }

    pub fn entropy(&self) -> f64 {
        -self.logp.iter().map(|lp| lp.exp() * lp).sum::<f64>()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, lp) in self.legal.iter().zip(&self.logp) {
            acc += lp.exp();
            if u < acc {
                return *a;
            }
        }
        *self.legal.last().unwrap()
    }

    /// Most probable legal action; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.legal.len() {
            if self.logp[i] > self.logp[best] || (self.logp[i] == self.logp[best] && self.legal[i] < self.legal[best]) {
                best = i;
            }
        }
        self.legal[best]
    }
}

/// Forward pass plus the activations needed for backprop.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub actor: Tape,
    pub critic: Tape,
    pub gate: Tape,
}

/// Upstream gradients for one sample.
#[derive(Debug, Clone, Default)]
pub struct OutputGrad {
    /// d loss / d logit, aligned with `legal`.
    pub dlogits: Vec<f64>,
    pub dv: f64,
    pub dvk: [f64; K],
    /// d loss / d gate pre-activation.
    pub dgate_pre: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Map WinProb weights to mixture logits: floor at 1e-3, normalise, log.
pub fn beta_from_weights(w: &WinWeights) -> [f64; K] {
    let floored: Vec<f64> = w.w.iter().map(|x| x.max(1e-3)).collect();
    let total: f64 = floored.iter().sum();
    let mut b = [0.0; K];
    for k in 0..K {
        b[k] = (floored[k] / total).ln();
    }
    b
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl PolicyNet {
    pub fn new(config: NetConfig, weights: &WinWeights, seed: u64) -> Self {
        let mut off = 0;
        let actor_sizes: Vec<usize> =
            std::iter::once(config.obs_dim).chain(config.hidden.iter().copied()).chain([config.n_actions]).collect();
        let actor = Mlp::build(&actor_sizes, false, &mut off);
        let critic_sizes: Vec<usize> = std::iter::once(config.obs_dim).chain(config.hidden.iter().copied()).collect();
        let critic = Mlp::build(&critic_sizes, true, &mut off);
        let latent = *config.hidden.last().unwrap_or(&config.obs_dim);
        let v_head = Mlp::build(&[latent, 1], false, &mut off).layers[0];
        let vk_head = Mlp::build(&[latent, K], false, &mut off).layers[0];
        let gate = Mlp::build(&[latent, config.gate_hidden, 1], false, &mut off);
        let beta = off;
        off += K;
        let mut net = PolicyNet { config, actor, critic, v_head, vk_head, gate, beta, theta: vec![0.0; off] };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let relu_gain = 2f64.sqrt();
        let n = net.actor.layers.len();
        for (i, l) in net.actor.layers.clone().iter().enumerate() {
            l.init(&mut net.theta, if i + 1 == n { 0.01 } else { relu_gain }, &mut rng);
        }
        for l in net.critic.layers.clone() {
            l.init(&mut net.theta, relu_gain, &mut rng);
        }
        net.v_head.init(&mut net.theta, 1.0, &mut rng);
        net.vk_head.init(&mut net.theta, 1.0, &mut rng);
        let g = net.gate.layers.clone();
        g[0].init(&mut net.theta, relu_gain, &mut rng);
        // Small output weights and zero bias put the gate at 0.5.
        g[1].init(&mut net.theta, 0.01, &mut rng);
        net.set_beta(&beta_from_weights(weights));
        net
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.theta[self.beta..self.beta + K]
    }

    pub fn set_beta(&mut self, b: &[f64; K]) {
        self.theta[self.beta..self.beta + K].copy_from_slice(b);
    }

    pub fn mixture(&self) -> [f64; K] {
        let s = softmax(self.beta());
        let mut out = [0.0; K];
        out.copy_from_slice(&s);
        out
    }

    /// Parameter range of the gate head.
    pub fn gate_range(&self) -> std::ops::Range<usize> {
        let first = self.gate.layers[0];
        let last = self.gate.layers[1];
        first.w..last.b + last.n_out
    }

    pub fn forward(&self, obs: &[(u32, f32)], legal: &[usize]) -> Result<PolicyOutput, LearnError> {
        let mut t = Trace::default();
        self.forward_traced(obs, legal, &mut t)
    }

    pub fn forward_traced(&self, obs: &[(u32, f32)], legal: &[usize], t: &mut Trace) -> Result<PolicyOutput, LearnError> {
        if legal.is_empty() {
            return Err(LearnError::EmptyMask);
        }
        let th = &self.theta;
        self.actor.forward_sparse(th, obs, &mut t.actor);
        let logits = t.actor.output();
        let m = legal.iter().map(|&a| logits[a]).fold(f64::NEG_INFINITY, f64::max);
        let lse = m + legal.iter().map(|&a| (logits[a] - m).exp()).sum::<f64>().ln();
        let logp: Vec<f64> = legal.iter().map(|&a| logits[a] - lse).collect();

        self.critic.forward_sparse(th, obs, &mut t.critic);
        let latent = t.critic.output().to_vec();
        let mut buf = Vec::new();
        self.v_head.forward(th, latent.iter().copied().enumerate(), &mut buf);
        let v = buf[0];
        self.vk_head.forward(th, latent.iter().copied().enumerate(), &mut buf);
        let mut vk = [0.0; K];
        vk.copy_from_slice(&buf);
        self.gate.forward_dense(th, &latent, &mut t.gate);
        let g = sigmoid(t.gate.output()[0]);
        Ok(PolicyOutput { legal: legal.to_vec(), logp, v, vk, g })
    }

    /// Accumulate parameter gradients of one sample into `grad`.
    pub fn backward(&self, obs: &[(u32, f32)], out: &PolicyOutput, t: &Trace, d: &OutputGrad, grad: &mut [f64]) {
        let th = &self.theta;
        if d.dlogits.iter().any(|x| *x != 0.0) {
            let mut dl = vec![0.0; self.config.n_actions];
            for (a, g) in out.legal.iter().zip(&d.dlogits) {
                dl[*a] = *g;
            }
            self.actor.backward_sparse(th, obs, &t.actor, &dl, grad);
        }
        let latent = t.critic.output();
        let n = latent.len();
        let mut dlat = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let lat = || latent.iter().copied().enumerate();
        if d.dv != 0.0 {
            self.v_head.backward(th, lat(), &[d.dv], grad, Some(&mut tmp));
            dlat.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
        if d.dvk.iter().any(|x| *x != 0.0) {
            self.vk_head.backward(th, lat(), &d.dvk, grad, Some(&mut tmp));
            dlat.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
        if d.dgate_pre != 0.0 {
            self.gate.backward_dense(th, latent, &t.gate, &[d.dgate_pre], grad, &mut tmp);
            dlat.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
        if dlat.iter().any(|x| *x != 0.0) {
            self.critic.backward_sparse(th, obs, &t.critic, &dlat, grad);
        }
    }
}
