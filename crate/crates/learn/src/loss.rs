//! Loss terms and their analytic gradients.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{Prepared, RolloutBuffer};
use crate::optim::{clip_grad_norm, Adam};
use crate::policy::{OutputGrad, PolicyNet, PolicyOutput, Trace, K};
use crate::LearnError;

/// How the residual gate is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum GateMode {
    Learned,
    /// A constant gate value; the gate head receives no gradient.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UpdateMode {
    /// Surrogate on normalised scalar advantages only.
    Ppo,
    /// Blended advantage with factor critics and calibration.
    Cgfa { gate: GateMode },
}

impl UpdateMode {
    pub fn gate_value(&self, out: &PolicyOutput) -> f64 {
        match self {
            UpdateMode::Ppo => 0.0,
            UpdateMode::Cgfa { gate: GateMode::Learned } => out.g,
            UpdateMode::Cgfa { gate: GateMode::Fixed(c) } => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoeffs {
    pub clip: f64,
    pub c_v: f64,
    pub c_h: f64,
    pub c_f: f64,
    pub c_c: f64,
    pub c_e: f64,
    pub delta: f64,
}

impl Default for LossCoeffs {
    fn default() -> Self {
        LossCoeffs { clip: 0.2, c_v: 0.5, c_h: 0.05, c_f: 0.5, c_c: 0.1, c_e: 0.0, delta: 1e-6 }
    }
}

/// Which loss terms contribute; used to check each gradient in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub surrogate: bool,
    pub value: bool,
    pub entropy: bool,
    pub factor: bool,
    pub calibration: bool,
    pub gate_entropy: bool,
}

impl Terms {
    pub const ALL: Terms =
        Terms { surrogate: true, value: true, entropy: true, factor: true, calibration: true, gate_entropy: true };
    pub const NONE: Terms =
        Terms { surrogate: false, value: false, entropy: false, factor: false, calibration: false, gate_entropy: false };
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub surrogate: f64,
    pub value: f64,
    pub entropy: f64,
    pub factor: f64,
    pub calibration: f64,
    pub gate_entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

/// Negative mean per-factor Pearson correlation between `a` and `e` over
/// the batch, with each standard deviation clamped below at `delta`.
/// Returns the loss and `d loss / d a`.
pub fn calibration_loss(a: &[[f64; K]], e: &[[f64; K]], delta: f64) -> (f64, Vec<[f64; K]>) {
    let n = a.len();
    let mut grad = vec![[0.0; K]; n];
    if n < 2 {
        return (0.0, grad);
    }
    let nf = n as f64;
    let mut loss = 0.0;
    for k in 0..K {
        let ma = a.iter().map(|x| x[k]).sum::<f64>() / nf;
        let me = e.iter().map(|x| x[k]).sum::<f64>() / nf;
        let ca: Vec<f64> = a.iter().map(|x| x[k] - ma).collect();
        let ce: Vec<f64> = e.iter().map(|x| x[k] - me).collect();
        let cov = ca.iter().zip(&ce).map(|(p, q)| p * q).sum::<f64>() / nf;
        let raw_sa = (ca.iter().map(|p| p * p).sum::<f64>() / nf).sqrt();
        let se = (ce.iter().map(|q| q * q).sum::<f64>() / nf).sqrt().max(delta);
        let clamped = raw_sa < delta;
        let sa = raw_sa.max(delta);
        let d = sa * se + delta;
        loss -= cov / d / K as f64;
        for i in 0..n {
            let dcov = ce[i] / nf;
            let dsa = if clamped { 0.0 } else { ca[i] / (nf * sa) };
            let dterm = dcov / d - cov * se * dsa / (d * d);
            grad[i][k] = -dterm / K as f64;
        }
    }
    (loss, grad)
}

/// Bernoulli entropy of a gate value.
pub fn gate_entropy(g: f64) -> f64 {
    // 0 ln 0 = 0, so a saturated or fixed gate has zero entropy.
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    -(xlnx(g) + xlnx(1.0 - g))
}

/// Loss and gradient of one minibatch. `idx` selects steps of `buf`.
#[allow(clippy::too_many_arguments)]
pub fn minibatch_grad(
    net: &PolicyNet,
    buf: &RolloutBuffer,
    prep: &Prepared,
    idx: &[usize],
    mode: UpdateMode,
    c: &LossCoeffs,
    terms: Terms,
    grad: &mut [f64],
) -> Result<LossParts, LearnError> {
    let n = idx.len();
    let inv = 1.0 / n as f64;
    let cgfa = matches!(mode, UpdateMode::Cgfa { .. });
    let learned_gate = matches!(mode, UpdateMode::Cgfa { gate: GateMode::Learned });
    let w = net.mixture();
    let (mu, sigma) = prep.norm;
    let mut parts = LossParts::default();
    let mut outs = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    let mut dgs: Vec<OutputGrad> = Vec::with_capacity(n);
    let mut dbeta = [0.0; K];

    for &t in idx {
        let s = &buf.steps[t];
        let mut tr = Trace::default();
        let out = net.forward_traced(&s.obs, &s.legal, &mut tr)?;
        let pos = out.legal.iter().position(|&a| a == s.action).ok_or(LearnError::EmptyMask)?;
        let probs: Vec<f64> = out.logp.iter().map(|l| l.exp()).collect();
        let mut d = OutputGrad { dlogits: vec![0.0; out.legal.len()], ..Default::default() };
        let mut dg = 0.0;

        let g = mode.gate_value(&out);
        let a_s = prep.a_scalar[t];
        let a_k = &prep.a_k[t];
        let mix: f64 = w.iter().zip(a_k).map(|(w, a)| w * a).sum();
        let a_used = if cgfa { ((1.0 - g) * a_s + g * mix - mu) / sigma } else { (a_s - mu) / sigma };

        let logr = out.logp[pos] - s.logp;
        let r = logr.exp();
        let rc = r.clamp(1.0 - c.clip, 1.0 + c.clip);
        let (s1, s2) = (r * a_used, rc * a_used);
        let unclipped = s1 <= s2;
        parts.surrogate += -s1.min(s2) * inv;
        parts.approx_kl += ((r - 1.0) - logr) * inv;
        if (r - 1.0).abs() > c.clip {
            parts.clip_frac += inv;
        }
        if terms.surrogate {
            let dlogp = if unclipped { -r * a_used * inv } else { 0.0 };
            for j in 0..probs.len() {
                d.dlogits[j] += dlogp * ((j == pos) as u8 as f64 - probs[j]);
            }
            if cgfa {
                let da = -(if unclipped { r } else { rc }) * inv;
                dg += da * (mix - a_s) / sigma;
                for j in 0..K {
                    dbeta[j] += da * g / sigma * w[j] * (a_k[j] - mix);
                }
            }
        }

        let h = out.entropy();
        parts.entropy += h * inv;
        if terms.entropy && c.c_h != 0.0 {
            for j in 0..probs.len() {
                d.dlogits[j] += c.c_h * inv * probs[j] * (out.logp[j] + h);
            }
        }

        let err = prep.returns[t] - out.v;
        parts.value += err * err * inv;
        if terms.value {
            d.dv = -2.0 * c.c_v * inv * err;
        }

        if cgfa {
            for k in 0..K {
                let e = prep.g_k[t][k] - out.vk[k];
                parts.factor += e * e * inv / K as f64;
                if terms.factor {
                    d.dvk[k] = -2.0 * c.c_f * inv / K as f64 * e;
                }
            }
            parts.gate_entropy += gate_entropy(g) * inv;
            if terms.gate_entropy && learned_gate && c.c_e != 0.0 {
                dg += -c.c_e * inv * ((1.0 - g) / g).ln();
            }
        }
        if learned_gate {
            d.dgate_pre = dg * g * (1.0 - g);
        }
        outs.push(out);
        traces.push(tr);
        dgs.push(d);
    }

    if cgfa {
        let a_live: Vec<[f64; K]> = idx
            .iter()
            .zip(&outs)
            .map(|(&t, o)| {
                let mut x = [0.0; K];
                for k in 0..K {
                    x[k] = prep.g_k[t][k] - o.vk[k];
                }
                x
            })
            .collect();
        let eps: Vec<[f64; K]> = idx.iter().map(|&t| buf.steps[t].eps).collect();
        let (l, da) = calibration_loss(&a_live, &eps, c.delta);
        parts.calibration = l;
        if terms.calibration && c.c_c != 0.0 {
            for (d, g) in dgs.iter_mut().zip(&da) {
                for k in 0..K {
                    // a = G - V_k, so d/dV_k = -d/da.
                    d.dvk[k] -= c.c_c * g[k];
                }
            }
        }
    }

    for (i, &t) in idx.iter().enumerate() {
        net.backward(&buf.steps[t].obs, &outs[i], &traces[i], &dgs[i], grad);
    }
    if cgfa {
        for j in 0..K {
            grad[net.beta + j] += dbeta[j];
        }
    }

    let mut total = 0.0;
    if terms.surrogate {
        total += parts.surrogate;
    }
    if terms.value {
        total += c.c_v * parts.value;
    }
    if terms.entropy {
        total -= c.c_h * parts.entropy;
    }
    if cgfa {
        if terms.factor {
            total += c.c_f * parts.factor;
        }
        if terms.calibration {
            total += c.c_c * parts.calibration;
        }
        if terms.gate_entropy && learned_gate {
            total -= c.c_e * parts.gate_entropy;
        }
    }
    parts.total = total;
    if !total.is_finite() {
        return Err(LearnError::NonFiniteLoss(format!("{parts:?}")));
    }
    Ok(parts)
}

/// Optimisation settings of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateSettings {
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub grad_norm_max: f64,
}

/// Epoch/minibatch loop over a prepared rollout. Returns the loss parts
/// averaged over minibatches.
pub fn run_epochs(
    net: &mut PolicyNet,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    prep: &Prepared,
    mode: UpdateMode,
    c: &LossCoeffs,
    s: &UpdateSettings,
    rng: &mut impl Rng,
) -> Result<LossParts, LearnError> {
    let n = buf.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.n_params()];
    let gate = net.gate_range();
    let mut avg = LossParts::default();
    let mut count = 0.0;
    for _ in 0..s.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(s.minibatch.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let p = minibatch_grad(net, buf, prep, chunk, mode, c, Terms::ALL, &mut grad)?;
            if matches!(mode, UpdateMode::Cgfa { gate: GateMode::Fixed(_) }) {
                grad[gate.clone()].iter_mut().for_each(|g| *g = 0.0);
            }
            clip_grad_norm(&mut grad, s.grad_norm_max);
            opt.update(&mut net.theta, &grad, s.lr);
            for (a, b) in [
                (&mut avg.total, p.total),
                (&mut avg.surrogate, p.surrogate),
                (&mut avg.value, p.value),
                (&mut avg.entropy, p.entropy),
                (&mut avg.factor, p.factor),
                (&mut avg.calibration, p.calibration),
                (&mut avg.gate_entropy, p.gate_entropy),
                (&mut avg.approx_kl, p.approx_kl),
                (&mut avg.clip_frac, p.clip_frac),
            ] {
                *a += b;
            }
            count += 1.0;
        }
    }
    if count > 0.0 {
        for v in [
            &mut avg.total,
            &mut avg.surrogate,
            &mut avg.value,
            &mut avg.entropy,
            &mut avg.factor,
            &mut avg.calibration,
            &mut avg.gate_entropy,
            &mut avg.approx_kl,
            &mut avg.clip_frac,
        ] {
            *v /= count;
        }
    }
    Ok(avg)
}
