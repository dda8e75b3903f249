use serde::{Deserialize, Serialize};

use crate::buffer::{Prepared, RolloutBuffer};
use crate::loss::LossParts;
use crate::policy::K;

/// Per-factor diagnostics of one rollout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationMetrics {
    /// Pearson correlation of `A_k` with `eps_k` across the rollout.
    pub corr: [f64; K],
    /// Sign agreement over steps where both are nonzero.
    pub sign_agreement: [Option<f64>; K],
    /// `sum_t |w_k A_k| / sum_t sum_j |w_j A_j|`.
    pub credit_share: [f64; K],
    pub gate_mean: f64,
    pub gate_min: f64,
    pub gate_max: f64,
}

impl CalibrationMetrics {
    /// Factor with the largest credit share (lowest index on ties).
    pub fn top_factor(&self) -> usize {
        let mut best = 0;
        for k in 1..K {
            if self.credit_share[k] > self.credit_share[best] {
                best = k;
            }
        }
        best
    }
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx.sqrt() * vy.sqrt())
    }
}

pub fn calibration_metrics(a_k: &[[f64; K]], eps: &[[f64; K]], w: &[f64; K], gates: &[f64]) -> CalibrationMetrics {
    let mut m = CalibrationMetrics::default();
    let mut mass = [0.0; K];
    for k in 0..K {
        let a: Vec<f64> = a_k.iter().map(|x| x[k]).collect();
        let e: Vec<f64> = eps.iter().map(|x| x[k]).collect();
        m.corr[k] = corr(&a, &e);
        let (mut agree, mut total) = (0usize, 0usize);
        for (p, q) in a.iter().zip(&e) {
            if *p != 0.0 && *q != 0.0 {
                total += 1;
                agree += (p.signum() == q.signum()) as usize;
            }
        }
        m.sign_agreement[k] = (total > 0).then(|| agree as f64 / total as f64);
        mass[k] = a.iter().map(|x| (w[k] * x).abs()).sum();
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        for k in 0..K {
            m.credit_share[k] = mass[k] / total;
        }
    }
    if !gates.is_empty() {
        m.gate_mean = gates.iter().sum::<f64>() / gates.len() as f64;
        m.gate_min = gates.iter().cloned().fold(f64::INFINITY, f64::min);
        m.gate_max = gates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    m
}

pub fn rollout_calibration(buf: &RolloutBuffer, prep: &Prepared, w: &[f64; K]) -> CalibrationMetrics {
    let eps: Vec<[f64; K]> = buf.steps.iter().map(|s| s.eps).collect();
    let gates: Vec<f64> = buf.steps.iter().map(|s| s.g).collect();
    calibration_metrics(&prep.a_k, &eps, w, &gates)
}

/// One row per update.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: usize,
    pub env_steps: u64,
    pub episodes: u64,
    pub wins: u64,
    pub lr: f64,
    pub c_h: f64,
    pub loss: LossParts,
    pub mixture: [f64; K],
    pub calibration: CalibrationMetrics,
}
