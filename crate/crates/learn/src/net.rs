//! Dense layers over a flat parameter vector with hand-written backprop.
//!
//! A network is a list of [`Linear`] views into one `Vec<f64>`; gradients
//! live in a vector of the same length. Weights are stored input-major
//! (`w[i * n_out + j]`) so a sparse input row touches contiguous memory.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One affine layer at fixed offsets in the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn len(&self) -> usize {
        self.n_in * self.n_out + self.n_out
    }

    /// `out = b + sum_i x_i W[i, :]`, skipping zero inputs.
    pub fn forward(&self, theta: &[f64], x: impl Iterator<Item = (usize, f64)>, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&theta[self.b..self.b + self.n_out]);
        for (i, xi) in x {
            if xi == 0.0 {
                continue;
            }
            let row = &theta[self.w + i * self.n_out..self.w + (i + 1) * self.n_out];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    /// Accumulate parameter gradients for upstream `dy`; optionally write
    /// the input gradient into `dx` (length `n_in`).
    pub fn backward(
        &self,
        theta: &[f64],
        x: impl Iterator<Item = (usize, f64)>,
        dy: &[f64],
        grad: &mut [f64],
        mut dx: Option<&mut [f64]>,
    ) {
        for (g, d) in grad[self.b..self.b + self.n_out].iter_mut().zip(dy) {
            *g += d;
        }
        for (i, xi) in x {
            if xi != 0.0 {
                let grow = &mut grad[self.w + i * self.n_out..self.w + (i + 1) * self.n_out];
                for (g, d) in grow.iter_mut().zip(dy) {
                    *g += xi * d;
                }
            }
        }
        if let Some(dx) = dx {
            for (i, dxi) in dx.iter_mut().enumerate().take(self.n_in) {
                let row = &theta[self.w + i * self.n_out..self.w + (i + 1) * self.n_out];
                *dxi = row.iter().zip(dy).map(|(w, d)| w * d).sum();
            }
        }
    }

    /// Orthogonal-style init with the given gain; zero bias.
    pub fn init(&self, theta: &mut [f64], gain: f64, rng: &mut impl Rng) {
        let m = orthogonal(self.n_in, self.n_out, rng);
        for (t, v) in theta[self.w..self.w + self.n_in * self.n_out].iter_mut().zip(m) {
            *t = gain * v;
        }
        theta[self.b..self.b + self.n_out].fill(0.0);
    }
}

/// `rows x cols` matrix (row-major) whose shorter dimension is orthonormal.
fn orthogonal(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<f64> {
    // Orthonormalise the shorter side as vectors of the longer length.
    let (k, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(k);
    while vs.len() < k {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for u in &vs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= d * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            vs.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { vs[r][c] } else { vs[c][r] };
        }
    }
    out
}

/// Stack of linear layers with ReLU between them. When `relu_last` is set
/// the output is rectified too (used for feature trunks).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub relu_last: bool,
}

/// Activations of one forward pass; `acts[l]` is the output of layer `l`
/// after its nonlinearity.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    /// Allocate layers `sizes[0] -> sizes[1] -> ...` starting at `*offset`.
    pub fn build(sizes: &[usize], relu_last: bool, offset: &mut usize) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let l = Linear { n_in: w[0], n_out: w[1], w: *offset, b: *offset + w[0] * w[1] };
                *offset += l.len();
                l
            })
            .collect();
        Mlp { layers, relu_last }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    fn rectified(&self, l: usize) -> bool {
        l + 1 < self.layers.len() || self.relu_last
    }

    pub fn forward_sparse(&self, theta: &[f64], x: &[(u32, f32)], tape: &mut Tape) {
        tape.acts.resize(self.layers.len(), Vec::new());
        for l in 0..self.layers.len() {
            let (prev, rest) = tape.acts.split_at_mut(l);
            let out = &mut rest[0];
            if l == 0 {
                self.layers[0].forward(theta, x.iter().map(|&(i, v)| (i as usize, v as f64)), out);
            } else {
                self.layers[l].forward(theta, prev[l - 1].iter().copied().enumerate(), out);
            }
            if self.rectified(l) {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    pub fn forward_dense(&self, theta: &[f64], x: &[f64], tape: &mut Tape) {
        tape.acts.resize(self.layers.len(), Vec::new());
        for l in 0..self.layers.len() {
            let (prev, rest) = tape.acts.split_at_mut(l);
            let out = &mut rest[0];
            let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
            self.layers[l].forward(theta, input.iter().copied().enumerate(), out);
            if self.rectified(l) {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    /// Backprop `d_out` (gradient w.r.t. the final activation) through the
    /// stack. The first layer sees the input through `first`.
    fn backward_inner<F, I>(&self, theta: &[f64], first: F, tape: &Tape, d_out: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>)
    where
        F: Fn() -> I,
        I: Iterator<Item = (usize, f64)>,
    {
        let n = self.layers.len();
        let mut dy = d_out.to_vec();
        if self.rectified(n - 1) {
            mask_relu(&mut dy, &tape.acts[n - 1]);
        }
        let mut dx = dx;
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if l == 0 {
                layer.backward(theta, first(), &dy, grad, dx.as_deref_mut());
            } else {
                let mut dprev = vec![0.0; layer.n_in];
                layer.backward(theta, tape.acts[l - 1].iter().copied().enumerate(), &dy, grad, Some(&mut dprev));
                mask_relu(&mut dprev, &tape.acts[l - 1]);
                dy = dprev;
            }
        }
    }

    pub fn backward_sparse(&self, theta: &[f64], x: &[(u32, f32)], tape: &Tape, d_out: &[f64], grad: &mut [f64]) {
        self.backward_inner(theta, || x.iter().map(|&(i, v)| (i as usize, v as f64)), tape, d_out, grad, None);
    }

    pub fn backward_dense(&self, theta: &[f64], x: &[f64], tape: &Tape, d_out: &[f64], grad: &mut [f64], dx: &mut [f64]) {
        self.backward_inner(theta, || x.iter().copied().enumerate(), tape, d_out, grad, Some(dx));
    }
}

fn mask_relu(d: &mut [f64], act: &[f64]) {
    for (g, a) in d.iter_mut().zip(act) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Nonzero entries of a dense observation.
pub fn sparsify(obs: &[f32]) -> Vec<(u32, f32)> {
    obs.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i as u32, *v)).collect()
}
