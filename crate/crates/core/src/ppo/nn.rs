//! Minimal dense networks with hand-written backprop.
//!
//! Weights of each layer are stored `[fan_in][fan_out]` row-major in one flat
//! parameter vector, followed by the bias. Minibatch passes go through
//! `matrixmultiply::dgemm`; single-sample inference uses a plain axpy loop.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerSlot {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    layers: Vec<LayerSlot>,
    params: Vec<f64>,
}

/// Per-layer activations from a minibatch forward pass; `acts[0]` is the input.
#[derive(Debug, Default, Clone)]
pub struct BatchCache {
    pub acts: Vec<Vec<f64>>,
    batch: usize,
}

impl BatchCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// Orthogonal initialisation with per-layer gains and zero biases.
    pub fn new<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, gains: &[f64], rng: &mut R) -> Mlp {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        assert_eq!(gains.len(), sizes.len() - 1);
        let mut layers = Vec::new();
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            layers.push(LayerSlot {
                w: offset,
                b: offset + fan_in * fan_out,
                fan_in,
                fan_out,
            });
            offset += fan_in * fan_out + fan_out;
        }
        let mut params = vec![0.0; offset];
        for (slot, &gain) in layers.iter().zip(gains) {
            let m = orthogonal(slot.fan_in, slot.fan_out, gain, rng);
            params[slot.w..slot.b].copy_from_slice(&m);
        }
        Mlp {
            sizes: sizes.to_vec(),
            hidden,
            output,
            layers,
            params,
        }
    }

    /// Fill every bias with uniform noise in `[-scale, scale]`.
    pub fn randomize_biases<R: Rng>(&mut self, scale: f64, rng: &mut R) {
        for slot in &self.layers {
            for b in &mut self.params[slot.b..slot.b + slot.fan_out] {
                *b = rng.random_range(-scale..=scale);
            }
        }
    }

    /// Multiply the outgoing weights of output unit `col` in the last layer.
    pub fn scale_output_column(&mut self, col: usize, factor: f64) {
        let slot = self.layers.last().unwrap();
        for i in 0..slot.fan_in {
            self.params[slot.w + i * slot.fan_out + col] *= factor;
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn act_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Single-sample inference.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut cur = x.to_vec();
        for (l, slot) in self.layers.iter().enumerate() {
            let mut out = self.params[slot.b..slot.b + slot.fan_out].to_vec();
            let w = &self.params[slot.w..slot.b];
            for (i, &xi) in cur.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &w[i * slot.fan_out..(i + 1) * slot.fan_out];
                for (o, &wv) in out.iter_mut().zip(row) {
                    *o += xi * wv;
                }
            }
            let act = self.act_for(l);
            if act != Activation::Identity {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            cur = out;
        }
        cur
    }

    /// Minibatch forward pass over `batch` rows of `x`, keeping activations.
    pub fn forward_batch(&self, x: &[f64], batch: usize, cache: &mut BatchCache) {
        debug_assert_eq!(x.len(), batch * self.input_dim());
        cache.batch = batch;
        cache.acts.resize(self.layers.len() + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for (l, slot) in self.layers.iter().enumerate() {
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            let bias = &self.params[slot.b..slot.b + slot.fan_out];
            for _ in 0..batch {
                out.extend_from_slice(bias);
            }
            let w = &self.params[slot.w..slot.b];
            // out[B x fo] += input[B x fi] * w[fi x fo]
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    slot.fan_in,
                    slot.fan_out,
                    1.0,
                    input.as_ptr(),
                    slot.fan_in as isize,
                    1,
                    w.as_ptr(),
                    slot.fan_out as isize,
                    1,
                    1.0,
                    out.as_mut_ptr(),
                    slot.fan_out as isize,
                    1,
                );
            }
            let act = self.act_for(l);
            if act != Activation::Identity {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
    }

    /// Accumulate parameter gradients for loss gradient `dout` (w.r.t. the
    /// network output, `batch x out`). Optionally returns the input gradient.
    pub fn backward_batch(&self, cache: &BatchCache, dout: &[f64], grad: &mut [f64], want_dx: bool) -> Option<Vec<f64>> {
        let batch = cache.batch;
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(dout.len(), batch * self.output_dim());
        let mut delta = dout.to_vec();
        for l in (0..self.layers.len()).rev() {
            let slot = &self.layers[l];
            let act = self.act_for(l);
            if act != Activation::Identity {
                for (d, &y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= act.grad_from_output(y);
                }
            }
            let input = &cache.acts[l];
            // dW[fi x fo] += input^T[fi x B] * delta[B x fo]
            {
                let gw = &mut grad[slot.w..slot.b];
                unsafe {
                    matrixmultiply::dgemm(
                        slot.fan_in,
                        batch,
                        slot.fan_out,
                        1.0,
                        input.as_ptr(),
                        1,
                        slot.fan_in as isize,
                        delta.as_ptr(),
                        slot.fan_out as isize,
                        1,
                        1.0,
                        gw.as_mut_ptr(),
                        slot.fan_out as isize,
                        1,
                    );
                }
            }
            {
                let gb = &mut grad[slot.b..slot.b + slot.fan_out];
                for row in delta.chunks_exact(slot.fan_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            if l == 0 && !want_dx {
                return None;
            }
            // dX[B x fi] = delta[B x fo] * w^T[fo x fi]
            let w = &self.params[slot.w..slot.b];
            let mut dx = vec![0.0; batch * slot.fan_in];
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    slot.fan_out,
                    slot.fan_in,
                    1.0,
                    delta.as_ptr(),
                    slot.fan_out as isize,
                    1,
                    w.as_ptr(),
                    1,
                    slot.fan_out as isize,
                    0.0,
                    dx.as_mut_ptr(),
                    slot.fan_in as isize,
                    1,
                );
            }
            delta = dx;
        }
        Some(delta)
    }
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever is
/// fewer), scaled by `gain`.
fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        vecs.push(v);
    }
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            m[r * cols + c] = gain * if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    m
}

/// Adam with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            t: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = self.lr * bc2.sqrt() / bc1;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= step * self.m[i] / (self.v[i].sqrt() + self.eps);
        }
    }
}

/// Scale gradient slices in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}
