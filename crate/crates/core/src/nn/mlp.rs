//! Dense feed-forward network with `tanh` hidden layers and a linear output.
//!
//! All parameters live in one flat `f32` buffer. Layer `l` stores its weight
//! matrix row-major (`out x in`) followed by its bias.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f32>,
}

/// Activations of every layer for a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f32>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f32] {
        self.acts.last().expect("cache holds at least the input")
    }

    pub fn input(&self) -> &[f32] {
        &self.acts[0]
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Zero-initialized network with the given layer sizes (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network needs at least two non-empty layers, got {sizes:?}"
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights, zero biases. The output layer is scaled by
    /// `output_gain`.
    pub fn random<R: Rng>(sizes: &[usize], output_gain: f32, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let n_layers = net.num_layers();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f32).sqrt();
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            let (w, _) = net.layer_range(l);
            for p in &mut net.params[w] {
                *p = gain * dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f32>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Index ranges of layer `l`'s weights and bias in the flat buffer.
    pub fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let offset: usize = self.sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (offset..offset + i * o, offset + i * o..offset + i * o + o)
    }

    pub fn weights(&self, l: usize) -> &[f32] {
        let (w, _) = self.layer_range(l);
        &self.params[w]
    }

    pub fn bias(&self, l: usize) -> &[f32] {
        let (_, b) = self.layer_range(l);
        &self.params[b]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, input: &[f32]) -> Result<Vec<f32>> {
        Ok(self.forward_batch(input, 1)?.acts.pop().expect("output layer"))
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, inputs: &[f32], batch: usize) -> Result<ForwardCache> {
        let expected = batch * self.input_dim();
        if inputs.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: inputs.len(),
            });
        }
        let n_layers = self.num_layers();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(inputs.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = self.weights(l);
            let b = self.bias(l);
            let x = &acts[l];
            let mut y = vec![0.0f32; batch * n_out];
            for s in 0..batch {
                let xs = &x[s * n_in..(s + 1) * n_in];
                let ys = &mut y[s * n_out..(s + 1) * n_out];
                for (o, out) in ys.iter_mut().enumerate() {
                    *out = b[o] + dot(&w[o * n_in..(o + 1) * n_in], xs);
                }
                if l + 1 < n_layers {
                    for v in ys.iter_mut() {
                        *v = v.tanh();
                    }
                }
            }
            acts.push(y);
        }
        Ok(ForwardCache { batch, acts })
    }

    /// Reverse-mode pass. `d_output` is the gradient of a scalar objective with
    /// respect to the batch outputs. Parameter gradients are **added** into
    /// `grad` (same layout as the parameters); the input gradient is returned.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: &[f32],
        grad: &mut [f32],
    ) -> Result<Vec<f32>> {
        let batch = cache.batch;
        let expected = batch * self.output_dim();
        if d_output.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: d_output.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                actual: grad.len(),
            });
        }
        let n_layers = self.num_layers();
        let mut delta = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < n_layers {
                // Through tanh: dy/dz = 1 - y².
                let y = &cache.acts[l + 1];
                for (d, &yv) in delta.iter_mut().zip(y) {
                    *d *= 1.0 - yv * yv;
                }
            }
            let (w_range, b_range) = self.layer_range(l);
            let w = &self.params[w_range.clone()];
            let x = &cache.acts[l];
            let mut d_in = vec![0.0f32; batch * n_in];
            {
                let (gw, gb) = grad[w_range.start..b_range.end].split_at_mut(n_in * n_out);
                for s in 0..batch {
                    let xs = &x[s * n_in..(s + 1) * n_in];
                    let ds = &delta[s * n_out..(s + 1) * n_out];
                    let dx = &mut d_in[s * n_in..(s + 1) * n_in];
                    for (o, &d) in ds.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        axpy(d, xs, &mut gw[o * n_in..(o + 1) * n_in]);
                        axpy(d, &w[o * n_in..(o + 1) * n_in], dx);
                    }
                }
            }
            delta = d_in;
        }
        Ok(delta)
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    // Four independent accumulators let the compiler vectorize.
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

#[inline]
fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
