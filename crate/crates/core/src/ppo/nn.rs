//! Dense tanh networks with hand-written backpropagation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Fully connected network: tanh on hidden layers, linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weight matrix
/// (`out x in`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Layer sizes including input and output.
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input followed by every layer's post-activation output.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl Mlp {
    /// Gaussian weights scaled by `1/sqrt(fan_in)` (times `out_gain` on the
    /// last layer), zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let n = Self::count(sizes);
        let mut params = Vec::with_capacity(n);
        let layers = sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == layers { out_gain } else { 1.0 };
            let normal = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("finite std");
            params.extend((0..fan_in * fan_out).map(|_| normal.sample(rng)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && Self::count(&sizes) == params.len()).then_some(Self { sizes, params })
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).acts.pop().unwrap()
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        Trace { acts }
    }

    /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output).
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                // tanh' = 1 - tanh^2, applied to this layer's output
                for (d, a) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &trace.acts[l];
            let off = offsets[l];
            for o in 0..n_out {
                let g = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (gi, x) in g.iter_mut().zip(input) {
                    *gi += delta[o] * x;
                }
                grad[off + n_in * n_out + o] += delta[o];
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (ni, wi) in next.iter_mut().zip(row) {
                        *ni += delta[o] * wi;
                    }
                }
                delta = next;
            }
        }
    }
}
