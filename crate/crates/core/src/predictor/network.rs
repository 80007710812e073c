use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Layer shapes as (inputs, outputs).
pub const LAYER_SHAPES: [(usize, usize); 4] = [(44, 128), (128, 256), (256, 128), (128, 2)];

/// Fully connected layer. `weights[i * cols + o]` connects input `i` to
/// output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Float> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![T::zero(); rows * cols],
            bias: vec![T::zero(); cols],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `out = bias + input * W`.
    pub fn apply(&self, input: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &x) in input.iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            let row = &self.weights[i * self.cols..(i + 1) * self.cols];
            for (o, &w) in out.iter_mut().zip(row) {
                *o = *o + x * w;
            }
        }
    }
}

/// Q-network: affine layers with ReLU between them and a linear head that
/// emits one value per action.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T = f32> {
    pub layers: Vec<Dense<T>>,
}

/// Per-layer activations recorded by [`QNetwork::forward_trace`]:
/// `acts[0]` is the input, `acts[k]` the output of layer `k - 1` after its
/// activation.
pub type Activations<T> = Vec<Vec<T>>;

impl<T: Float> QNetwork<T> {
    pub fn zeros() -> Self {
        Self::zeros_with(&LAYER_SHAPES)
    }

    pub fn zeros_with(shapes: &[(usize, usize)]) -> Self {
        Self {
            layers: shapes.iter().map(|&(r, c)| Dense::zeros(r, c)).collect(),
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases. Weights are
    /// drawn in `f32` so every precision sees the same starting point.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut net = Self::zeros();
        for layer in &mut net.layers {
            let limit = (6.0f32 / (layer.rows + layer.cols) as f32).sqrt();
            for w in &mut layer.weights {
                *w = T::from(rng.random_range(-limit..limit)).unwrap();
            }
        }
        net
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.rows)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.rows, l.cols)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Flat parameter access: each layer's weights, then its biases.
    pub fn param(&self, mut k: usize) -> T {
        for l in &self.layers {
            if k < l.weights.len() {
                return l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut k: usize, v: T) {
        for l in &mut self.layers {
            if k < l.weights.len() {
                l.weights[k] = v;
                return;
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                l.bias[k] = v;
                return;
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn cast<U: Float>(&self) -> QNetwork<U> {
        let conv = |v: &Vec<T>| v.iter().map(|&x| U::from(x).unwrap()).collect();
        QNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    rows: l.rows,
                    cols: l.cols,
                    weights: conv(&l.weights),
                    bias: conv(&l.bias),
                })
                .collect(),
        }
    }

    /// First layer holding a non-finite parameter.
    pub fn poisoned_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.poisoned_layer() {
            Some(layer) => Err(Error::PoisonedNetwork { layer }),
            None => Ok(()),
        }
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::InvalidArgument(format!(
                "network expects {} inputs, got {}",
                self.input_len(),
                input.len()
            )));
        }
        Ok(())
    }

    /// `(Q_warp, Q_extrapolate)`.
    pub fn forward(&self, input: &[T]) -> Result<[T; 2]> {
        self.check_input(input)?;
        let mut acts = Vec::new();
        let q = self.forward_trace(input, &mut acts);
        if !(q[0].is_finite() && q[1].is_finite()) {
            self.check_finite()?;
        }
        Ok(q)
    }

    /// Forward pass that keeps every activation for [`Self::backward`].
    pub fn forward_trace(&self, input: &[T], acts: &mut Activations<T>) -> [T; 2] {
        acts.resize(self.layers.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(input);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (head, tail) = acts.split_at_mut(k + 1);
            layer.apply(&head[k], &mut tail[0]);
            if k < last {
                // NaN passes through so poisoned parameters surface at the output
                for v in tail[0].iter_mut() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
        }
        let out = &acts[self.layers.len()];
        [out[0], out[1]]
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, acts: &Activations<T>, d_out: [T; 2], grads: &mut QNetwork<T>) {
        let mut delta: Vec<T> = d_out.to_vec();
        let mut prev = Vec::new();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let input = &acts[k];
            for (b, &d) in g.bias.iter_mut().zip(&delta) {
                *b = *b + d;
            }
            for (i, &x) in input.iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                let row = &mut g.weights[i * layer.cols..(i + 1) * layer.cols];
                for (gw, &d) in row.iter_mut().zip(&delta) {
                    *gw = *gw + x * d;
                }
            }
            if k == 0 {
                break;
            }
            // propagate through W, then through the ReLU that produced `input`
            prev.clear();
            for (i, &x) in input.iter().enumerate() {
                if x <= T::zero() {
                    prev.push(T::zero());
                    continue;
                }
                let row = &layer.weights[i * layer.cols..(i + 1) * layer.cols];
                let mut s = T::zero();
                for (&w, &d) in row.iter().zip(&delta) {
                    s = s + w * d;
                }
                prev.push(s);
            }
            std::mem::swap(&mut delta, &mut prev);
        }
    }

    /// `params -= lr * grads`.
    pub fn sgd_step(&mut self, grads: &QNetwork<T>, lr: T) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, &d) in l.weights.iter_mut().zip(&g.weights) {
                *w = *w - lr * d;
            }
            for (b, &d) in l.bias.iter_mut().zip(&g.bias) {
                *b = *b - lr * d;
            }
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(T::zero());
            l.bias.fill(T::zero());
        }
    }
}
