//! Dense layers with hand-written reverse-mode gradients.
//!
//! Activations are `features × batch` matrices (one column per record).
//! Training-mode forwards never mutate the layers: batch-norm statistics
//! come back in the cache and are folded into the running estimates by
//! [`LayerStack::update_running_stats`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// He-uniform, for layers feeding a ReLU.
    He,
    /// Xavier-uniform.
    Xavier,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `out × in`.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, n_in: usize, n_out: usize, init: Init) -> Self {
        let limit = match init {
            Init::He => (6.0 / n_in as f64).sqrt(),
            Init::Xavier => (6.0 / (n_in + n_out) as f64).sqrt(),
            Init::Zero => 0.0,
        };
        let weight = DMatrix::from_fn(n_out, n_in, |_, _| {
            if limit == 0.0 {
                0.0
            } else {
                rng.random_range(-limit..limit)
            }
        });
        Self {
            weight,
            bias: DVector::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = &self.weight * x;
        for mut col in y.column_iter_mut() {
            col += &self.bias;
        }
        y
    }

    /// Returns `dx` and appends `[dW (column-major), db]` to `grads`.
    pub fn backward(&self, x: &DMatrix<f64>, dy: &DMatrix<f64>, grads: &mut Vec<f64>) -> DMatrix<f64> {
        let dw = dy * x.transpose();
        grads.extend_from_slice(dw.as_slice());
        grads.extend(dy.row_iter().map(|r| r.sum()));
        self.weight.transpose() * dy
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
    pub running_mean: DVector<f64>,
    pub running_var: DVector<f64>,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: DVector::from_element(dim, 1.0),
            beta: DVector::zeros(dim),
            running_mean: DVector::zeros(dim),
            running_var: DVector::from_element(dim, 1.0),
            momentum: BN_MOMENTUM,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Linear(Linear),
    BatchNorm(BatchNorm),
    Relu,
    /// `x + inner(x)`; the inner stack must preserve width.
    Residual(LayerStack),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

enum Cache {
    Linear(DMatrix<f64>),
    BatchNorm {
        xhat: DMatrix<f64>,
        inv_std: DVector<f64>,
        batch_mean: DVector<f64>,
        batch_var: DVector<f64>,
        batch: usize,
    },
    BatchNormInfer(DMatrix<f64>),
    Relu(DMatrix<f64>),
    Residual(StackCache),
}

/// Forward intermediates needed by [`LayerStack::backward`].
pub struct StackCache {
    caches: Vec<Cache>,
}

impl StackCache {
    /// On/off state of every ReLU unit in the pass, in layer order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        self.collect_relu(&mut out);
        out
    }

    fn collect_relu(&self, out: &mut Vec<bool>) {
        for c in &self.caches {
            match c {
                Cache::Relu(x) => out.extend(x.iter().map(|v| *v > 0.0)),
                Cache::Residual(inner) => inner.collect_relu(out),
                _ => {}
            }
        }
    }
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    /// Appends an FC → BN → ReLU unit.
    pub fn push_fbr<R: Rng + ?Sized>(&mut self, rng: &mut R, n_in: usize, n_out: usize) {
        self.layers.push(Layer::Linear(Linear::new(rng, n_in, n_out, Init::He)));
        self.layers.push(Layer::BatchNorm(BatchNorm::new(n_out)));
        self.layers.push(Layer::Relu);
    }

    /// Appends a residual block `x + BN(FC(FBR(x)))` of the given width.
    pub fn push_residual<R: Rng + ?Sized>(&mut self, rng: &mut R, width: usize) {
        let mut inner = LayerStack::default();
        inner.push_fbr(rng, width, width);
        inner.layers.push(Layer::Linear(Linear::new(rng, width, width, Init::Xavier)));
        inner.layers.push(Layer::BatchNorm(BatchNorm::new(width)));
        self.layers.push(Layer::Residual(inner));
    }

    /// Input width, if it is determined by a leading linear layer.
    pub fn input_dim(&self) -> Option<usize> {
        match self.layers.first()? {
            Layer::Linear(l) => Some(l.n_in()),
            Layer::BatchNorm(b) => Some(b.dim()),
            Layer::Residual(s) => s.input_dim(),
            Layer::Relu => None,
        }
    }

    /// Checks the width chain starting from `input`; returns the output width.
    pub fn output_dim(&self, input: usize) -> Result<usize, String> {
        let mut width = input;
        for (k, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Linear(l) => {
                    if l.n_in() != width {
                        return Err(format!("layer {k}: linear expects {} inputs, got {width}", l.n_in()));
                    }
                    if l.bias.len() != l.n_out() {
                        return Err(format!("layer {k}: bias length mismatch"));
                    }
                    width = l.n_out();
                }
                Layer::BatchNorm(b) => {
                    if b.dim() != width
                        || b.beta.len() != width
                        || b.running_mean.len() != width
                        || b.running_var.len() != width
                    {
                        return Err(format!("layer {k}: batch norm width {} vs {width}", b.dim()));
                    }
                    if b.running_var.iter().any(|v| !(*v > 0.0)) {
                        return Err(format!("layer {k}: nonpositive running variance"));
                    }
                }
                Layer::Relu => {}
                Layer::Residual(inner) => {
                    let out = inner.output_dim(width).map_err(|e| format!("layer {k}: {e}"))?;
                    if out != width {
                        return Err(format!("layer {k}: residual block maps {width} to {out}"));
                    }
                }
            }
        }
        Ok(width)
    }

    pub fn forward(&self, x: &DMatrix<f64>, mode: Mode) -> (DMatrix<f64>, StackCache) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, cache) = match layer {
                Layer::Linear(l) => {
                    let y = l.forward(&cur);
                    (y, Cache::Linear(cur))
                }
                Layer::BatchNorm(bn) => bn_forward(bn, cur, mode),
                Layer::Relu => {
                    let y = cur.map(|v| v.max(0.0));
                    (y, Cache::Relu(cur))
                }
                Layer::Residual(inner) => {
                    let (y, c) = inner.forward(&cur, mode);
                    (y + cur, Cache::Residual(c))
                }
            };
            caches.push(cache);
            cur = next;
        }
        (cur, StackCache { caches })
    }

    /// Inference-mode forward without keeping intermediates.
    pub fn infer(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Linear(l) => l.forward(&cur),
                Layer::BatchNorm(bn) => bn_forward(bn, cur, Mode::Infer).0,
                Layer::Relu => cur.map(|v| v.max(0.0)),
                Layer::Residual(inner) => inner.infer(&cur) + cur,
            };
        }
        cur
    }

    /// Back-propagates `dy`; returns `dx` and the parameter gradients in
    /// [`LayerStack::params`] order.
    pub fn backward(&self, cache: &StackCache, dy: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let mut per_layer: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut grad = dy.clone();
        for (layer, c) in self.layers.iter().zip(&cache.caches).rev() {
            let mut g = Vec::new();
            grad = match (layer, c) {
                (Layer::Linear(l), Cache::Linear(x)) => l.backward(x, &grad, &mut g),
                (Layer::BatchNorm(bn), Cache::BatchNorm { xhat, inv_std, batch, .. }) => {
                    bn_backward(bn, xhat, inv_std, *batch, &grad, &mut g)
                }
                (Layer::BatchNorm(bn), Cache::BatchNormInfer(xhat)) => {
                    // Inference statistics are constants: an affine map.
                    let scale = bn_infer_scale(bn);
                    g.extend(grad.row_iter().zip(xhat.row_iter()).map(|(d, x)| d.dot(&x)));
                    g.extend(grad.row_iter().map(|r| r.sum()));
                    let mut dx = grad.clone();
                    for j in 0..bn.dim() {
                        for v in dx.row_mut(j).iter_mut() {
                            *v *= scale[j];
                        }
                    }
                    dx
                }
                (Layer::Relu, Cache::Relu(x)) => grad.zip_map(x, |d, v| if v > 0.0 { d } else { 0.0 }),
                (Layer::Residual(inner), Cache::Residual(ic)) => {
                    let (dx, ig) = inner.backward(ic, &grad);
                    g = ig;
                    dx + grad
                }
                _ => unreachable!("cache does not match layer"),
            };
            per_layer.push(g);
        }
        per_layer.reverse();
        (grad, per_layer.concat())
    }

    /// Folds training-mode batch statistics into the running estimates.
    pub fn update_running_stats(&mut self, cache: &StackCache) {
        for (layer, c) in self.layers.iter_mut().zip(&cache.caches) {
            match (layer, c) {
                (
                    Layer::BatchNorm(bn),
                    Cache::BatchNorm {
                        batch_mean,
                        batch_var,
                        batch,
                        ..
                    },
                ) => {
                    let m = bn.momentum;
                    let unbiased = if *batch > 1 {
                        *batch as f64 / (*batch - 1) as f64
                    } else {
                        1.0
                    };
                    bn.running_mean = &bn.running_mean * m + batch_mean * (1.0 - m);
                    bn.running_var = &bn.running_var * m + batch_var * ((1.0 - m) * unbiased);
                }
                (Layer::Residual(inner), Cache::Residual(ic)) => inner.update_running_stats(ic),
                _ => {}
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Linear(x) => x.param_count(),
                Layer::BatchNorm(b) => 2 * b.dim(),
                Layer::Relu => 0,
                Layer::Residual(s) => s.param_count(),
            })
            .sum()
    }

    /// Trainable parameters: per linear layer `W` (column-major) then `b`,
    /// per batch norm `γ` then `β`.
    pub fn params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            match l {
                Layer::Linear(x) => {
                    out.extend_from_slice(x.weight.as_slice());
                    out.extend_from_slice(x.bias.as_slice());
                }
                Layer::BatchNorm(b) => {
                    out.extend_from_slice(b.gamma.as_slice());
                    out.extend_from_slice(b.beta.as_slice());
                }
                Layer::Relu => {}
                Layer::Residual(s) => s.params(out),
            }
        }
    }

    /// Inverse of [`LayerStack::params`]; consumes values from the front of `src`.
    pub fn set_params(&mut self, src: &mut &[f64]) {
        for l in &mut self.layers {
            match l {
                Layer::Linear(x) => {
                    take_into(src, x.weight.as_mut_slice());
                    take_into(src, x.bias.as_mut_slice());
                }
                Layer::BatchNorm(b) => {
                    take_into(src, b.gamma.as_mut_slice());
                    take_into(src, b.beta.as_mut_slice());
                }
                Layer::Relu => {}
                Layer::Residual(s) => s.set_params(src),
            }
        }
    }

    /// Non-trainable state: running mean then running variance per batch norm.
    pub fn running_stats(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            match l {
                Layer::BatchNorm(b) => {
                    out.extend_from_slice(b.running_mean.as_slice());
                    out.extend_from_slice(b.running_var.as_slice());
                }
                Layer::Residual(s) => s.running_stats(out),
                _ => {}
            }
        }
    }

    pub fn set_running_stats(&mut self, src: &mut &[f64]) {
        for l in &mut self.layers {
            match l {
                Layer::BatchNorm(b) => {
                    take_into(src, b.running_mean.as_mut_slice());
                    take_into(src, b.running_var.as_mut_slice());
                }
                Layer::Residual(s) => s.set_running_stats(src),
                _ => {}
            }
        }
    }

    /// Number of FC → BN → ReLU triples at the top level.
    pub fn count_fbr_units(&self) -> usize {
        self.layers
            .windows(3)
            .filter(|w| {
                matches!(
                    w,
                    [Layer::Linear(_), Layer::BatchNorm(_), Layer::Relu]
                )
            })
            .count()
    }

    pub fn count_residual_blocks(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::Residual(_)))
            .count()
    }
}

fn take_into(src: &mut &[f64], dst: &mut [f64]) {
    let (head, tail) = src.split_at(dst.len());
    dst.copy_from_slice(head);
    *src = tail;
}

fn bn_infer_scale(bn: &BatchNorm) -> DVector<f64> {
    DVector::from_fn(bn.dim(), |j, _| bn.gamma[j] / (bn.running_var[j] + BN_EPS).sqrt())
}

fn affine_rows(y: &mut DMatrix<f64>, gamma: &DVector<f64>, beta: &DVector<f64>) {
    for j in 0..y.nrows() {
        let (g, b) = (gamma[j], beta[j]);
        for v in y.row_mut(j).iter_mut() {
            *v = *v * g + b;
        }
    }
}

fn bn_forward(bn: &BatchNorm, x: DMatrix<f64>, mode: Mode) -> (DMatrix<f64>, Cache) {
    let (dim, batch) = x.shape();
    match mode {
        Mode::Infer => {
            let mut xhat = x;
            for j in 0..dim {
                let (m, s) = (bn.running_mean[j], 1.0 / (bn.running_var[j] + BN_EPS).sqrt());
                for v in xhat.row_mut(j).iter_mut() {
                    *v = (*v - m) * s;
                }
            }
            let mut y = xhat.clone();
            affine_rows(&mut y, &bn.gamma, &bn.beta);
            (y, Cache::BatchNormInfer(xhat))
        }
        Mode::Train => {
            let n = batch as f64;
            let mean = DVector::from_fn(dim, |j, _| x.row(j).sum() / n);
            let var = DVector::from_fn(dim, |j, _| {
                x.row(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n
            });
            let inv_std = var.map(|v| 1.0 / (v + BN_EPS).sqrt());
            let mut xhat = x;
            for j in 0..dim {
                let (m, s) = (mean[j], inv_std[j]);
                for v in xhat.row_mut(j).iter_mut() {
                    *v = (*v - m) * s;
                }
            }
            let mut y = xhat.clone();
            affine_rows(&mut y, &bn.gamma, &bn.beta);
            (
                y,
                Cache::BatchNorm {
                    xhat,
                    inv_std,
                    batch_mean: mean,
                    batch_var: var,
                    batch,
                },
            )
        }
    }
}

fn bn_backward(
    bn: &BatchNorm,
    xhat: &DMatrix<f64>,
    inv_std: &DVector<f64>,
    batch: usize,
    dy: &DMatrix<f64>,
    grads: &mut Vec<f64>,
) -> DMatrix<f64> {
    let dim = bn.dim();
    let n = batch as f64;
    let mut dgamma = Vec::with_capacity(dim);
    let mut dbeta = Vec::with_capacity(dim);
    let mut dx = DMatrix::zeros(dim, batch);
    for j in 0..dim {
        let dyj = dy.row(j);
        let xj = xhat.row(j);
        let sum_dy: f64 = dyj.sum();
        let sum_dy_x: f64 = dyj.iter().zip(xj.iter()).map(|(a, b)| a * b).sum();
        dgamma.push(sum_dy_x);
        dbeta.push(sum_dy);
        let k = bn.gamma[j] * inv_std[j] / n;
        for b in 0..batch {
            dx[(j, b)] = k * (n * dyj[b] - sum_dy - xj[b] * sum_dy_x);
        }
    }
    grads.extend(dgamma);
    grads.extend(dbeta);
    dx
}
