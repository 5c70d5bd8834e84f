//! Dense ReLU network with reverse-mode gradients and Adam.
//!
//! Weights are stored row-major as `[outputs x inputs]`. Batched inputs are
//! flat row-major `[batch x inputs]` slices.

mod checkpoint;

use rand::Rng;
use thiserror::Error;

pub use checkpoint::{read_params, write_params, CHECKPOINT_MAGIC};

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("network needs at least two layer widths, got {0}")]
    TooFewLayers(usize),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
}

fn check_dim(expected: usize, found: usize) -> Result<(), NnetError> {
    if expected == found {
        Ok(())
    } else {
        Err(NnetError::DimensionMismatch { expected, found })
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    /// `out[b] = W * inp[b] + bias` for every row of the batch.
    fn affine(&self, inp: &[f64], batch: usize, out: &mut [f64]) {
        for row in out.chunks_exact_mut(self.outputs) {
            row.copy_from_slice(&self.biases);
        }
        // out (batch x outputs) += inp (batch x inputs) * W^T
        gemm(
            (batch, self.inputs, self.outputs),
            (inp, self.inputs, 1),
            (&self.weights, 1, self.inputs),
            1.0,
            (out, self.outputs, 1),
        );
    }
}

/// Parameters of a fully connected network; every layer but the last is followed by ReLU.
///
/// The default Q-network shape is `obs_dim -> 64 -> 64 -> actions`: three affine layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Gradient of a scalar with respect to every entry of an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    layers: Vec<Layer>,
}

fn zero_layers(widths: &[usize]) -> Vec<Layer> {
    widths
        .windows(2)
        .map(|w| Layer::zeros(w[0], w[1]))
        .collect()
}

impl MlpParams {
    /// All-zero network with the given widths (input first, output last).
    pub fn zeros(widths: &[usize]) -> Result<Self, NnetError> {
        if widths.len() < 2 {
            return Err(NnetError::TooFewLayers(widths.len()));
        }
        Ok(MlpParams {
            layers: zero_layers(widths),
        })
    }

    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn he_uniform<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self, NnetError> {
        let mut params = Self::zeros(widths)?;
        for layer in &mut params.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(params)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnetError> {
        if layers.is_empty() {
            return Err(NnetError::TooFewLayers(0));
        }
        for layer in &layers {
            check_dim(layer.inputs * layer.outputs, layer.weights.len())?;
            check_dim(layer.outputs, layer.biases.len())?;
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].outputs, pair[1].inputs)?;
        }
        Ok(MlpParams { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut widths = vec![self.layers[0].inputs];
        widths.extend(self.layers.iter().map(|l| l.outputs));
        widths
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.values().all(|v| v.is_finite()))
    }

    fn same_shape(&self, layers: &[Layer]) -> Result<(), NnetError> {
        check_dim(self.layers.len(), layers.len())?;
        for (a, b) in self.layers.iter().zip(layers) {
            check_dim(a.inputs, b.inputs)?;
            check_dim(a.outputs, b.outputs)?;
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>, NnetError> {
        self.forward_batch(obs, 1)
    }

    /// Outputs for a flat `[batch x input_dim]` slice, flattened `[batch x output_dim]`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>, NnetError> {
        check_dim(batch * self.input_dim(), inputs.len())?;
        let mut current = inputs.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; batch * layer.outputs];
            layer.affine(&current, batch, &mut next);
            if k + 1 < self.layers.len() {
                relu_in_place(&mut next);
            }
            current = next;
        }
        Ok(current)
    }

    /// Gradient of `<forward(obs), upstream>` with respect to every parameter.
    pub fn backward(&self, obs: &[f64], upstream: &[f64]) -> Result<GradientSet, NnetError> {
        self.backward_batch(obs, upstream, 1)
    }

    /// Gradient of `sum_b <forward(inputs[b]), upstream[b]>`.
    pub fn backward_batch(
        &self,
        inputs: &[f64],
        upstream: &[f64],
        batch: usize,
    ) -> Result<GradientSet, NnetError> {
        check_dim(batch * self.input_dim(), inputs.len())?;
        check_dim(batch * self.output_dim(), upstream.len())?;

        // activations[k] is the input to layer k (post-ReLU for k > 0)
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(inputs.to_vec());
        for (k, layer) in self.layers.iter().enumerate().take(self.layers.len() - 1) {
            let mut next = vec![0.0; batch * layer.outputs];
            layer.affine(&activations[k], batch, &mut next);
            relu_in_place(&mut next);
            activations.push(next);
        }

        let mut grads = GradientSet {
            layers: zero_layers(&self.widths()),
        };
        let mut delta = upstream.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let grad = &mut grads.layers[k];
            let input = &activations[k];

            for row in delta.chunks_exact(layer.outputs) {
                for (g, d) in grad.biases.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dW (outputs x inputs) = delta^T (outputs x batch) * input (batch x inputs)
            gemm(
                (layer.outputs, batch, layer.inputs),
                (&delta, 1, layer.outputs),
                (input, layer.inputs, 1),
                0.0,
                (&mut grad.weights, layer.inputs, 1),
            );
            if k == 0 {
                break;
            }
            // d input (batch x inputs) = delta (batch x outputs) * W (outputs x inputs)
            let mut prev = vec![0.0; batch * layer.inputs];
            gemm(
                (batch, layer.outputs, layer.inputs),
                (&delta, layer.outputs, 1),
                (&layer.weights, layer.inputs, 1),
                0.0,
                (&mut prev, layer.inputs, 1),
            );
            // ReLU gate: a post-activation of zero means the unit was inactive
            for (d, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = prev;
        }
        Ok(grads)
    }
}

/// `c = a * b + beta * c` for `a: m x k`, `b: k x n`, each given as `(data, row_stride, col_stride)`.
fn gemm(
    (m, k, n): (usize, usize, usize),
    a: (&[f64], usize, usize),
    b: (&[f64], usize, usize),
    beta: f64,
    c: (&mut [f64], usize, usize),
) {
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.0.len() >= extent(m, k, a.1, a.2));
    assert!(b.0.len() >= extent(k, n, b.1, b.2));
    assert!(c.0.len() >= extent(m, n, c.1, c.2));
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.0.as_mut_ptr(),
            c.1 as isize,
            c.2 as isize,
        );
    }
}

fn relu_in_place(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

impl GradientSet {
    pub fn zeros_like(params: &MlpParams) -> Self {
        GradientSet {
            layers: zero_layers(&params.widths()),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.values().copied())
    }

    pub fn global_norm(&self) -> f64 {
        self.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.values_mut().for_each(|g| *g *= factor);
        }
    }

    /// Rescale so the global l2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Layer>,
    second: Vec<Layer>,
    timestep: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        let widths = params.widths();
        AdamState {
            config,
            first: zero_layers(&widths),
            second: zero_layers(&widths),
            timestep: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &GradientSet,
    state: &mut AdamState,
) -> Result<(), NnetError> {
    params.same_shape(&grads.layers)?;
    params.same_shape(&state.first)?;
    state.timestep += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.timestep as i32;
    let correction1 = 1.0 - beta1.powi(t);
    let correction2 = 1.0 - beta2.powi(t);

    for (((layer, grad), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for (((p, &g), m), v) in layer
            .values_mut()
            .zip(grad.values())
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Mean Huber loss and its gradient with respect to `pred`.
pub fn huber_loss_grad(
    pred: &[f64],
    target: &[f64],
    delta: f64,
) -> Result<(f64, Vec<f64>), NnetError> {
    check_dim(pred.len(), target.len())?;
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let err = p - t;
            if err.abs() <= delta {
                loss += 0.5 * err * err;
                err / n
            } else {
                loss += delta * (err.abs() - 0.5 * delta);
                delta * err.signum() / n
            }
        })
        .collect();
    Ok((loss / n, grad))
}
