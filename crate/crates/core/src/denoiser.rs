//! Conditional noise-prediction network ε_θ(x_t, t, p).
//!
//! A plain MLP over the concatenation `[x_t, embed(t), p]` with SiLU hidden
//! activations and a linear head. Gradients are computed by hand so the
//! whole training path stays deterministic and dependency free.

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::rng::gaussian_vec;

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserConfig {
    pub data_dim: usize,
    pub cond_dim: usize,
    pub time_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            data_dim: 16,
            cond_dim: 16,
            time_dim: 32,
            hidden: vec![128, 128],
        }
    }
}

impl DenoiserConfig {
    pub fn input_dim(&self) -> usize {
        self.data_dim + self.time_dim + self.cond_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.cond_dim == 0 {
            return Err(Error::Input("data and condition dims must be positive".into()));
        }
        if self.time_dim == 0 || !self.time_dim.is_multiple_of(2) {
            return Err(Error::Input(format!(
                "time embedding width must be even and positive, got {}",
                self.time_dim
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Input("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim());
        w.extend_from_slice(&self.hidden);
        w.push(self.data_dim);
        w
    }
}

/// Sinusoidal embedding of an integer step.
///
/// Entry `2k` is `sin(t·ω_k)` and entry `2k+1` is `cos(t·ω_k)`, with
/// `ω_k = 10000^(-k/(dim/2))`.
pub fn time_embedding(t: usize, dim: usize, max_step: usize) -> Result<Vec<f64>> {
    if t == 0 || t > max_step {
        return Err(Error::StepRange { t, max: max_step });
    }
    Ok(sinusoid(t as f64, dim))
}

fn sinusoid(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for k in 0..half {
        let freq = 10000f64.powf(-(k as f64) / half as f64);
        let (s, c) = (t * freq).sin_cos();
        out.push(s);
        out.push(c);
    }
    out
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Dense affine layer; `weights` is row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }
}

/// Trainable parameters of ε_θ together with the architecture they realise.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    config: DenoiserConfig,
    max_step: usize,
    layers: Vec<Layer>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    hidden_pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Gradient buffers congruent to a [`Denoiser`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_for(model: &Denoiser) -> Self {
        Self {
            layers: model.layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&g| g == 0.0))
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.bias);
    }
    out
}

impl Denoiser {
    /// Gaussian init with std `1/sqrt(fan_in)`, zero biases.
    pub fn new<R: Rng + ?Sized>(config: DenoiserConfig, max_step: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if max_step == 0 {
            return Err(Error::Input("max step must be positive".into()));
        }
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let mut layer = Layer::zeros(fan_in, fan_out);
                layer.weights = gaussian_vec(rng, fan_in * fan_out)
                    .into_iter()
                    .map(|g| g * scale)
                    .collect();
                layer
            })
            .collect();
        Ok(Self {
            config,
            max_step,
            layers,
        })
    }

    /// Rebuilds a model from stored layers, checking shapes and finiteness.
    pub fn from_layers(config: DenoiserConfig, max_step: usize, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        if layers.len() != widths.len() - 1 {
            return Err(Error::Checkpoint(format!(
                "expected {} layers, found {}",
                widths.len() - 1,
                layers.len()
            )));
        }
        for (l, w) in layers.iter().zip(widths.windows(2)) {
            if l.in_dim != w[0] || l.out_dim != w[1] || l.weights.len() != w[0] * w[1] || l.bias.len() != w[1] {
                return Err(Error::Checkpoint("layer shape does not match architecture".into()));
            }
        }
        let model = Self {
            config,
            max_step,
            layers,
        };
        if !model.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn max_step(&self) -> usize {
        self.max_step
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat parameter vector", self.num_params(), flat.len())?;
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Zeroes the output layer so the untrained network predicts ε̂ = 0.
    pub fn zero_output_layer(&mut self) {
        if let Some(last) = self.layers.last_mut() {
            last.weights.fill(0.0);
            last.bias.fill(0.0);
        }
    }

    fn assemble_input(&self, x_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
        check_len("x_t", self.config.data_dim, x_t.len())?;
        check_len("condition", self.config.cond_dim, cond.len())?;
        let emb = time_embedding(t, self.config.time_dim, self.max_step)?;
        let mut input = Vec::with_capacity(self.config.input_dim());
        input.extend_from_slice(x_t);
        input.extend_from_slice(&emb);
        input.extend_from_slice(cond);
        Ok(input)
    }

    /// ε_θ(x_t, t, p).
    pub fn predict_eps(&self, x_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.assemble_input(x_t, t, cond)?;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(&a);
            if i < last {
                z.iter_mut().for_each(|v| *v = silu(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass that keeps the activations needed by [`Self::backward`].
    pub fn forward(&self, x_t: &[f64], t: usize, cond: &[f64]) -> Result<ForwardTrace> {
        let mut a = self.assemble_input(x_t, t, cond)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(last);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&a);
            inputs.push(a);
            if i < last {
                a = z.iter().map(|&v| silu(v)).collect();
                hidden_pre.push(z);
            } else {
                a = z;
            }
        }
        Ok(ForwardTrace {
            inputs,
            hidden_pre,
            output: a,
        })
    }

    /// Accumulates into `grads` the gradient of a scalar loss whose
    /// derivative with respect to this trace's output is `out_grad`.
    pub fn backward(&self, trace: &ForwardTrace, out_grad: &[f64], grads: &mut Gradients) -> Result<()> {
        check_len("output gradient", self.config.data_dim, out_grad.len())?;
        check_len("gradient layers", self.layers.len(), grads.layers.len())?;
        let mut delta = out_grad.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, &x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if l == 0 {
                break;
            }
            let pre = &trace.hidden_pre[l - 1];
            let mut prev = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            for (p, &z) in prev.iter_mut().zip(pre) {
                *p *= silu_grad(z);
            }
            delta = prev;
        }
        Ok(())
    }

    /// Plain gradient step `θ ← θ − lr·g`.
    pub fn apply_sgd(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * gb;
            }
        }
    }
}

/// One training example for the squared-error objective.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub x_t: &'a [f64],
    pub t: usize,
    pub cond: &'a [f64],
    pub target: &'a [f64],
}

/// Mean over the batch of `‖target − ε_θ‖²`, with its exact gradient.
pub fn squared_error_loss(model: &Denoiser, batch: &[Example<'_>]) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_for(model);
    if batch.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        check_len("target", model.config.data_dim, ex.target.len())?;
        let trace = model.forward(ex.x_t, ex.t, ex.cond)?;
        let mut out_grad = Vec::with_capacity(ex.target.len());
        let mut sq = 0.0;
        for (&pred, &target) in trace.output.iter().zip(ex.target) {
            let r = pred - target;
            sq += r * r;
            out_grad.push(2.0 * scale * r);
        }
        total += sq;
        model.backward(&trace, &out_grad, &mut grads)?;
    }
    Ok((total * scale, grads))
}
