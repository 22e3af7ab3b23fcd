//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Parameters of a network live in one flat vector so that the optimizer, the
//! soft target update and checkpointing all operate on plain slices. Layer `l`
//! stores its `out × in` weight matrix row-major followed by its bias.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside the tanh change-of-variables log term.
pub const TANH_EPS: f64 = 1e-6;
/// Squashed actions are kept strictly inside (−1, 1); plain `tanh` rounds to
/// ±1 for large inputs.
pub const ACTION_BOUND: f64 = 1.0 - 1e-12;

/// Parameters of a fully connected network with ReLU hidden layers and a
/// linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp", into = "RawMlp")]
pub struct MlpParams {
    dims: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

impl TryFrom<RawMlp> for MlpParams {
    type Error = Error;

    fn try_from(raw: RawMlp) -> Result<Self> {
        if raw.dims.len() < 2 || raw.dims.contains(&0) {
            return Err(Error::validation("dims", "need at least two non-zero layer widths"));
        }
        let expected = param_count(&raw.dims);
        if raw.params.len() != expected {
            return Err(Error::Shape { expected, got: raw.params.len() });
        }
        if raw.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("params", "all parameters must be finite"));
        }
        Ok(Self { dims: raw.dims, data: raw.params })
    }
}

impl From<MlpParams> for RawMlp {
    fn from(p: MlpParams) -> Self {
        RawMlp { dims: p.dims, params: p.data }
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Layer outputs recorded during a forward pass. `acts[0]` is the input and
/// `acts[l + 1]` the (post-activation) output of layer `l`.
#[derive(Clone, Debug)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace always holds the input")
    }
}

impl MlpParams {
    /// All-zero parameters.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2 && !dims.contains(&0), "invalid layer widths {dims:?}");
        Self { dims: dims.to_vec(), data: vec![0.0; param_count(dims)] }
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init<R: rand::Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut params = Self::zeros(dims);
        let mut offset = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let len = w[0] * w[1] + w[1];
            for v in &mut params.data[offset..offset + len] {
                *v = rng.random_range(-bound..bound);
            }
            offset += len;
        }
        params
    }

    /// Like [`MlpParams::init`] but with the last layer scaled by `scale`.
    pub fn init_with_output_scale<R: rand::Rng + ?Sized>(dims: &[usize], scale: f64, rng: &mut R) -> Self {
        let mut params = Self::init(dims, rng);
        let last = dims.len() - 2;
        let (w, b) = params.layer_range(last);
        for v in &mut params.data[w.start..b.end] {
            *v *= scale;
        }
        params
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Weight and bias index ranges of layer `l` in the flat vector.
    pub fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let offset: usize = self.dims[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
        let w_end = offset + fan_in * fan_out;
        (offset..w_end, w_end..w_end + fan_out)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), got: input.len() });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.acts.pop().unwrap())
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(input.to_vec());
        let mut offset = 0;
        let layers = self.num_layers();
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.data[offset..offset + fan_in * fan_out];
            let bias = &self.data[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let x = &acts[l];
            let mut out: Vec<f64> = weights
                .chunks_exact(fan_in)
                .zip(bias)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
                .collect();
            if l + 1 < layers {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Trace { acts })
    }

    /// Back-propagates `upstream = ∂L/∂output` through a recorded pass.
    ///
    /// Parameter gradients are *added* into `grads` (so a batch can be
    /// accumulated); the gradient with respect to the input is returned.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if grads.len() != self.num_params() {
            return Err(Error::Shape { expected: self.num_params(), got: grads.len() });
        }
        self.backward_impl(trace, upstream, Some(grads))
    }

    /// Input gradient only; skips the parameter gradients.
    pub fn backward_input(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backward_impl(trace, upstream, None)
    }

    fn backward_impl(&self, trace: &Trace, upstream: &[f64], mut grads: Option<&mut [f64]>) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Shape { expected: self.output_dim(), got: upstream.len() });
        }
        let layers = self.num_layers();
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let fan_in = self.dims[l];
            let (w_range, b_range) = self.layer_range(l);
            if l + 1 < layers {
                // ReLU: pass gradient only where the unit was active.
                for (d, a) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            if let Some(grads) = grads.as_deref_mut() {
                let x = &trace.acts[l];
                for (row, d) in grads[w_range.clone()].chunks_exact_mut(fan_in).zip(&delta) {
                    if *d != 0.0 {
                        for (g, xi) in row.iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                }
                for (g, d) in grads[b_range].iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            let mut prev = vec![0.0; fan_in];
            for (row, d) in self.data[w_range].chunks_exact(fan_in).zip(&delta) {
                if *d != 0.0 {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Parameter and input gradients of `upstream · f(input)`.
    pub fn gradient(&self, input: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = vec![0.0; self.num_params()];
        let input_grad = self.backward(&trace, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// `self ← τ·source + (1 − τ)·self`.
    pub fn soft_update_from(&mut self, source: &MlpParams, tau: f64) {
        assert_eq!(self.dims, source.dims, "soft update between different shapes");
        for (t, s) in self.data.iter_mut().zip(&source.data) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }
}

/// Mean and clamped log standard deviation of a diagonal Gaussian policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether each raw log-std fell outside the clamp (zero gradient there).
    pub clamped: Vec<bool>,
}

impl PolicyOutput {
    /// Splits an actor output of length `2·d` into mean and log-std halves.
    pub fn from_raw(raw: &[f64]) -> Self {
        let d = raw.len() / 2;
        let mean = raw[..d].to_vec();
        let (log_std, clamped) = raw[d..2 * d]
            .iter()
            .map(|v| (v.clamp(LOG_STD_MIN, LOG_STD_MAX), !(LOG_STD_MIN..=LOG_STD_MAX).contains(v)))
            .unzip();
        Self { mean, log_std, clamped }
    }

    pub fn action_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn greedy_action(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m.tanh().clamp(-ACTION_BOUND, ACTION_BOUND)).collect()
    }
}

/// A reparameterized draw from the tanh-squashed Gaussian.
#[derive(Clone, Debug)]
pub struct SquashedSample {
    pub noise: Vec<f64>,
    /// Pre-squash Gaussian sample.
    pub pre_tanh: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

impl SquashedSample {
    /// `∂ log π / ∂ mean` and `∂ log π / ∂ log_std` at fixed noise.
    pub fn log_prob_grads(&self, out: &PolicyOutput) -> (Vec<f64>, Vec<f64>) {
        let d_mean: Vec<f64> = self.pre_tanh.iter().map(|u| tanh_correction_grad(*u)).collect();
        let d_log_std = d_mean
            .iter()
            .zip(&out.log_std)
            .zip(&self.noise)
            .map(|((c, ls), n)| -1.0 + c * ls.exp() * n)
            .collect();
        (d_mean, d_log_std)
    }
}

/// `1 − tanh(u)²` computed as `sech(u)²`, which keeps its relative
/// precision where `tanh(u)` rounds towards ±1. `None` once the action hits
/// the clamp.
fn sech2(u: f64) -> Option<f64> {
    if u.tanh().abs() >= ACTION_BOUND {
        return None;
    }
    let c = u.cosh();
    Some(1.0 / (c * c))
}

fn floor_sech2() -> f64 {
    (1.0 - ACTION_BOUND) * (1.0 + ACTION_BOUND)
}

/// Derivative of `−ln(1 − tanh(u)² + ε)` with respect to `u`; zero past
/// the clamp.
fn tanh_correction_grad(u: f64) -> f64 {
    match sech2(u) {
        Some(s) => 2.0 * u.tanh() * s / (s + TANH_EPS),
        None => 0.0,
    }
}

/// Samples `action = tanh(mean + std ⊙ noise)` and its log-density.
pub fn policy_sample(out: &PolicyOutput, noise: &[f64]) -> Result<SquashedSample> {
    if noise.len() != out.action_dim() {
        return Err(Error::Shape { expected: out.action_dim(), got: noise.len() });
    }
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let mut pre_tanh = Vec::with_capacity(noise.len());
    let mut action = Vec::with_capacity(noise.len());
    let mut log_prob = 0.0;
    for ((m, ls), n) in out.mean.iter().zip(&out.log_std).zip(noise) {
        let u = m + ls.exp() * n;
        let a = u.tanh().clamp(-ACTION_BOUND, ACTION_BOUND);
        let s = sech2(u).unwrap_or_else(floor_sech2);
        log_prob += -0.5 * n * n - ls - half_ln_2pi - (s + TANH_EPS).ln();
        pre_tanh.push(u);
        action.push(a);
    }
    Ok(SquashedSample { noise: noise.to_vec(), pre_tanh, action, log_prob })
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    /// One bias-corrected descent step (`params -= lr · m̂ / (√v̂ + ε)`).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::Shape { expected: self.first_moment.len(), got: params.len() });
        }
        if grads.len() != params.len() {
            return Err(Error::Shape { expected: params.len(), got: grads.len() });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
