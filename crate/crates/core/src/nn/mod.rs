//! Multilayer perceptrons over a flat parameter vector.
//!
//! Parameters are packed layer by layer: for `l = 1..L` the weight matrix
//! `W_l` (`d_l × d_{l−1}`, row-major) followed by the bias `b_l` (`d_l`).
//! Hidden layers apply the activation elementwise; the last affine map feeds
//! the output wrapper.

mod activation;
mod graph;

pub use activation::{sigmoid, Activation};
pub use graph::mlp_graph;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};

/// Output-range wrapper applied after the last affine layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wrapper {
    None,
    Softmax,
    /// `a + (b − a) ⊙ sigmoid(z)`, output in the open box `(a, b)`.
    Box { a: Vec<f64>, b: Vec<f64> },
    /// `z²/2` componentwise.
    Nonneg,
    Sigmoid,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub wrapper: Wrapper,
}

/// Location of one layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub weight_offset: usize,
    pub bias_offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, wrapper: Wrapper) -> Result<Self> {
        let spec = Self {
            widths,
            activation,
            wrapper,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Argument("an MLP needs at least input and output widths".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Argument("layer widths must be at least 1".into()));
        }
        self.activation.validate()?;
        if matches!(self.activation, Activation::Swiglu { .. }) {
            return Err(Error::Argument(
                "SwiGLU is a scalar gated unit, not an elementwise hidden activation".into(),
            ));
        }
        if let Wrapper::Box { a, b } = &self.wrapper {
            let d = self.output_dim();
            if a.len() != d || b.len() != d {
                return Err(Error::Shape(format!("box bounds must have length {d}")));
            }
            if a.iter().zip(b).any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::Argument("box wrapper needs a_i < b_i".into()));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// `Σ_l d_l (d_{l−1} + 1)`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn layers(&self) -> Vec<LayerSlot> {
        let mut off = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let slot = LayerSlot {
                    weight_offset: off,
                    bias_offset: off + w[1] * w[0],
                    rows: w[1],
                    cols: w[0],
                };
                off += w[1] * (w[0] + 1);
                slot
            })
            .collect()
    }
}

/// Flat parameter array θ.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Little-endian `u64` element count followed by little-endian `f64`s.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.0.len());
        out.extend_from_slice(&(self.0.len() as u64).to_le_bytes());
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Argument("parameter file shorter than its header".into()));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if body.len() != n.saturating_mul(8) {
            return Err(Error::Shape(format!(
                "header declares {n} values but body holds {} bytes",
                body.len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("parameter file contains non-finite values".into()));
        }
        Ok(Self(values))
    }
}

/// Glorot-uniform weights, zero biases.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = crate::rng::seeded(seed);
    let mut theta = vec![0.0; spec.param_count()];
    for slot in spec.layers() {
        let limit = (6.0 / (slot.rows + slot.cols) as f64).sqrt();
        for w in &mut theta[slot.weight_offset..slot.bias_offset] {
            *w = rng.random_range(-limit..limit);
        }
    }
    ParamVector(theta)
}

/// Intermediate values of a forward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `acts[0] = x`, `acts[l]` = post-activation output of hidden layer `l`.
    pub acts: Vec<Vec<f64>>,
    /// Pre-activation of every layer; the last entry is the wrapper input.
    pub pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

fn affine(theta: &[f64], slot: LayerSlot, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for r in 0..slot.rows {
        let row = &theta[slot.weight_offset + r * slot.cols..slot.weight_offset + (r + 1) * slot.cols];
        let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
        out.push(dot + theta[slot.bias_offset + r]);
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn wrap(wrapper: &Wrapper, z: &[f64]) -> Vec<f64> {
    match wrapper {
        Wrapper::None => z.to_vec(),
        Wrapper::Softmax => softmax(z),
        Wrapper::Box { a, b } => z
            .iter()
            .zip(a.iter().zip(b))
            .map(|(v, (lo, hi))| lo + (hi - lo) * sigmoid(*v))
            .collect(),
        Wrapper::Nonneg => z.iter().map(|v| 0.5 * v * v).collect(),
        Wrapper::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
        Wrapper::Tanh => z.iter().map(|v| v.tanh()).collect(),
    }
}

/// `J_wrapperᵀ u` at wrapper input `z` with wrapper output `y`.
fn wrap_vjp(wrapper: &Wrapper, z: &[f64], y: &[f64], u: &[f64]) -> Vec<f64> {
    match wrapper {
        Wrapper::None => u.to_vec(),
        Wrapper::Softmax => {
            let su: f64 = y.iter().zip(u).map(|(s, w)| s * w).sum();
            y.iter().zip(u).map(|(s, w)| s * (w - su)).collect()
        }
        Wrapper::Box { a, b } => z
            .iter()
            .zip(u)
            .zip(a.iter().zip(b))
            .map(|((v, w), (lo, hi))| {
                let s = sigmoid(*v);
                (hi - lo) * s * (1.0 - s) * w
            })
            .collect(),
        Wrapper::Nonneg => z.iter().zip(u).map(|(v, w)| v * w).collect(),
        Wrapper::Sigmoid => y.iter().zip(u).map(|(s, w)| s * (1.0 - s) * w).collect(),
        Wrapper::Tanh => y.iter().zip(u).map(|(t, w)| (1.0 - t * t) * w).collect(),
    }
}

/// `J_wrapper t`. Every wrapper Jacobian here is symmetric.
fn wrap_jvp(wrapper: &Wrapper, z: &[f64], y: &[f64], t: &[f64]) -> Vec<f64> {
    wrap_vjp(wrapper, z, y, t)
}

fn check_dims(spec: &MlpSpec, theta: &[f64], x: &[f64]) -> Result<()> {
    shape_check("parameter vector", spec.param_count(), theta.len())?;
    shape_check("network input", spec.input_dim(), x.len())
}

/// Forward pass returning the output and the cached layer values.
pub fn mlp_forward_cached(spec: &MlpSpec, theta: &[f64], x: &[f64]) -> Result<ForwardCache> {
    check_dims(spec, theta, x)?;
    let layers = spec.layers();
    let mut cache = ForwardCache {
        acts: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
        output: Vec::new(),
    };
    cache.acts.push(x.to_vec());
    for (l, slot) in layers.iter().enumerate() {
        let mut z = Vec::with_capacity(slot.rows);
        affine(theta, *slot, &cache.acts[l], &mut z);
        if l + 1 < layers.len() {
            cache.acts.push(z.iter().map(|&v| spec.activation.value(v)).collect());
        }
        cache.pre.push(z);
    }
    cache.output = wrap(&spec.wrapper, cache.pre.last().unwrap());
    Ok(cache)
}

pub fn mlp_forward(spec: &MlpSpec, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    Ok(mlp_forward_cached(spec, theta, x)?.output)
}

/// Reverse pass for `upstream · y`: returns `(∂/∂θ, ∂/∂x)`.
pub fn mlp_grad(spec: &MlpSpec, theta: &[f64], x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = mlp_forward_cached(spec, theta, x)?;
    mlp_backward(spec, theta, &cache, upstream)
}

/// Reverse pass reusing a forward cache.
pub fn mlp_backward(
    spec: &MlpSpec,
    theta: &[f64],
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    shape_check("upstream", spec.output_dim(), upstream.len())?;
    let layers = spec.layers();
    let mut grad = vec![0.0; theta.len()];
    let mut gz = wrap_vjp(&spec.wrapper, cache.pre.last().unwrap(), &cache.output, upstream);
    for l in (0..layers.len()).rev() {
        let slot = layers[l];
        let input = &cache.acts[l];
        for r in 0..slot.rows {
            let base = slot.weight_offset + r * slot.cols;
            for c in 0..slot.cols {
                grad[base + c] += gz[r] * input[c];
            }
            grad[slot.bias_offset + r] += gz[r];
        }
        let mut ga = vec![0.0; slot.cols];
        for r in 0..slot.rows {
            let base = slot.weight_offset + r * slot.cols;
            for c in 0..slot.cols {
                ga[c] += theta[base + c] * gz[r];
            }
        }
        if l == 0 {
            return Ok((grad, ga));
        }
        gz = ga
            .iter()
            .zip(&cache.pre[l - 1])
            .map(|(g, &z)| g * spec.activation.apply(z).1)
            .collect();
    }
    unreachable!("an MLP has at least one layer")
}

/// Forward-mode product `(y, ∂y/∂x · v)`.
pub fn mlp_jvp(spec: &MlpSpec, theta: &[f64], x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(spec, theta, x)?;
    shape_check("tangent", spec.input_dim(), v.len())?;
    let layers = spec.layers();
    let mut a = x.to_vec();
    let mut t = v.to_vec();
    let mut z = Vec::new();
    for (l, slot) in layers.iter().enumerate() {
        affine(theta, *slot, &a, &mut z);
        let mut tz = vec![0.0; slot.rows];
        for (r, tzr) in tz.iter_mut().enumerate() {
            let base = slot.weight_offset + r * slot.cols;
            *tzr = (0..slot.cols).map(|c| theta[base + c] * t[c]).sum();
        }
        if l + 1 < layers.len() {
            let mut next = Vec::with_capacity(slot.rows);
            t.clear();
            for (zr, tzr) in z.iter().zip(&tz) {
                let (val, d) = spec.activation.apply(*zr);
                next.push(val);
                t.push(d * tzr);
            }
            a = next;
        } else {
            let y = wrap(&spec.wrapper, &z);
            let ty = wrap_jvp(&spec.wrapper, &z, &y, &tz);
            return Ok((y, ty));
        }
    }
    unreachable!("an MLP has at least one layer")
}
