//! Stochastic optimizer steps as pure state transitions, plus the Muon
//! orthogonalizer.
//!
//! Gradient estimates come from the caller; [`stochastic_step`] never
//! samples. Buffers start at zero and the step counter at `k = 1`, so Adam's
//! bias corrections at step `k` divide by `1 − β^k`.

mod muon;

pub use muon::{muon_step, newton_schulz, MatrixSlice, MuonConfig, QUINTIC};

use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::objectives::SgFamily;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Momentum,
    Adagrad,
    Rmsprop,
    Adam,
    Adamw,
    Muon,
}

/// Step-size rule: `α_k = α` or `α_k = α/(k + k₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Schedule {
    Constant,
    Harmonic { k0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub method: Method,
    pub alpha: f64,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay for AdamW, and for the non-matrix entries under Muon.
    pub weight_decay: f64,
    pub muon: MuonConfig,
}

impl Hyper {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: 1e-3,
            schedule: Schedule::Constant,
            beta1: 0.9,
            beta2: if method == Method::Rmsprop { 0.99 } else { 0.999 },
            eps: 1e-8,
            weight_decay: match method {
                Method::Adamw | Method::Muon => 0.01,
                _ => 0.0,
            },
            muon: MuonConfig::default(),
        }
    }

    /// Reads `{"method": "adam", "alpha": 1e-3, "beta1": 0.9, ...}`. Missing
    /// keys take the method defaults; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: HyperJson = serde_json::from_str(text)?;
        let mut h = Hyper::new(raw.method);
        if let Some(v) = raw.alpha {
            h.alpha = v;
            h.muon.alpha = v;
        }
        if let Some(k0) = raw.k0 {
            h.schedule = Schedule::Harmonic { k0 };
        }
        h.beta1 = raw.beta1.unwrap_or(h.beta1);
        h.beta2 = raw.beta2.unwrap_or(h.beta2);
        h.eps = raw.eps.unwrap_or(h.eps);
        h.weight_decay = raw.weight_decay.unwrap_or(h.weight_decay);
        h.muon.momentum = raw.mu.unwrap_or(h.muon.momentum);
        h.muon.weight_decay = raw.muon_weight_decay.unwrap_or(h.muon.weight_decay);
        h.muon.coeffs = raw.coeffs.unwrap_or(h.muon.coeffs);
        h.muon.ns_iters = raw.ns_iters.unwrap_or(h.muon.ns_iters);
        h.muon.ns_eps = raw.ns_eps.unwrap_or(h.muon.ns_eps);
        h.muon.shape_scale = raw.shape_scale.unwrap_or(h.muon.shape_scale);
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        let ok = self.alpha > 0.0
            && unit(self.beta1)
            && unit(self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && unit(self.muon.momentum)
            && match self.schedule {
                Schedule::Constant => true,
                Schedule::Harmonic { k0 } => k0 > -1.0,
            };
        if !ok {
            return Err(Error::Argument(format!("invalid hyperparameters {self:?}")));
        }
        Ok(())
    }

    /// `α_k` for the current counter.
    pub fn step_size(&self, k: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.alpha,
            Schedule::Harmonic { k0 } => self.alpha / (k as f64 + k0),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperJson {
    method: Method,
    alpha: Option<f64>,
    k0: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    eps: Option<f64>,
    #[serde(alias = "lambda")]
    weight_decay: Option<f64>,
    mu: Option<f64>,
    muon_weight_decay: Option<f64>,
    coeffs: Option<[f64; 3]>,
    ns_iters: Option<usize>,
    ns_eps: Option<f64>,
    shape_scale: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochState {
    pub hyper: Hyper,
    pub k: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Momentum matrices, one per `hyper.muon.matrices` entry.
    pub muon_buffers: Vec<nalgebra::DMatrix<f64>>,
}

impl StochState {
    pub fn new(hyper: Hyper, n: usize) -> Result<Self> {
        hyper.validate()?;
        let muon_buffers = if hyper.method == Method::Muon {
            hyper.muon.validate(n)?;
            hyper
                .muon
                .matrices
                .iter()
                .map(|s| nalgebra::DMatrix::zeros(s.rows, s.cols))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self { hyper, k: 1, m: vec![0.0; n], v: vec![0.0; n], muon_buffers })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }
}

/// Applies one update of the configured method, returning `(θ′, state′)`.
/// A non-finite gradient entry is an error and leaves the input untouched.
pub fn stochastic_step(state: &StochState, theta: &[f64], g: &[f64]) -> Result<(Vec<f64>, StochState)> {
    shape_check("parameters", state.dim(), theta.len())?;
    shape_check("gradient", state.dim(), g.len())?;
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iter: state.k,
            what: format!("gradient entry {i}"),
            last_iterate: theta.to_vec(),
        });
    }
    let h = &state.hyper;
    let mut next = state.clone();
    let alpha = h.step_size(state.k);
    let mut x = theta.to_vec();
    match h.method {
        Method::Sgd => {
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi -= alpha * gi;
            }
        }
        Method::Momentum => {
            for ((xi, gi), mi) in x.iter_mut().zip(g).zip(next.m.iter_mut()) {
                *mi = h.beta1 * *mi + (1.0 - h.beta1) * gi;
                *xi -= alpha * *mi;
            }
        }
        Method::Adagrad => {
            for ((xi, gi), vi) in x.iter_mut().zip(g).zip(next.v.iter_mut()) {
                *vi += gi * gi;
                *xi -= alpha * gi / (vi.sqrt() + h.eps);
            }
        }
        Method::Rmsprop => {
            for ((xi, gi), vi) in x.iter_mut().zip(g).zip(next.v.iter_mut()) {
                *vi = h.beta2 * *vi + (1.0 - h.beta2) * gi * gi;
                *xi -= alpha * gi / (vi.sqrt() + h.eps);
            }
        }
        Method::Adam | Method::Adamw => {
            let decay = if h.method == Method::Adamw { h.weight_decay } else { 0.0 };
            adam_entries(&mut next, &mut x, g, alpha, decay, 0..theta.len());
        }
        Method::Muon => {
            let slices = &h.muon.matrices;
            let weights: Vec<_> = slices.iter().map(|s| s.read(theta)).collect();
            let grads: Vec<_> = slices.iter().map(|s| s.read(g)).collect();
            let muon_alpha = h.muon.alpha * alpha / h.alpha;
            let (w, bufs) = muon::muon_step_scaled(&h.muon, muon_alpha, &weights, &grads, &state.muon_buffers)?;
            let mut covered = vec![false; theta.len()];
            for (s, w) in slices.iter().zip(&w) {
                s.write(w, &mut x);
                covered[s.range()].iter_mut().for_each(|c| *c = true);
            }
            next.muon_buffers = bufs;
            let rest = (0..theta.len()).filter(|i| !covered[*i]).collect::<Vec<_>>();
            adam_entries(&mut next, &mut x, g, alpha, h.weight_decay, rest);
        }
    }
    next.k += 1;
    Ok((x, next))
}

fn adam_entries(
    state: &mut StochState,
    x: &mut [f64],
    g: &[f64],
    alpha: f64,
    decay: f64,
    idx: impl IntoIterator<Item = usize>,
) {
    let h = &state.hyper;
    let (b1, b2, eps) = (h.beta1, h.beta2, h.eps);
    let k = state.k as i32;
    let c1 = 1.0 - b1.powi(k);
    let c2 = 1.0 - b2.powi(k);
    for i in idx {
        let m = b1 * state.m[i] + (1.0 - b1) * g[i];
        let v = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
        state.m[i] = m;
        state.v[i] = v;
        let mhat = m / c1;
        let vhat = v / c2;
        x[i] = x[i] - alpha * decay * x[i] - alpha * mhat / (vhat.sqrt() + eps);
    }
}

/// Basic stochastic gradient on the averaged family `F_N`: each step samples
/// one component uniformly and moves along its gradient. Returns
/// `x_0, …, x_iters`.
pub fn sg_trajectory(family: &SgFamily, x0: f64, hyper: &Hyper, iters: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::Rng as _;
    let mut rng = rng::seeded(seed);
    let mut state = StochState::new(hyper.clone(), 1)?;
    let mut x = vec![x0];
    let mut path = Vec::with_capacity(iters + 1);
    path.push(x0);
    for _ in 0..iters {
        let i = rng.random_range(0..family.len());
        let g = [family.component_grad(i, x[0])];
        let (nx, ns) = stochastic_step(&state, &x, &g)?;
        x = nx;
        state = ns;
        path.push(x[0]);
    }
    Ok(path)
}
