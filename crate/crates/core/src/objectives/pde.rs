//! Monte Carlo losses for the Poisson problem `−Δu = f` on `(0,1)^d` with
//! zero boundary values.
//!
//! The trial function is a scalar graph with inputs `(x₁..x_d, θ₁..θ_P)`.
//! For networks, [`PdeLoss::with_mlp`] multiplies the MLP output by
//! `Π x_i (1 − x_i)` so the boundary condition holds by construction.
//! Sample points are drawn once and frozen, so the loss is a deterministic
//! function of `θ`.

use super::Objective;
use crate::autodiff::{self, Graph, GraphBuilder, Op};
use crate::error::{shape_check, Error, Result};
use crate::nn::{mlp_graph, Activation, MlpSpec};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeKind {
    /// `(1/N) Σ |Δu(x_i) + f(x_i)|²`
    PinnPoisson,
    /// `(1/N) Σ [½|∇u(x_i)|² − f(x_i) u(x_i)]`
    DeepRitz,
}

#[derive(Clone, Debug)]
pub struct PdeLoss {
    kind: PdeKind,
    dim: usize,
    graph: Graph,
    /// Graph of `∂u/∂x_k` for each `k`; only built for the residual loss.
    partials: Vec<Graph>,
    samples: Vec<Vec<f64>>,
    source: Vec<f64>,
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

impl PdeLoss {
    /// Loss over an arbitrary trial graph whose first `dim` inputs are the
    /// spatial coordinates.
    pub fn from_graph(
        kind: PdeKind,
        graph: Graph,
        dim: usize,
        source: impl Fn(&[f64]) -> f64,
        sample_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Capability(format!("spatial dimension {dim} outside 1..=3")));
        }
        if graph.input_count() < dim || graph.outputs().len() != 1 {
            return Err(Error::Shape("trial graph needs scalar output and inputs (x, θ)".into()));
        }
        if sample_count == 0 {
            return Err(Error::Argument("need at least one sample point".into()));
        }
        if graph.nodes().iter().any(|n| matches!(n.op, Op::Relu | Op::ReluShift(_))) {
            return Err(Error::Precondition(
                "trial function uses ReLU; its Laplacian is not defined".into(),
            ));
        }
        let n_in = graph.input_count();
        let partials = match kind {
            PdeKind::PinnPoisson => (0..dim)
                .map(|k| graph.tangent_graph(&unit(n_in, k)))
                .collect::<Result<_>>()?,
            PdeKind::DeepRitz => Vec::new(),
        };
        let mut r = rng::seeded(seed);
        let samples: Vec<Vec<f64>> = (0..sample_count)
            .map(|_| (0..dim).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let source = samples.iter().map(|x| source(x)).collect();
        Ok(Self {
            kind,
            dim,
            graph,
            partials,
            samples,
            source,
        })
    }

    /// Loss for `u(x) = φ_θ(x) · Π x_i (1 − x_i)` with `φ_θ` a scalar MLP.
    pub fn with_mlp(
        kind: PdeKind,
        spec: &MlpSpec,
        source: impl Fn(&[f64]) -> f64,
        sample_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if spec.activation == Activation::Relu {
            return Err(Error::Precondition(
                "ReLU networks have no Laplacian; pick a C² activation".into(),
            ));
        }
        if spec.output_dim() != 1 {
            return Err(Error::Shape("trial network must have one output".into()));
        }
        let d = spec.input_dim();
        let net = mlp_graph(spec)?;
        let mut b = GraphBuilder::from_graph(&net);
        let mut out = net.output_index();
        for i in 0..d {
            let neg = b.unary(Op::Neg, i);
            let one_minus = b.shift(1.0, neg);
            let factor = b.mul(i, one_minus);
            out = b.mul(out, factor);
        }
        Self::from_graph(kind, b.finish(vec![out])?, d, source, sample_count, seed)
    }

    pub fn kind(&self) -> PdeKind {
        self.kind
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn trial_graph(&self) -> &Graph {
        &self.graph
    }

    fn point(&self, i: usize, theta: &[f64]) -> Vec<f64> {
        let mut z = self.samples[i].clone();
        z.extend_from_slice(theta);
        z
    }

    /// `u(x; θ)`.
    pub fn trial_value(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        shape_check("point", self.dim, x.len())?;
        let mut z = x.to_vec();
        z.extend_from_slice(theta);
        Ok(autodiff::evaluate(&self.graph, &z)?.0)
    }

    /// `Δu(x; θ)` as a sum of `d` second directional derivatives.
    pub fn laplacian(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        shape_check("point", self.dim, x.len())?;
        let mut z = x.to_vec();
        z.extend_from_slice(theta);
        self.laplacian_at(&z)
    }

    fn laplacian_at(&self, z: &[f64]) -> Result<f64> {
        let n = z.len();
        (0..self.dim)
            .map(|k| {
                let e = unit(n, k);
                autodiff::forward_bilinear_hess(&self.graph, z, &e, &e)
            })
            .sum()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        shape_check("parameter", self.graph.input_count() - self.dim, theta.len())
    }
}

impl Objective for PdeLoss {
    fn dim(&self) -> usize {
        self.graph.input_count() - self.dim
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let n = self.samples.len() as f64;
        let mut total = 0.0;
        for i in 0..self.samples.len() {
            let z = self.point(i, theta);
            total += match self.kind {
                PdeKind::PinnPoisson => (self.laplacian_at(&z)? + self.source[i]).powi(2),
                PdeKind::DeepRitz => {
                    let (u, g) = autodiff::reverse_grad(&self.graph, &z)?;
                    let gx2: f64 = g[..self.dim].iter().map(|v| v * v).sum();
                    0.5 * gx2 - self.source[i] * u
                }
            };
        }
        Ok(total / n)
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_theta(theta)?;
        let n = self.samples.len() as f64;
        let d = self.dim;
        let mut total = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for i in 0..self.samples.len() {
            let z = self.point(i, theta);
            match self.kind {
                PdeKind::PinnPoisson => {
                    let r = self.laplacian_at(&z)? + self.source[i];
                    total += r * r;
                    for (k, partial) in self.partials.iter().enumerate() {
                        // ∇_{(x,θ)} ∂²u/∂x_k² via the graph of ∂u/∂x_k
                        let h = autodiff::reverse_hvp(partial, &z, &unit(z.len(), k))?;
                        for (gj, hj) in grad.iter_mut().zip(&h[d..]) {
                            *gj += 2.0 * r * hj;
                        }
                    }
                }
                PdeKind::DeepRitz => {
                    let (u, g) = autodiff::reverse_grad(&self.graph, &z)?;
                    let gx2: f64 = g[..d].iter().map(|v| v * v).sum();
                    total += 0.5 * gx2 - self.source[i] * u;
                    let mut dir = vec![0.0; z.len()];
                    dir[..d].copy_from_slice(&g[..d]);
                    let h = autodiff::reverse_hvp(&self.graph, &z, &dir)?;
                    for j in 0..grad.len() {
                        grad[j] += h[d + j] - self.source[i] * g[d + j];
                    }
                }
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }
}
