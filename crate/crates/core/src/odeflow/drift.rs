use std::sync::OnceLock;

use crate::autodiff::{evaluate, parse_multi, reverse_grad, reverse_vjp, Graph, GraphBuilder, SweepBuffers};
use crate::error::{shape_check, Error, Result};
use crate::nn::{mlp_graph, MlpSpec};

/// Partial derivatives of a scalar quantity (or a cotangent-weighted drift)
/// split by argument.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftGrad {
    pub x: Vec<f64>,
    pub t: f64,
    pub theta: Vec<f64>,
}

/// Parametric vector field `f_θ(t, x)` backed by a computational graph with
/// inputs `(t, x₁..x_d, θ₁..θ_n)` (the `t` slot is absent for autonomous
/// fields) and `d` outputs.
#[derive(Debug)]
pub struct GraphDrift {
    graph: Graph,
    dim: usize,
    params: usize,
    time_input: bool,
    div: OnceLock<std::result::Result<Graph, String>>,
}

impl GraphDrift {
    pub fn new(graph: Graph, dim: usize, time_input: bool) -> Result<Self> {
        shape_check("drift outputs", dim, graph.outputs().len())?;
        let offset = dim + usize::from(time_input);
        let params = graph
            .input_count()
            .checked_sub(offset)
            .ok_or_else(|| Error::Shape(format!("graph has {} inputs, need at least {offset}", graph.input_count())))?;
        Ok(Self { graph, dim, params, time_input, div: OnceLock::new() })
    }

    /// Drift from prefix expressions, one per component. Variables are
    /// numbered `x1..` in the order `(t?, x, θ)`.
    pub fn parse(exprs: &[&str], params: usize, time_input: bool) -> Result<Self> {
        let inputs = exprs.len() + params + usize::from(time_input);
        Self::new(parse_multi(exprs, inputs)?, exprs.len(), time_input)
    }

    /// MLP drift. With `time_input` the first network input is `t`, so the
    /// widths start with `d + 1`.
    pub fn mlp(spec: &MlpSpec, time_input: bool) -> Result<Self> {
        let dim = spec.output_dim();
        shape_check("MLP input width", dim + usize::from(time_input), spec.input_dim())?;
        Self::new(mlp_graph(spec)?, dim, time_input)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_count(&self) -> usize {
        self.params
    }

    pub fn time_dependent(&self) -> bool {
        self.time_input
    }

    fn inputs(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        shape_check("state", self.dim, x.len())?;
        shape_check("parameters", self.params, theta.len())?;
        let mut z = Vec::with_capacity(self.graph.input_count());
        if self.time_input {
            z.push(t);
        }
        z.extend_from_slice(x);
        z.extend_from_slice(theta);
        Ok(z)
    }

    fn split(&self, full: Vec<f64>) -> DriftGrad {
        let off = usize::from(self.time_input);
        DriftGrad {
            t: if self.time_input { full[0] } else { 0.0 },
            x: full[off..off + self.dim].to_vec(),
            theta: full[off + self.dim..].to_vec(),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let z = self.inputs(t, x, theta)?;
        let mut buf = SweepBuffers::new(&self.graph);
        buf.forward(&self.graph, &z)?;
        Ok(self.graph.outputs().iter().map(|&o| buf.values[o]).collect())
    }

    /// `p ∂f/∂(t, x, θ)` for a row vector `p`.
    pub fn vjp(&self, t: f64, x: &[f64], theta: &[f64], p: &[f64]) -> Result<DriftGrad> {
        let z = self.inputs(t, x, theta)?;
        Ok(self.split(reverse_vjp(&self.graph, &z, p)?))
    }

    /// Graph of `∇·f = Σ_i D_{e_i} f_i`, built once on first use.
    fn div_graph(&self) -> Result<&Graph> {
        let built = self.div.get_or_init(|| {
            let off = usize::from(self.time_input);
            let mut b = GraphBuilder::from_graph(&self.graph);
            let mut terms = Vec::with_capacity(self.dim);
            for i in 0..self.dim {
                let mut e = vec![0.0; self.graph.input_count()];
                e[off + i] = 1.0;
                let tan = b.push_tangents(&[self.graph.outputs()[i]], &e).map_err(|e| e.to_string())?;
                terms.push(b.materialize(tan[0]));
            }
            let s = b.sum(&terms);
            b.finish(vec![s]).map_err(|e| e.to_string())
        });
        built.as_ref().map_err(|msg| Error::Capability(format!("divergence graph: {msg}")))
    }

    pub fn divergence(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<f64> {
        let z = self.inputs(t, x, theta)?;
        Ok(evaluate(self.div_graph()?, &z)?.0)
    }

    /// `(∇·f, ∂(∇·f)/∂(t, x, θ))`.
    pub fn divergence_grad(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<(f64, DriftGrad)> {
        let z = self.inputs(t, x, theta)?;
        let (v, g) = reverse_grad(self.div_graph()?, &z)?;
        Ok((v, self.split(g)))
    }
}
