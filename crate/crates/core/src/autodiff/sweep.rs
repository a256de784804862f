use super::{Graph, NodeId, Op};
use crate::error::{shape_check, Error, Result};

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Local first and second partials of one elementary op.
///
/// `d[0] = ∂x_i/∂x_j`, `d[1] = ∂x_i/∂x_k`; `h = (∂²/∂x_j², ∂²/∂x_j∂x_k, ∂²/∂x_k²)`.
/// For unary ops only `d[0]` and `h[0]` are used.
#[derive(Clone, Copy, Debug, Default)]
struct Local {
    d: [f64; 2],
    h: [f64; 3],
}

fn apply(op: Op, a: f64, b: f64, node: NodeId) -> Result<f64> {
    let domain = |what: &str| Err(Error::Domain(format!("node {node} ({}): {what}", op.name())));
    let value = match op {
        Op::Input => unreachable!("inputs are seeded, not applied"),
        Op::Add => a + b,
        Op::Sub => a - b,
        Op::Mul => a * b,
        Op::Div => {
            if b == 0.0 {
                return domain("division by zero");
            }
            a / b
        }
        Op::Neg => -a,
        Op::Scale(c) => c * a,
        Op::Shift(c) => a + c,
        Op::Sin => a.sin(),
        Op::Cos => a.cos(),
        Op::Exp => a.exp(),
        Op::Log => {
            if a <= 0.0 {
                return domain("logarithm of a non-positive value");
            }
            a.ln()
        }
        Op::Erf => {
            if a.is_nan() {
                return domain("erf of NaN");
            }
            libm::erf(a)
        }
        Op::Relu => a.max(0.0),
        Op::Sigmoid => 1.0 / (1.0 + (-a).exp()),
        Op::Tanh => a.tanh(),
        Op::ReluShift(c) => (a - c).max(0.0),
        Op::Powi(n) => {
            if n < 0 && a == 0.0 {
                return domain("negative power of zero");
            }
            a.powi(n)
        }
    };
    if !value.is_finite() {
        return domain("non-finite result");
    }
    Ok(value)
}

/// ReLU has second derivative 0 everywhere, including the kink, and first
/// derivative 0 at the kink.
fn local(op: Op, a: f64, b: f64, f: f64) -> Local {
    let unary = |d: f64, h: f64| Local {
        d: [d, 0.0],
        h: [h, 0.0, 0.0],
    };
    match op {
        Op::Input => Local::default(),
        Op::Add => Local {
            d: [1.0, 1.0],
            h: [0.0; 3],
        },
        Op::Sub => Local {
            d: [1.0, -1.0],
            h: [0.0; 3],
        },
        Op::Mul => Local {
            d: [b, a],
            h: [0.0, 1.0, 0.0],
        },
        Op::Div => Local {
            d: [1.0 / b, -a / (b * b)],
            h: [0.0, -1.0 / (b * b), 2.0 * a / (b * b * b)],
        },
        Op::Neg => unary(-1.0, 0.0),
        Op::Scale(c) => unary(c, 0.0),
        Op::Shift(_) => unary(1.0, 0.0),
        Op::Sin => unary(a.cos(), -a.sin()),
        Op::Cos => unary(-a.sin(), -a.cos()),
        Op::Exp => unary(f, f),
        Op::Log => unary(1.0 / a, -1.0 / (a * a)),
        Op::Erf => {
            let g = TWO_OVER_SQRT_PI * (-a * a).exp();
            unary(g, -2.0 * a * g)
        }
        Op::Relu => unary(if a > 0.0 { 1.0 } else { 0.0 }, 0.0),
        Op::ReluShift(c) => unary(if a > c { 1.0 } else { 0.0 }, 0.0),
        Op::Sigmoid => {
            let s1 = f * (1.0 - f);
            unary(s1, s1 * (1.0 - 2.0 * f))
        }
        Op::Tanh => {
            let t1 = 1.0 - f * f;
            unary(t1, -2.0 * f * t1)
        }
        Op::Powi(n) => {
            let nf = n as f64;
            let d = if n == 0 { 0.0 } else { nf * a.powi(n - 1) };
            let h = if n == 0 || n == 1 {
                0.0
            } else {
                nf * (nf - 1.0) * a.powi(n - 2)
            };
            unary(d, h)
        }
    }
}

/// Per-node scratch for one call: values `x_j`, tangents `D_v x_j`,
/// adjoints `y_j = ∂f/∂x_j` and second-order adjoints `z_j = ∂(D_v f)/∂x_j`.
#[derive(Clone, Debug, Default)]
pub struct SweepBuffers {
    pub values: Vec<f64>,
    pub tangents: Vec<f64>,
    pub adjoints: Vec<f64>,
    pub hvp_adjoints: Vec<f64>,
    pub has_values: bool,
    pub has_tangents: bool,
    pub has_adjoints: bool,
    pub has_hvp_adjoints: bool,
}

impl SweepBuffers {
    pub fn new(graph: &Graph) -> Self {
        let n = graph.len();
        Self {
            values: vec![0.0; n],
            tangents: vec![0.0; n],
            adjoints: vec![0.0; n],
            hvp_adjoints: vec![0.0; n],
            ..Default::default()
        }
    }

    fn parent_values(&self, graph: &Graph, j: NodeId) -> (f64, f64) {
        let node = &graph.nodes[j];
        let a = self.values[node.parents[0]];
        let b = if node.op.arity() == 2 {
            self.values[node.parents[1]]
        } else {
            0.0
        };
        (a, b)
    }

    fn local_at(&self, graph: &Graph, j: NodeId) -> Local {
        let (a, b) = self.parent_values(graph, j);
        local(graph.nodes[j].op, a, b, self.values[j])
    }

    /// Forward sweep of values.
    pub fn forward(&mut self, graph: &Graph, x: &[f64]) -> Result<()> {
        shape_check("input", graph.input_count, x.len())?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("input {i} is not finite")));
        }
        self.values[..x.len()].copy_from_slice(x);
        for j in graph.input_count..graph.len() {
            let (a, b) = self.parent_values(graph, j);
            self.values[j] = apply(graph.nodes[j].op, a, b, j)?;
        }
        self.has_values = true;
        Ok(())
    }

    /// Forward sweep of `D_v x_j`; requires values.
    pub fn forward_tangent(&mut self, graph: &Graph, v: &[f64]) -> Result<()> {
        assert!(self.has_values, "tangent sweep needs values");
        shape_check("direction", graph.input_count, v.len())?;
        self.tangents[..v.len()].copy_from_slice(v);
        for j in graph.input_count..graph.len() {
            self.tangents[j] = self.tangent_at(graph, j, &self.tangents);
        }
        self.has_tangents = true;
        Ok(())
    }

    fn tangent_at(&self, graph: &Graph, j: NodeId, tangents: &[f64]) -> f64 {
        let node = &graph.nodes[j];
        let loc = self.local_at(graph, j);
        node.parents()
            .iter()
            .zip(loc.d)
            .map(|(&p, d)| d * tangents[p])
            .sum()
    }

    /// Reverse sweep of adjoints seeded with `seeds` at the given nodes.
    pub fn reverse(&mut self, graph: &Graph, seeds: &[(NodeId, f64)]) {
        assert!(self.has_values, "reverse sweep needs values");
        self.adjoints.iter_mut().for_each(|y| *y = 0.0);
        for &(node, w) in seeds {
            self.adjoints[node] += w;
        }
        for i in (graph.input_count..graph.len()).rev() {
            let yi = self.adjoints[i];
            if yi == 0.0 {
                continue;
            }
            let loc = self.local_at(graph, i);
            let node = graph.nodes[i];
            for (slot, &p) in node.parents().iter().enumerate() {
                self.adjoints[p] += yi * loc.d[slot];
            }
        }
        self.has_adjoints = true;
    }

    /// Joint reverse sweep of `y_j` and `z_j` for a scalar output, seeded with
    /// `y_N = 1`, `z_N = 0`. Requires values and tangents.
    ///
    /// `z_j = Σ_{i ∈ children(j)} [ z_i ∂x_i/∂x_j + y_i D_v(∂x_i/∂x_j) ]`, where
    /// `D_v(∂x_i/∂x_j)` comes from the tabulated second partials of the op.
    pub fn reverse_second(&mut self, graph: &Graph, output: NodeId) {
        assert!(self.has_values && self.has_tangents);
        self.adjoints.iter_mut().for_each(|y| *y = 0.0);
        self.hvp_adjoints.iter_mut().for_each(|z| *z = 0.0);
        self.adjoints[output] = 1.0;
        for i in (graph.input_count..graph.len()).rev() {
            let (yi, zi) = (self.adjoints[i], self.hvp_adjoints[i]);
            if yi == 0.0 && zi == 0.0 {
                continue;
            }
            let node = graph.nodes[i];
            let loc = self.local_at(graph, i);
            let dv = self.parent_partial_tangents(&node, &loc, &self.tangents);
            for (slot, &p) in node.parents().iter().enumerate() {
                self.adjoints[p] += yi * loc.d[slot];
                self.hvp_adjoints[p] += zi * loc.d[slot] + yi * dv[slot];
            }
        }
        self.has_adjoints = true;
        self.has_hvp_adjoints = true;
    }

    /// `D_w(∂x_i/∂x_j)` and `D_w(∂x_i/∂x_k)` given parent tangents `D_w`.
    fn parent_partial_tangents(&self, node: &super::Node, loc: &Local, tan: &[f64]) -> [f64; 2] {
        if node.op.arity() == 1 {
            [loc.h[0] * tan[node.parents[0]], 0.0]
        } else {
            let (tj, tk) = (tan[node.parents[0]], tan[node.parents[1]]);
            [loc.h[0] * tj + loc.h[1] * tk, loc.h[1] * tj + loc.h[2] * tk]
        }
    }
}

/// Forward sweep: `f(x)` together with the filled buffers.
pub fn evaluate(graph: &Graph, x: &[f64]) -> Result<(f64, SweepBuffers)> {
    let mut buf = SweepBuffers::new(graph);
    buf.forward(graph, x)?;
    Ok((buf.values[graph.output_index()], buf))
}

/// Forward mode: `(f(x), D_v f(x))` for the first output.
pub fn forward_jvp(graph: &Graph, x: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    let mut buf = SweepBuffers::new(graph);
    buf.forward(graph, x)?;
    buf.forward_tangent(graph, v)?;
    let out = graph.output_index();
    Ok((buf.values[out], buf.tangents[out]))
}

/// Reverse mode: `(f(x), ∇f(x))` for a scalar-output graph.
pub fn reverse_grad(graph: &Graph, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let out = graph.scalar_output()?;
    let mut buf = SweepBuffers::new(graph);
    buf.forward(graph, x)?;
    buf.reverse(graph, &[(out, 1.0)]);
    Ok((
        buf.values[out],
        buf.adjoints[..graph.input_count].to_vec(),
    ))
}

/// Vector-Jacobian product `Σ_k u_k ∇f_k(x)` for a graph with `m` outputs.
pub fn reverse_vjp(graph: &Graph, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    shape_check("cotangent", graph.outputs.len(), u.len())?;
    if u.iter().any(|w| !w.is_finite()) {
        return Err(Error::Domain("cotangent is not finite".into()));
    }
    let mut buf = SweepBuffers::new(graph);
    buf.forward(graph, x)?;
    let seeds: Vec<(NodeId, f64)> = graph.outputs.iter().copied().zip(u.iter().copied()).collect();
    buf.reverse(graph, &seeds);
    Ok(buf.adjoints[..graph.input_count].to_vec())
}

/// Forward second-order sweep: `uᵀ ∇²f(x) v`.
///
/// Each node carries `D_u x_i`, `D_v x_i` and `D_uv x_i`; the latter is
/// `Σ_j [ D_v(∂x_i/∂x_j) D_u x_j + ∂x_i/∂x_j D_uv x_j ]` over the parents.
pub fn forward_bilinear_hess(graph: &Graph, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let out = graph.scalar_output()?;
    shape_check("u", graph.input_count, u.len())?;
    shape_check("v", graph.input_count, v.len())?;
    let mut buf = SweepBuffers::new(graph);
    buf.forward(graph, x)?;
    let n = graph.len();
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut duv = vec![0.0; n];
    du[..u.len()].copy_from_slice(u);
    dv[..v.len()].copy_from_slice(v);
    for i in graph.input_count..n {
        let node = graph.nodes[i];
        let loc = buf.local_at(graph, i);
        let dv_partials = buf.parent_partial_tangents(&node, &loc, &dv);
        let mut acc_u = 0.0;
        let mut acc_v = 0.0;
        let mut acc_uv = 0.0;
        for (slot, &p) in node.parents().iter().enumerate() {
            acc_u += loc.d[slot] * du[p];
            acc_v += loc.d[slot] * dv[p];
            acc_uv += dv_partials[slot] * du[p] + loc.d[slot] * duv[p];
        }
        du[i] = acc_u;
        dv[i] = acc_v;
        duv[i] = acc_uv;
    }
    Ok(duv[out])
}

/// Hessian-vector product `∇²f(x) v` by a forward tangent sweep followed by
/// the joint reverse sweep of `(y, z)`.
pub fn reverse_hvp(graph: &Graph, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let out = graph.scalar_output()?;
    let mut buf = SweepBuffers::new(graph);
    buf.forward(graph, x)?;
    buf.forward_tangent(graph, v)?;
    buf.reverse_second(graph, out);
    Ok(buf.hvp_adjoints[..graph.input_count].to_vec())
}
