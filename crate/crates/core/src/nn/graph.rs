use super::{Activation, MlpSpec, Wrapper};
use crate::autodiff::{Graph, GraphBuilder, NodeId, Op};
use crate::error::{Error, Result};

fn activate(b: &mut GraphBuilder, act: Activation, z: NodeId) -> Result<NodeId> {
    Ok(match act {
        Activation::Identity => z,
        Activation::Sigmoid => b.unary(Op::Sigmoid, z),
        Activation::Tanh => b.unary(Op::Tanh, z),
        Activation::Relu => b.unary(Op::Relu, z),
        Activation::Gelu => {
            let half = b.scale(0.5, z);
            let e = b.unary(Op::Erf, half);
            let one_plus = b.shift(1.0, e);
            b.mul(half, one_plus)
        }
        Activation::Swish { beta } => {
            let bz = b.scale(beta, z);
            let s = b.unary(Op::Sigmoid, bz);
            b.mul(z, s)
        }
        Activation::Elu | Activation::Celu { .. } | Activation::Swiglu { .. } => {
            return Err(Error::Capability(format!(
                "{act:?} has no smooth expression in the elementary op set"
            )))
        }
    })
}

/// Computational graph of the network with inputs `(x₁..x_{d₀}, θ₁..θ_P)`
/// and one output per network output.
pub fn mlp_graph(spec: &MlpSpec) -> Result<Graph> {
    spec.validate()?;
    let d0 = spec.input_dim();
    let mut b = GraphBuilder::new(d0 + spec.param_count());
    let param = |i: usize| d0 + i;
    let layers = spec.layers();
    let mut acts: Vec<NodeId> = (0..d0).collect();
    let mut z = Vec::new();
    for (l, slot) in layers.iter().enumerate() {
        z.clear();
        for r in 0..slot.rows {
            let terms: Vec<NodeId> = (0..slot.cols)
                .map(|c| b.mul(param(slot.weight_offset + r * slot.cols + c), acts[c]))
                .collect();
            let s = b.sum(&terms);
            z.push(b.add(s, param(slot.bias_offset + r)));
        }
        if l + 1 < layers.len() {
            acts = z
                .iter()
                .map(|&n| activate(&mut b, spec.activation, n))
                .collect::<Result<_>>()?;
        }
    }
    let outputs: Vec<NodeId> = match &spec.wrapper {
        Wrapper::None => z,
        Wrapper::Sigmoid => z.iter().map(|&n| b.unary(Op::Sigmoid, n)).collect(),
        Wrapper::Tanh => z.iter().map(|&n| b.unary(Op::Tanh, n)).collect(),
        Wrapper::Nonneg => z
            .iter()
            .map(|&n| {
                let sq = b.unary(Op::Powi(2), n);
                b.scale(0.5, sq)
            })
            .collect(),
        Wrapper::Box { a, b: hi } => z
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let s = b.unary(Op::Sigmoid, n);
                let scaled = b.scale(hi[i] - a[i], s);
                b.shift(a[i], scaled)
            })
            .collect(),
        Wrapper::Softmax => {
            let e: Vec<NodeId> = z.iter().map(|&n| b.unary(Op::Exp, n)).collect();
            let total = b.sum(&e);
            e.iter().map(|&n| b.div(n, total)).collect()
        }
    };
    b.finish(outputs)
}
