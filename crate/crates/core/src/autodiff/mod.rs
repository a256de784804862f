//! Scalar computational graphs with forward and reverse sweeps.
//!
//! A [`Graph`] is a topologically ordered list of [`Node`]s. The first
//! `input_count` nodes are the arguments; every other node applies one
//! elementary operation to one or two earlier nodes. All derivative
//! quantities are computed by sweeping this list:
//!
//! | sweep | direction | result |
//! |-------|-----------|--------|
//! | [`evaluate`] | forward | `f(x)` |
//! | [`forward_jvp`] | forward | `f(x)`, `D_v f(x)` |
//! | [`reverse_grad`] | forward + reverse | `∇f(x)` |
//! | [`reverse_vjp`] | forward + reverse | `uᵀ ∇f(x)` for vector outputs |
//! | [`forward_bilinear_hess`] | forward (second order) | `uᵀ ∇²f(x) v` |
//! | [`reverse_hvp`] | forward + reverse (second order) | `∇²f(x) v` |
//!
//! Graphs can be built programmatically with [`GraphBuilder`] or parsed from
//! the prefix expression format in [`parse`].

mod parse;
mod sweep;
mod transform;

pub use parse::{parse, parse_multi};
pub use sweep::{
    evaluate, forward_bilinear_hess, forward_jvp, reverse_grad, reverse_hvp, reverse_vjp,
    SweepBuffers,
};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Elementary operation applied at a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Input,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    /// `c · a`
    Scale(f64),
    /// `a + c`
    Shift(f64),
    Sin,
    Cos,
    Exp,
    Log,
    Erf,
    Relu,
    Sigmoid,
    Tanh,
    /// `max(0, a − c)`
    ReluShift(f64),
    /// `a^n`
    Powi(i32),
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Input => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Scale(_) => "scale",
            Op::Shift(_) => "shift",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Erf => "erf",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::ReluShift(_) => "relu_shift",
            Op::Powi(_) => "pow",
        }
    }

    fn constant(self) -> Option<f64> {
        match self {
            Op::Scale(c) | Op::Shift(c) | Op::ReluShift(c) => Some(c),
            Op::Powi(n) => Some(n as f64),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub op: Op,
    /// Parent indices; only the first `op.arity()` entries are meaningful.
    pub parents: [NodeId; 2],
}

impl Node {
    pub fn parents(&self) -> &[NodeId] {
        &self.parents[..self.op.arity()]
    }
}

/// Immutable, validated computational graph.
#[derive(Clone, Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    input_count: usize,
    outputs: Vec<NodeId>,
}

impl Graph {
    /// Validates topological order, arities and constants.
    pub fn new(nodes: Vec<Node>, input_count: usize, outputs: Vec<NodeId>) -> Result<Self> {
        if nodes.len() < input_count {
            return Err(Error::Argument("fewer nodes than inputs".into()));
        }
        for (j, node) in nodes.iter().enumerate() {
            let is_input = j < input_count;
            if is_input != (node.op == Op::Input) {
                return Err(Error::Argument(format!(
                    "node {j}: inputs must occupy exactly the first {input_count} slots"
                )));
            }
            if let Some(c) = node.op.constant() {
                if !c.is_finite() {
                    return Err(Error::Argument(format!("node {j}: non-finite constant")));
                }
            }
            for &p in node.parents() {
                if p >= j {
                    return Err(Error::Argument(format!(
                        "node {j}: parent {p} violates topological order"
                    )));
                }
            }
        }
        if outputs.is_empty() {
            return Err(Error::Argument("graph has no outputs".into()));
        }
        if let Some(&bad) = outputs.iter().find(|&&o| o >= nodes.len()) {
            return Err(Error::Argument(format!("output index {bad} out of range")));
        }
        Ok(Self {
            nodes,
            input_count,
            outputs,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    /// Index of the (first) result node.
    pub fn output_index(&self) -> NodeId {
        self.outputs[0]
    }

    pub(crate) fn scalar_output(&self) -> Result<NodeId> {
        if self.outputs.len() != 1 {
            return Err(Error::Shape(format!(
                "operation needs a scalar output, graph has {}",
                self.outputs.len()
            )));
        }
        Ok(self.outputs[0])
    }

    /// Graph computing `D_v f` (for every output of `self`) as a function of
    /// the same inputs. Built by forward-mode symbolic differentiation, so
    /// non-smooth ops (`relu`, `relu_shift`) are rejected.
    pub fn tangent_graph(&self, v: &[f64]) -> Result<Graph> {
        crate::error::shape_check("tangent direction", self.input_count, v.len())?;
        let mut b = GraphBuilder::from_graph(self);
        let tangents = b.push_tangents(self.outputs(), v)?;
        let outs = tangents
            .into_iter()
            .map(|t| b.materialize(t))
            .collect::<Vec<_>>();
        b.finish(outs)
    }
}

/// Linear combination placeholder used while emitting tangent nodes:
/// an exactly-zero tangent, a constant, or a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lin {
    Zero,
    Const(f64),
    Node(NodeId),
}

/// Incremental graph construction.
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    input_count: usize,
}

impl GraphBuilder {
    pub fn new(input_count: usize) -> Self {
        let nodes = (0..input_count)
            .map(|_| Node {
                op: Op::Input,
                parents: [0, 0],
            })
            .collect();
        Self { nodes, input_count }
    }

    pub fn from_graph(graph: &Graph) -> Self {
        Self {
            nodes: graph.nodes.clone(),
            input_count: graph.input_count,
        }
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&self, i: usize) -> NodeId {
        assert!(i < self.input_count, "input {i} out of range");
        i
    }

    pub fn unary(&mut self, op: Op, a: NodeId) -> NodeId {
        debug_assert_eq!(op.arity(), 1);
        self.nodes.push(Node {
            op,
            parents: [a, a],
        });
        self.nodes.len() - 1
    }

    pub fn binary(&mut self, op: Op, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(op.arity(), 2);
        self.nodes.push(Node {
            op,
            parents: [a, b],
        });
        self.nodes.len() - 1
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Div, a, b)
    }

    pub fn scale(&mut self, c: f64, a: NodeId) -> NodeId {
        self.unary(Op::Scale(c), a)
    }

    pub fn shift(&mut self, c: f64, a: NodeId) -> NodeId {
        self.unary(Op::Shift(c), a)
    }

    /// A node holding the constant `c` (computed as `0·x₁ + c`).
    pub fn constant(&mut self, c: f64) -> NodeId {
        assert!(self.input_count > 0, "constants need at least one input");
        let z = self.scale(0.0, 0);
        self.shift(c, z)
    }

    /// Left-associative sum of one or more nodes.
    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        let (&first, rest) = terms.split_first().expect("sum of no terms");
        rest.iter().fold(first, |acc, &t| self.add(acc, t))
    }

    /// Left-associative product of one or more nodes.
    pub fn product(&mut self, factors: &[NodeId]) -> NodeId {
        let (&first, rest) = factors.split_first().expect("product of no factors");
        rest.iter().fold(first, |acc, &t| self.mul(acc, t))
    }

    /// Turns a [`Lin`] into a node, emitting a constant node when needed.
    pub fn materialize(&mut self, t: Lin) -> NodeId {
        match t {
            Lin::Zero => self.constant(0.0),
            Lin::Const(c) => self.constant(c),
            Lin::Node(n) => n,
        }
    }

    pub fn finish(self, outputs: Vec<NodeId>) -> Result<Graph> {
        Graph::new(self.nodes, self.input_count, outputs)
    }
}
