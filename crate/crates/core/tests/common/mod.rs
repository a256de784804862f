#![allow(dead_code)]

use mfdl::autodiff::{reverse_grad, Graph, GraphBuilder, NodeId, Op};
use mfdl::nn::{mlp_graph, Activation, MlpSpec, Wrapper};
use mfdl::rng;
use rand::Rng as _;

/// Random scalar graph over `inputs` variables with `extra` composite nodes.
/// Every operation keeps values in a moderate range so finite differences
/// stay meaningful; the output is the sum of all non-input nodes.
pub fn random_graph(seed: u64, inputs: usize, extra: usize) -> Graph {
    let mut g = rng::seeded(seed);
    let mut b = GraphBuilder::new(inputs);
    let mut pool: Vec<NodeId> = (0..inputs).map(|i| b.input(i)).collect();
    for _ in 0..extra {
        let a = pool[g.random_range(0..pool.len())];
        let c = pool[g.random_range(0..pool.len())];
        let node = match g.random_range(0..13) {
            0 => b.add(a, c),
            1 => b.sub(a, c),
            2 => {
                let (ta, tc) = (b.unary(Op::Tanh, a), b.unary(Op::Tanh, c));
                b.mul(ta, tc)
            }
            3 => b.unary(Op::Sin, a),
            4 => b.unary(Op::Cos, a),
            5 => b.unary(Op::Tanh, a),
            6 => b.unary(Op::Sigmoid, a),
            7 => {
                let t = b.unary(Op::Tanh, a);
                b.unary(Op::Exp, t)
            }
            8 => {
                let s = b.unary(Op::Sin, a);
                let p = b.shift(1.5, s);
                b.unary(Op::Log, p)
            }
            9 => {
                let s = b.unary(Op::Cos, c);
                let den = b.shift(1.5, s);
                let t = b.unary(Op::Tanh, a);
                b.div(t, den)
            }
            10 => b.scale(g.random_range(-2.0..2.0), a),
            11 => {
                let t = b.unary(Op::Tanh, a);
                b.unary(Op::Powi(3), t)
            }
            _ => b.unary(Op::Erf, a),
        };
        pool.push(node);
    }
    let out = b.sum(&pool[inputs..]);
    b.finish(vec![out]).expect("valid graph")
}

pub fn random_point(seed: u64, n: usize) -> Vec<f64> {
    let mut g = rng::stream(seed, 1);
    (0..n).map(|_| g.random_range(-1.5..1.5)).collect()
}

/// Central differences of a scalar function.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub fn graph_fd_grad(g: &Graph, x: &[f64]) -> Vec<f64> {
    fd_grad(|p| reverse_grad(g, p).unwrap().0, x, 1e-5)
}

/// `(∇f(x + hv) − ∇f(x − hv)) / 2h`.
pub fn graph_fd_hvp(g: &Graph, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let shifted = |s: f64| {
        let p: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * b).collect();
        reverse_grad(g, &p).unwrap().1
    };
    let (gp, gm) = (shifted(h), shifted(-h));
    gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(floor, f64::max);
    diff / scale
}

const SMOOTH: [Activation; 5] = [
    Activation::Tanh,
    Activation::Sigmoid,
    Activation::Gelu,
    Activation::Elu,
    Activation::Swish { beta: 1.0 },
];

/// Small random smooth MLP spec.
pub fn random_mlp(seed: u64) -> MlpSpec {
    let mut g = rng::stream(seed, 7);
    let depth = g.random_range(1..=3);
    let mut widths = vec![g.random_range(1..=4)];
    for _ in 0..depth {
        widths.push(g.random_range(2..=8));
    }
    widths.push(g.random_range(1..=3));
    MlpSpec::new(widths, SMOOTH[g.random_range(0..SMOOTH.len())], Wrapper::None).unwrap()
}

/// Scalar graph `u · net(x; θ)` with inputs `(x, θ)`; `None` when an
/// activation has no elementary-op form.
pub fn weighted_mlp_graph(spec: &MlpSpec, u: &[f64]) -> Option<Graph> {
    let g = mlp_graph(spec).ok()?;
    let mut b = GraphBuilder::from_graph(&g);
    let terms: Vec<NodeId> = g.outputs().iter().zip(u).map(|(&o, &w)| b.scale(w, o)).collect();
    let out = b.sum(&terms);
    b.finish(vec![out]).ok()
}
