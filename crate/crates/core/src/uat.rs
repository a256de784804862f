//! Constructive ReLU approximation on `[0,1]^d`: sawtooth compositions, the
//! dyadic square approximator, the product network, the bump partition of
//! unity and the local-Taylor assembly built from them.

use crate::autodiff::{Graph, GraphBuilder, Op};
use crate::error::{Error, Result};

fn unit_interval(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{x} is outside [0, 1]")))
    }
}

/// The hat map `g(x) = 2x` on `[0, ½]`, `2(1 − x)` on `[½, 1]`.
fn hat(x: f64) -> f64 {
    if x <= 0.5 {
        2.0 * x
    } else {
        2.0 * (1.0 - x)
    }
}

/// `g_s = g ∘ ⋯ ∘ g` (`s` times). Exact in binary floating point.
pub fn sawtooth(s: usize, x: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::Argument("sawtooth order must be at least 1".into()));
    }
    unit_interval(x)?;
    Ok((0..s).fold(x, |v, _| hat(v)))
}

/// `f_m(x) = x − Σ_{s=1}^m g_s(x)/4^s`, the piecewise-linear interpolant of
/// `x²` on the grid `j/2^m`.
pub fn square_approx(m: usize, x: f64) -> Result<f64> {
    unit_interval(x)?;
    let mut g = x;
    let mut out = x;
    let mut scale = 1.0;
    for _ in 0..m {
        g = hat(g);
        scale *= 0.25;
        out -= g * scale;
    }
    Ok(out)
}

/// `sup |x² − f_m(x)| = 2^{−(2m+2)}`.
pub fn square_error_bound(m: usize) -> f64 {
    0.25f64.powi(m as i32 + 1)
}

/// Smallest `m` whose square approximator is within `delta`.
pub fn square_depth(delta: f64) -> usize {
    let mut m = 0;
    while square_error_bound(m) > delta {
        m += 1;
    }
    m
}

/// `f_m` as a ReLU computational graph with one input: each layer holds
/// `σ(y), σ(y − ½), σ(y − 1)` and recombines them as `g(y) = 2σ(y) − 4σ(y − ½) + 2σ(y − 1)`.
pub fn square_graph(m: usize) -> Result<Graph> {
    let mut b = GraphBuilder::new(1);
    let x = b.input(0);
    let mut y = x;
    let mut terms = Vec::with_capacity(m);
    for s in 1..=m {
        let h1 = b.unary(Op::Relu, y);
        let h2 = b.unary(Op::ReluShift(0.5), y);
        let h3 = b.unary(Op::ReluShift(1.0), y);
        let a = b.scale(2.0, h1);
        let c = b.scale(-4.0, h2);
        let d = b.scale(2.0, h3);
        y = b.sum(&[a, c, d]);
        terms.push(b.scale(-0.25f64.powi(s as i32), y));
    }
    terms.insert(0, x);
    let out = b.sum(&terms);
    b.finish(vec![out])
}

/// Product network `p_{ε,M}(a, b) = 2M² [q(|a+b|/2M) − q(|a|/2M) − q(|b|/2M)]`
/// with `q` the square approximator accurate to `ε/(6M²)`, so that
/// `|p − ab| ≤ ε` on `[−M, M]²` and `p = 0` whenever `a = 0` or `b = 0`.
pub fn product_net(eps: f64, m_bound: f64, a: f64, b: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) || !(m_bound >= 1.0) {
        return Err(Error::Argument(format!("need ε ∈ (0,1) and M ≥ 1, got ε={eps}, M={m_bound}")));
    }
    if !(a.abs() <= m_bound && b.abs() <= m_bound) {
        return Err(Error::Domain(format!("({a}, {b}) is outside [−{m_bound}, {m_bound}]²")));
    }
    let depth = square_depth(eps / (6.0 * m_bound * m_bound));
    let q = |t: f64| square_approx(depth, (t.abs() / (2.0 * m_bound)).min(1.0));
    Ok(2.0 * m_bound * m_bound * (q(a + b)? - q(a)? - q(b)?))
}

/// Trapezoid `ψ(t)`: 1 on `|t| ≤ 1`, `2 − |t|` on `1 ≤ |t| ≤ 2`, 0 beyond.
pub fn bump(t: f64) -> f64 {
    (2.0 - t.abs()).clamp(0.0, 1.0)
}

/// `φ_m(x) = Π_i ψ(3N(x_i − m_i/N))`.
pub fn partition_bump(n: usize, m: &[usize], x: &[f64]) -> Result<f64> {
    if m.len() != x.len() {
        return Err(Error::Shape(format!("multi-index has {} entries, point has {}", m.len(), x.len())));
    }
    if n == 0 || m.iter().any(|&mi| mi > n) {
        return Err(Error::Domain(format!("multi-index {m:?} not in {{0..{n}}}^d")));
    }
    x.iter().try_for_each(|&xi| unit_interval(xi))?;
    let nf = n as f64;
    Ok(m.iter()
        .zip(x)
        .map(|(&mi, &xi)| bump(3.0 * nf * (xi - mi as f64 / nf)))
        .product())
}

/// Derivative oracle `D^k f(x)` for a function on `[0,1]^d` with Taylor
/// order `order` (polynomials of degree `order − 1`).
pub struct TaylorOracle {
    pub dim: usize,
    pub order: usize,
    pub deriv: Box<dyn Fn(&[usize], &[f64]) -> f64 + Send + Sync>,
}

impl TaylorOracle {
    pub fn new(dim: usize, order: usize, deriv: impl Fn(&[usize], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, order, deriv: Box::new(deriv) }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.deriv)(&vec![0; self.dim], x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Assembly {
    /// `Σ_m φ_m(x) P_m(x)` evaluated directly.
    ExactFN,
    /// Each `φ_m (x − m/N)^k` replaced by a chain of product networks with
    /// tolerance `delta`.
    ReluComposed { delta: f64 },
}

/// Multi-indices `k ∈ ℕ^d` with `|k|₁ < order`.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                let used: usize = p.iter().sum();
                (0..order.saturating_sub(used)).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

fn grid_points(n: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..=n).map(move |m| {
                    let mut q = p.clone();
                    q.push(m);
                    q
                })
            })
            .collect();
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Local Taylor assembly `Σ_m Σ_k a_{m,k} φ_m(x) (x − m/N)^k` with
/// `a_{m,k} = D^k f(m/N)/k!`, supported for `d ≤ 2`, `order ≤ 2`.
pub fn taylor_partition_approx(oracle: &TaylorOracle, n: usize, mode: Assembly, x: &[f64]) -> Result<f64> {
    let (d, k) = (oracle.dim, oracle.order);
    if !(1..=2).contains(&d) || !(1..=2).contains(&k) {
        return Err(Error::Capability(format!("assembly implemented for d ≤ 2, k ≤ 2 (got d={d}, k={k})")));
    }
    if n == 0 {
        return Err(Error::Argument("grid resolution must be positive".into()));
    }
    if x.len() != d {
        return Err(Error::Shape(format!("point has {} coordinates, expected {d}", x.len())));
    }
    x.iter().try_for_each(|&xi| unit_interval(xi))?;
    let nf = n as f64;
    let ks = multi_indices(d, k);
    let mut total = 0.0;
    for m in grid_points(n, d) {
        let centre: Vec<f64> = m.iter().map(|&mi| mi as f64 / nf).collect();
        let bumps: Vec<f64> = x.iter().zip(&centre).map(|(xi, ci)| bump(3.0 * nf * (xi - ci))).collect();
        // both assemblies vanish outside the bump support
        if bumps.contains(&0.0) {
            continue;
        }
        for kk in &ks {
            let a = (oracle.deriv)(kk, &centre) / kk.iter().map(|&ki| factorial(ki)).product::<f64>();
            let mut factors = bumps.clone();
            for (i, &ki) in kk.iter().enumerate() {
                factors.extend(std::iter::repeat_n(x[i] - centre[i], ki));
            }
            let term = match mode {
                Assembly::ExactFN => factors.iter().product(),
                Assembly::ReluComposed { delta } => chained_product(&factors, delta, (d + k) as f64)?,
            };
            total += a * term;
        }
    }
    Ok(total)
}

/// `p(f₁, p(f₂, … p(f_{L−1}, f_L)))`.
fn chained_product(factors: &[f64], delta: f64, m_bound: f64) -> Result<f64> {
    let (last, rest) = factors.split_last().expect("at least one bump factor");
    rest.iter().rev().try_fold(*last, |acc, f| product_net(delta, m_bound, *f, acc))
}

/// Error bound `2^d d^k N^{−k} ‖f‖_{W^{k,∞}}` for the exact assembly.
pub fn taylor_error_bound(dim: usize, order: usize, n: usize, sobolev_norm: f64) -> f64 {
    2f64.powi(dim as i32) * (dim as f64).powi(order as i32) * (n as f64).powi(-(order as i32)) * sobolev_norm
}
