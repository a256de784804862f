//! Equality and inequality constrained minimization
//! `min f(x)` s.t. `h_i(x) = 0`, `g_j(x) ≤ 0`.
//!
//! Multipliers follow the sign convention of the Lagrangian
//! `f + Σ λ_i h_i + Σ μ_j g_j` with `μ ≥ 0`.

use std::time::Instant;

use super::{bfgs, gd_backtracking, norm, LineSearchConfig, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::objectives::Objective;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    Bfgs,
    GradientDescent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub gamma0: f64,
    pub eps0: f64,
    pub gamma_factor: f64,
    pub eps_factor: f64,
    /// Floors for the geometric schedules.
    pub gamma_min: f64,
    pub eps_min: f64,
    /// The penalty method stops only once `γ_k ≤ gamma_tol`.
    pub gamma_tol: f64,
    /// Bound on `|h|`, `max(g, 0)` and `|μ ⊙ g|` at termination.
    pub feas_tol: f64,
    /// Bound on the gradient of the inner objective at termination.
    pub grad_tol: f64,
    pub max_outer: usize,
    pub inner: LineSearchConfig,
    pub solver: InnerSolver,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            gamma0: 1.0,
            eps0: 0.1,
            gamma_factor: 0.2,
            eps_factor: 0.5,
            gamma_min: 1e-8,
            eps_min: 1e-9,
            gamma_tol: 1e-6,
            feas_tol: 1e-6,
            grad_tol: 1e-6,
            max_outer: 50,
            inner: LineSearchConfig {
                max_iter: 5000,
                ..Default::default()
            },
            solver: InnerSolver::Bfgs,
        }
    }
}

impl PenaltyConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.gamma0 > 0.0
            && self.eps0 > 0.0
            && (0.0..1.0).contains(&self.gamma_factor)
            && self.gamma_factor > 0.0
            && (0.0..1.0).contains(&self.eps_factor)
            && self.eps_factor > 0.0;
        if !ok {
            return Err(Error::Argument(format!("invalid penalty schedule {self:?}")));
        }
        self.inner.validate()
    }
}

#[derive(Clone, Debug)]
pub struct ConstrainedOutcome {
    pub x: Vec<f64>,
    /// Equality multipliers (for the penalty method, the estimate `h(x)/γ`).
    pub lambda: Vec<f64>,
    /// Inequality multipliers, componentwise nonnegative.
    pub mu: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// One row per outer iteration: `f(x_k)`, inner gradient norm, `γ_k` in
    /// the step column and the inner iteration count in `ls_count`.
    pub trace: Trace,
}

/// `f + Σ (λ_i h_i + h_i²/2γ) + Σ (μ_j g⁺_j + (g⁺_j)²/2γ)` with
/// `g⁺_j = max(g_j, −γ μ_j)`, the squared-slack reduction of the
/// inequalities.
struct Merit<'a> {
    f: &'a dyn Objective,
    eq: &'a [&'a dyn Objective],
    ineq: &'a [&'a dyn Objective],
    lambda: &'a [f64],
    mu: &'a [f64],
    gamma: f64,
}

impl Objective for Merit<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.f.value(x)?;
        for (hi, l) in self.eq.iter().zip(self.lambda) {
            let h = hi.value(x)?;
            v += l * h + h * h / (2.0 * self.gamma);
        }
        for (gj, m) in self.ineq.iter().zip(self.mu) {
            let gp = gj.value(x)?.max(-self.gamma * m);
            v += m * gp + gp * gp / (2.0 * self.gamma);
        }
        Ok(v)
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (mut v, mut grad) = self.f.value_grad(x)?;
        for (hi, l) in self.eq.iter().zip(self.lambda) {
            let (h, dh) = hi.value_grad(x)?;
            v += l * h + h * h / (2.0 * self.gamma);
            let coef = l + h / self.gamma;
            grad.iter_mut().zip(&dh).for_each(|(a, b)| *a += coef * b);
        }
        for (gj, m) in self.ineq.iter().zip(self.mu) {
            let (g, dg) = gj.value_grad(x)?;
            let gp = g.max(-self.gamma * m);
            v += m * gp + gp * gp / (2.0 * self.gamma);
            let coef = m + gp / self.gamma;
            if coef != 0.0 {
                grad.iter_mut().zip(&dg).for_each(|(a, b)| *a += coef * b);
            }
        }
        Ok((v, grad))
    }
}

fn check_dims(f: &dyn Objective, cons: &[&dyn Objective], x0: &[f64]) -> Result<()> {
    if f.dim() != x0.len() || cons.iter().any(|c| c.dim() != x0.len()) {
        return Err(Error::Shape("objective, constraints and start point disagree in dimension".into()));
    }
    Ok(())
}

fn values(fs: &[&dyn Objective], x: &[f64]) -> Result<Vec<f64>> {
    fs.iter().map(|h| h.value(x)).collect()
}

struct InnerResult {
    x: Vec<f64>,
    grad_norm: f64,
    iterations: usize,
}

fn inner_solve(merit: &Merit<'_>, x0: &[f64], eps: f64, cfg: &PenaltyConfig, outer: usize) -> Result<InnerResult> {
    let inner = LineSearchConfig {
        eps_tol: eps,
        ..cfg.inner.clone()
    };
    let out = match cfg.solver {
        InnerSolver::Bfgs => bfgs(merit, x0, &inner),
        InnerSolver::GradientDescent => gd_backtracking(merit, x0, &inner),
    };
    let out = match out {
        Ok(o) => o,
        Err(Error::Stagnation { detail, last_iterate, .. }) => {
            return Err(Error::Stagnation { outer, detail, last_iterate })
        }
        Err(e) => return Err(e),
    };
    if !out.converged {
        return Err(Error::Stagnation {
            outer,
            detail: format!(
                "inner solver stopped at |∇| = {:e} > ε = {eps:e} after {} iterations",
                out.grad_norm, out.iterations
            ),
            last_iterate: out.x,
        });
    }
    Ok(InnerResult {
        x: out.x,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
    })
}

/// Quadratic penalty method on `Q_γ(x) = f(x) + |h(x)|²/(2γ)` with shrinking
/// `γ_k` and inner tolerances `ε_k`, warm-starting each inner solve from the
/// previous iterate. Reports `λ̂ = h(x_k)/γ_k`.
pub fn quadratic_penalty(
    f: &dyn Objective,
    eq: &[&dyn Objective],
    x0: &[f64],
    cfg: &PenaltyConfig,
) -> Result<ConstrainedOutcome> {
    cfg.validate()?;
    check_dims(f, eq, x0)?;
    let start = Instant::now();
    let zeros = vec![0.0; eq.len()];
    let mut x = x0.to_vec();
    let mut gamma = cfg.gamma0;
    let mut eps = cfg.eps0;
    let mut trace = Trace::default();
    for k in 0..cfg.max_outer {
        let merit = Merit { f, eq, ineq: &[], lambda: &zeros, mu: &[], gamma };
        let sol = inner_solve(&merit, &x, eps, cfg, k)?;
        x = sol.x;
        let h = values(eq, &x)?;
        trace.push(TraceRow {
            iter: k,
            f: f.value(&x)?,
            grad_norm: sol.grad_norm,
            step: gamma,
            ls_count: sol.iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let lambda: Vec<f64> = h.iter().map(|v| v / gamma).collect();
        if gamma <= cfg.gamma_tol && norm(&h) <= cfg.feas_tol && sol.grad_norm <= cfg.grad_tol {
            return Ok(ConstrainedOutcome { x, lambda, mu: Vec::new(), outer_iterations: k + 1, converged: true, trace });
        }
        if k + 1 == cfg.max_outer {
            return Ok(ConstrainedOutcome { x, lambda, mu: Vec::new(), outer_iterations: k + 1, converged: false, trace });
        }
        gamma = (gamma * cfg.gamma_factor).max(cfg.gamma_min);
        eps = (eps * cfg.eps_factor).max(cfg.eps_min);
    }
    Err(Error::Argument("max_outer must be at least 1".into()))
}

/// Augmented Lagrangian method with multiplier updates
/// `λ ← λ + h(x)/γ`, `μ ← max(μ + g(x)/γ, 0)`.
pub fn augmented_lagrangian(
    f: &dyn Objective,
    eq: &[&dyn Objective],
    ineq: &[&dyn Objective],
    x0: &[f64],
    cfg: &PenaltyConfig,
) -> Result<ConstrainedOutcome> {
    cfg.validate()?;
    check_dims(f, eq, x0)?;
    check_dims(f, ineq, x0)?;
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut lambda = vec![0.0; eq.len()];
    let mut mu = vec![0.0; ineq.len()];
    let mut gamma = cfg.gamma0;
    let mut eps = cfg.eps0;
    let mut trace = Trace::default();
    for k in 0..cfg.max_outer {
        let merit = Merit { f, eq, ineq, lambda: &lambda, mu: &mu, gamma };
        let sol = inner_solve(&merit, &x, eps, cfg, k)?;
        x = sol.x;
        let h = values(eq, &x)?;
        let g = values(ineq, &x)?;
        trace.push(TraceRow {
            iter: k,
            f: f.value(&x)?,
            grad_norm: sol.grad_norm,
            step: gamma,
            ls_count: sol.iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        for (l, hi) in lambda.iter_mut().zip(&h) {
            *l += hi / gamma;
        }
        for (m, gj) in mu.iter_mut().zip(&g) {
            *m = (*m + gj / gamma).max(0.0);
        }
        let infeasible = norm(&h).max(g.iter().fold(0.0f64, |a, v| a.max(*v)));
        let slack = mu.iter().zip(&g).fold(0.0f64, |a, (m, v)| a.max((m * v).abs()));
        let done = infeasible <= cfg.feas_tol && slack <= cfg.feas_tol && sol.grad_norm <= cfg.grad_tol;
        if done || k + 1 == cfg.max_outer {
            return Ok(ConstrainedOutcome { x, lambda, mu, outer_iterations: k + 1, converged: done, trace });
        }
        gamma = (gamma * cfg.gamma_factor).max(cfg.gamma_min);
        eps = (eps * cfg.eps_factor).max(cfg.eps_min);
    }
    Err(Error::Argument("max_outer must be at least 1".into()))
}

/// Simultaneous gradient descent in `x` and ascent in `λ`:
/// `x ← x − α(∇f + Σλ_i∇h_i)`, `λ ← λ + β h(x)`.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_first_order(
    f: &dyn Objective,
    eq: &[&dyn Objective],
    x0: &[f64],
    alpha: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ConstrainedOutcome> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Argument("step sizes must be positive".into()));
    }
    check_dims(f, eq, x0)?;
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut lambda = vec![0.0; eq.len()];
    let mut trace = Trace::default();
    for k in 0..max_iter {
        let (fx, mut grad) = f.value_grad(&x)?;
        let mut h = Vec::with_capacity(eq.len());
        for (hi, l) in eq.iter().zip(&lambda) {
            let (v, dh) = hi.value_grad(&x)?;
            grad.iter_mut().zip(&dh).for_each(|(a, b)| *a += l * b);
            h.push(v);
        }
        let gn = norm(&grad);
        trace.push(TraceRow {
            iter: k,
            f: fx,
            grad_norm: gn,
            step: alpha,
            ls_count: 0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if gn < tol && norm(&h) < tol {
            return Ok(ConstrainedOutcome { x, lambda, mu: Vec::new(), outer_iterations: k, converged: true, trace });
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= alpha * gi;
        }
        for (l, hi) in lambda.iter_mut().zip(&h) {
            *l += beta * hi;
        }
        let xn = norm(&x);
        if !(xn <= 1e8) {
            return Err(Error::Divergence { iter: k + 1, norm: xn });
        }
    }
    Ok(ConstrainedOutcome { x, lambda, mu: Vec::new(), outer_iterations: max_iter, converged: false, trace })
}
