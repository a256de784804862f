//! Deterministic optimization: gradient descent with backtracking, conjugate
//! gradients, Newton–CG, BFGS, and penalty / augmented-Lagrangian methods for
//! constrained problems.
//!
//! Every iterative method returns an [`OptOutcome`] carrying a [`Trace`] with
//! one row per outer iteration. A row describes the iterate the step was taken
//! *from*: its objective value and gradient norm, the accepted step size, and
//! the number of backtracking reductions.

mod bfgs;
mod cg;
mod constrained;
mod newton;

pub use bfgs::{bfgs, bfgs_run, bfgs_update, BfgsOutcome};
pub use cg::{cg_solve, CgOutcome};
pub use constrained::{
    augmented_lagrangian, lagrangian_first_order, quadratic_penalty, ConstrainedOutcome,
    InnerSolver, PenaltyConfig,
};
pub use newton::{newton_cg, NewtonCgConfig};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::report;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// Armijo backtracking from `alpha_bar`.
    Backtracking,
    /// Exact minimizer along the direction for a quadratic, `−g·v / vᵀ∇²f v`
    /// (needs Hessian-vector products). Falls back to backtracking when the
    /// curvature along `v` is not positive.
    ExactQuadratic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSearchConfig {
    pub alpha_bar: f64,
    pub rho: f64,
    pub c: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    /// Safety cap on reductions within one line search.
    pub max_backtracks: usize,
    pub rule: StepRule,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            alpha_bar: 1.0,
            rho: 0.5,
            c: 1e-4,
            eps_tol: 1e-6,
            max_iter: 1000,
            max_backtracks: 60,
            rule: StepRule::Backtracking,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_bar > 0.0
            && self.eps_tol > 0.0
            && self.rho > 0.0
            && self.rho < 1.0
            && self.c > 0.0
            && self.c < 1.0;
        if !ok {
            return Err(Error::Argument(format!("invalid line-search configuration {self:?}")));
        }
        Ok(())
    }

    /// Upper bound `⌈log(2(1−c)/(ᾱL)) / log ρ⌉` on backtracking reductions
    /// for an `L`-smooth objective (zero when `ᾱ ≤ 2(1−c)/L`).
    pub fn backtrack_bound(&self, lipschitz: f64) -> usize {
        let r = (2.0 * (1.0 - self.c) / (self.alpha_bar * lipschitz)).ln() / self.rho.ln();
        r.ceil().max(0.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub ls_count: usize,
    pub wall_ms: f64,
}

/// Per-iteration log of an optimizer run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub const HEADER: [&'static str; 6] = ["iter", "f", "grad_norm", "step", "ls_count", "wall_ms"];

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    /// CSV text. With `timing == false` the wall-clock column is written as
    /// zero so repeated runs produce identical files.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = Trace::HEADER.join(",");
        out.push('\n');
        for r in &self.rows {
            let wall = if timing { r.wall_ms } else { 0.0 };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iter,
                report::num(r.f),
                report::num(r.grad_norm),
                report::num(r.step),
                r.ls_count,
                report::num(wall)
            ));
        }
        out
    }
}

/// Result of an unconstrained run.
#[derive(Clone, Debug)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Trace,
    /// Accepted steps that violate the Wolfe curvature condition
    /// `∇f(x⁺)·v ≥ 0.9 ∇f(x)·v` (checked, never enforced).
    pub wolfe_violations: usize,
}

/// Curvature constant for the Wolfe check.
const WOLFE_C2: f64 = 0.9;

pub(crate) fn wolfe_curvature_holds(g_old: &[f64], g_new: &[f64], dir: &[f64]) -> bool {
    dot(g_new, dir) >= WOLFE_C2 * dot(g_old, dir)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(x: &[f64], alpha: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + alpha * b).collect()
}

pub(crate) fn check_finite(iter: usize, what: &str, vals: &[f64], x: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            iter,
            what: what.into(),
            last_iterate: x.to_vec(),
        })
    }
}

pub(crate) struct Step {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub reductions: usize,
}

/// Armijo backtracking along a descent direction `dir` with slope
/// `g·dir < 0`. Trial points where the objective is undefined or non-finite
/// count as failures and are backtracked from.
pub(crate) fn line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    f: f64,
    g: &[f64],
    dir: &[f64],
    cfg: &LineSearchConfig,
    iter: usize,
) -> Result<Step> {
    let slope = dot(g, dir);
    let mut alpha = cfg.alpha_bar;
    if cfg.rule == StepRule::ExactQuadratic {
        let hv = obj.hvp(x, dir)?;
        let curv = dot(dir, &hv);
        if curv > 0.0 {
            alpha = -slope / curv;
            return Ok(Step { alpha, x: axpy(x, alpha, dir), reductions: 0 });
        }
    }
    for reductions in 0..=cfg.max_backtracks {
        let xn = axpy(x, alpha, dir);
        match obj.value(&xn) {
            Ok(fx) if fx.is_finite() && fx <= f + cfg.c * alpha * slope => {
                return Ok(Step { alpha, x: xn, reductions });
            }
            Ok(_) | Err(Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
        alpha *= cfg.rho;
    }
    Err(Error::Stagnation {
        outer: iter,
        detail: format!("line search made no progress after {} reductions", cfg.max_backtracks),
        last_iterate: x.to_vec(),
    })
}

/// Gradient descent with backtracking line search.
pub fn gd_backtracking<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &LineSearchConfig,
) -> Result<OptOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut trace = Trace::default();
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.value_grad(&x)?;
    check_finite(0, "objective", &[f], &x)?;
    check_finite(0, "gradient", &g, &x)?;
    let mut k = 0;
    let mut wolfe_violations = 0;
    loop {
        let gn = norm(&g);
        if gn < cfg.eps_tol || k >= cfg.max_iter {
            return Ok(OptOutcome {
                converged: gn < cfg.eps_tol,
                x,
                f,
                grad_norm: gn,
                iterations: k,
                trace,
                wolfe_violations,
            });
        }
        let dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = line_search(obj, &x, f, &g, &dir, cfg, k)?;
        trace.push(TraceRow {
            iter: k,
            f,
            grad_norm: gn,
            step: step.alpha,
            ls_count: step.reductions,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        x = step.x;
        let (fx, gx) = obj.value_grad(&x)?;
        k += 1;
        check_finite(k, "objective", &[fx], &x)?;
        check_finite(k, "gradient", &gx, &x)?;
        if !wolfe_curvature_holds(&g, &gx, &dir) {
            wolfe_violations += 1;
        }
        f = fx;
        g = gx;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{GraphObjective, ObjectiveHandle, Quadratic};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn half_square_one_step() {
        let f = GraphObjective::parse("(scale 0.5 (pow 2 x1))").unwrap();
        let cfg = LineSearchConfig { alpha_bar: 1.0, c: 0.4, ..Default::default() };
        let out = gd_backtracking(&f, &[3.0], &cfg).unwrap();
        assert_eq!(out.x, vec![0.0]);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.trace.rows[0].ls_count, 0);
    }

    #[test]
    fn already_stationary_returns_empty_trace() {
        let f = GraphObjective::parse("(pow 2 x1)").unwrap();
        let out = gd_backtracking(&f, &[0.0], &LineSearchConfig::default()).unwrap();
        assert!(out.trace.is_empty());
        assert!(out.converged);
    }

    #[test]
    fn armijo_and_backtrack_bound_on_quadratic() {
        let q = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let f = Quadratic::new(q, DVector::from_vec(vec![1.0, -1.0])).unwrap();
        let cfg = LineSearchConfig { alpha_bar: 2.0, rho: 0.5, c: 0.3, eps_tol: 1e-10, ..Default::default() };
        let out = gd_backtracking(&f, &[5.0, 5.0], &cfg).unwrap();
        assert!(out.converged);
        let bound = cfg.backtrack_bound(f.lipschitz());
        let mut fs: Vec<f64> = out.trace.rows.iter().map(|r| r.f).collect();
        fs.push(out.f);
        for (i, r) in out.trace.rows.iter().enumerate() {
            assert!(r.ls_count <= bound);
            assert!(fs[i + 1] <= fs[i] - cfg.c * r.step * r.grad_norm.powi(2) + 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_reports_iterate() {
        let f = ObjectiveHandle::new(1, |x| Ok((x[0], vec![f64::NAN])));
        match gd_backtracking(&f, &[1.0], &LineSearchConfig::default()) {
            Err(Error::NonFinite { last_iterate, .. }) => assert_eq!(last_iterate, vec![1.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut t = Trace::default();
        t.push(TraceRow { iter: 0, f: 1.0, grad_norm: 0.5, step: 1.0, ls_count: 2, wall_ms: 3.2 });
        let csv = t.to_csv(false);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "iter,f,grad_norm,step,ls_count,wall_ms");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,1.0000000000000000e0,"));
        assert!(row.ends_with(",2,0.0000000000000000e0"));
    }
}
