use std::time::Instant;

use super::{cg_solve, check_finite, dot, line_search, norm, wolfe_curvature_holds, LineSearchConfig, OptOutcome, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::objectives::Objective;

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonCgConfig {
    pub search: LineSearchConfig,
    /// Inner CG stops once `|∇²f v + ∇f| ≤ forcing·|∇f|`.
    pub forcing: f64,
    /// Inner CG iteration cap.
    pub max_cg: usize,
}

impl Default for NewtonCgConfig {
    fn default() -> Self {
        Self {
            search: LineSearchConfig::default(),
            forcing: 1e-6,
            max_cg: 100,
        }
    }
}

/// Hessian-free inexact Newton: CG on `∇²f(x) v = −∇f(x)` using only
/// Hessian-vector products, then a backtracking step. If CG meets
/// non-positive curvature the iteration uses `−∇f` instead.
///
/// Passing an objective whose `hvp` subsamples the data gives the
/// subsampled variant.
pub fn newton_cg<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &NewtonCgConfig) -> Result<OptOutcome> {
    cfg.search.validate()?;
    if !obj.has_hvp() {
        return Err(Error::Capability("Newton–CG needs Hessian-vector products".into()));
    }
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
        if gn < cfg.search.eps_tol || k >= cfg.search.max_iter {
            return Ok(OptOutcome {
                converged: gn < cfg.search.eps_tol,
                x,
                f,
                grad_norm: gn,
                iterations: k,
                trace,
                wolfe_violations,
            });
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut hvp_err = None;
        let solve = cg_solve(
            |v| match obj.hvp(&x, v) {
                Ok(h) => h,
                Err(e) => {
                    hvp_err = Some(e);
                    vec![0.0; v.len()]
                }
            },
            &rhs,
            cfg.forcing,
            cfg.max_cg,
        );
        if let Some(e) = hvp_err {
            return Err(e);
        }
        let mut dir = match solve {
            Ok(out) => out.x,
            Err(Error::Indefinite { .. }) => rhs.clone(),
            Err(e) => return Err(e),
        };
        if !(dot(&dir, &g) < 0.0) {
            dir = rhs;
        }
        let step = line_search(obj, &x, f, &g, &dir, &cfg.search, k)?;
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
    use crate::objectives::{logistic_nll, Dataset, GraphObjective, Quadratic};
    use crate::rng;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn quadratic_in_one_step() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let f = Quadratic::new(q, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let cfg = NewtonCgConfig { forcing: 1e-14, ..Default::default() };
        let out = newton_cg(&f, &[0.0; 3], &cfg).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn quartic_sum() {
        let f = GraphObjective::parse("(add (pow 4 x1) (pow 4 x2) (pow 4 x3))").unwrap();
        let cfg = NewtonCgConfig {
            search: LineSearchConfig { eps_tol: 1e-8, ..Default::default() },
            ..Default::default()
        };
        let out = newton_cg(&f, &[1.0; 3], &cfg).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 25, "{}", out.iterations);
    }

    #[test]
    fn negative_curvature_falls_back() {
        // f = x⁴/4 − x²/2 is concave at 0.1
        let f = GraphObjective::parse("(sub (scale 0.25 (pow 4 x1)) (scale 0.5 (pow 2 x1)))").unwrap();
        let out = newton_cg(&f, &[0.1], &NewtonCgConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0].abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_rate_on_logistic() {
        let mut r = rng::seeded(2);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| rng::normal_vec(&mut r, 2)).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| if x[0] - 0.5 * x[1] + 0.8 * rng::normal(&mut r) > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let l = logistic_nll(&Dataset::from_rows(&rows, &y).unwrap()).unwrap();
        let cfg = NewtonCgConfig {
            search: LineSearchConfig { eps_tol: 1e-12, ..Default::default() },
            forcing: 1e-12,
            ..Default::default()
        };
        let out = newton_cg(&l, &[0.0; 3], &cfg).unwrap();
        let g: Vec<f64> = out.trace.rows.iter().map(|r| r.grad_norm).collect();
        let tail: Vec<f64> = g.iter().copied().filter(|v| *v < 1e-1 && *v > 1e-10).collect();
        for w in tail.windows(2) {
            assert!(w[1] / (w[0] * w[0]) < 10.0, "{g:?}");
        }
    }
}
