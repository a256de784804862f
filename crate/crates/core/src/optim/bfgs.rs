use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{check_finite, line_search, norm, wolfe_curvature_holds, LineSearchConfig, OptOutcome, Trace, TraceRow};
use crate::error::Result;
use crate::objectives::Objective;

/// Curvature threshold below which the inverse-Hessian update is skipped.
const MIN_CURVATURE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub outcome: OptOutcome,
    /// Final inverse-Hessian approximation `H_k`.
    pub inverse_hessian: DMatrix<f64>,
    /// Number of iterations whose update was skipped for lack of curvature.
    pub skipped_updates: usize,
}

/// In-place inverse update
/// `H ← H + (1 + yᵀHy/yᵀs) ssᵀ/yᵀs − (H y sᵀ + s yᵀ H)/yᵀs`.
/// Returns `false` (leaving `H` untouched) when `yᵀs ≤ 1e-10`.
pub fn bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> bool {
    let ys = y.dot(s);
    if ys <= MIN_CURVATURE {
        return false;
    }
    let hy = &*h * y;
    let yhy = y.dot(&hy);
    let ss = s * s.transpose();
    let hys = &hy * s.transpose();
    *h += ss * ((1.0 + yhy / ys) / ys) - (&hys + hys.transpose()) / ys;
    // keep exact symmetry against round-off
    let sym = (&*h + h.transpose()) * 0.5;
    *h = sym;
    true
}

/// BFGS with `H₀ = I` and backtracking steps along `−H_k ∇f`.
pub fn bfgs<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &LineSearchConfig) -> Result<OptOutcome> {
    Ok(bfgs_run(obj, x0, cfg, None)?.outcome)
}

/// BFGS returning the final inverse-Hessian approximation. `h0` overrides
/// the identity start.
pub fn bfgs_run<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &LineSearchConfig,
    h0: Option<DMatrix<f64>>,
) -> Result<BfgsOutcome> {
    cfg.validate()?;
    let n = x0.len();
    let start = Instant::now();
    let mut h = h0.unwrap_or_else(|| DMatrix::identity(n, n));
    let mut trace = Trace::default();
    let mut skipped = 0;
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.value_grad(&x)?;
    check_finite(0, "objective", &[f], &x)?;
    check_finite(0, "gradient", &g, &x)?;
    let mut k = 0;
    let mut wolfe_violations = 0;
    loop {
        let gn = norm(&g);
        if gn < cfg.eps_tol || k >= cfg.max_iter {
            return Ok(BfgsOutcome {
                outcome: OptOutcome {
                    converged: gn < cfg.eps_tol,
                    x,
                    f,
                    grad_norm: gn,
                    iterations: k,
                    trace,
                    wolfe_violations,
                },
                inverse_hessian: h,
                skipped_updates: skipped,
            });
        }
        let gv = DVector::from_column_slice(&g);
        let mut dir = -(&h * &gv);
        if dir.dot(&gv) >= 0.0 {
            // lost positive definiteness numerically; restart from steepest descent
            h = DMatrix::identity(n, n);
            dir = -gv.clone();
        }
        let step = line_search(obj, &x, f, &g, dir.as_slice(), cfg, k)?;
        trace.push(TraceRow {
            iter: k,
            f,
            grad_norm: gn,
            step: step.alpha,
            ls_count: step.reductions,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let (fx, gx) = obj.value_grad(&step.x)?;
        k += 1;
        check_finite(k, "objective", &[fx], &step.x)?;
        check_finite(k, "gradient", &gx, &step.x)?;
        if !wolfe_curvature_holds(&g, &gx, dir.as_slice()) {
            wolfe_violations += 1;
        }
        let s = DVector::from_iterator(n, step.x.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gx.iter().zip(&g).map(|(a, b)| a - b));
        if !bfgs_update(&mut h, &s, &y) {
            skipped += 1;
        }
        x = step.x;
        f = fx;
        g = gx;
    }
}
