use super::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `|Qx_j − b|` for `j = 0..=iterations`.
    pub residuals: Vec<f64>,
}

/// Conjugate gradients for `Qx = b` from `x₀ = 0`, with `Q` given as a
/// matrix-vector product.
///
/// Stops when `|Qx − b| ≤ tol·|b|` or after `max_iter` iterations. A
/// direction with `d·Qd ≤ 0` aborts with [`Error::Indefinite`] carrying the
/// current iterate.
pub fn cg_solve(
    mut matvec: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut g: Vec<f64> = b.iter().map(|v| -v).collect();
    let mut d = b.to_vec();
    let bnorm = norm(b);
    let mut residuals = vec![bnorm];
    let target = tol * bnorm;
    for j in 0..max_iter {
        if residuals[j] <= target {
            return Ok(CgOutcome { x, iterations: j, residuals });
        }
        let qd = matvec(&d);
        if qd.len() != n {
            return Err(Error::Shape(format!("matvec returned length {}, expected {n}", qd.len())));
        }
        let curv = dot(&d, &qd);
        if !(curv > 0.0) {
            return Err(Error::Indefinite { iter: j, best_iterate: x });
        }
        let alpha = -dot(&g, &d) / curv;
        x = axpy(&x, alpha, &d);
        g = axpy(&g, alpha, &qd);
        let beta = dot(&g, &qd) / curv;
        d = g.iter().zip(&d).map(|(gi, di)| -gi + beta * di).collect();
        residuals.push(norm(&g));
    }
    Ok(CgOutcome { iterations: max_iter, x, residuals })
}
