use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the quintic `φ(σ) = aσ + bσ³ + cσ⁵` tuned for fast
/// singular-value normalization.
pub const QUINTIC: [f64; 3] = [3.4445, -4.775, 2.0315];

/// Location of one 2-D weight matrix (row-major) inside a flat parameter
/// vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSlice {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MatrixSlice {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn read(&self, flat: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &flat[self.range()])
    }

    pub fn write(&self, m: &DMatrix<f64>, flat: &mut [f64]) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                flat[self.offset + r * self.cols + c] = m[(r, c)];
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuonConfig {
    pub coeffs: [f64; 3],
    pub ns_iters: usize,
    pub ns_eps: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub alpha: f64,
    /// Scale the step by `√max(1, rows/cols)`.
    pub shape_scale: bool,
    pub matrices: Vec<MatrixSlice>,
}

impl Default for MuonConfig {
    fn default() -> Self {
        Self {
            coeffs: QUINTIC,
            ns_iters: 5,
            ns_eps: 1e-7,
            momentum: 0.95,
            weight_decay: 0.1,
            alpha: 1e-3,
            shape_scale: false,
            matrices: Vec::new(),
        }
    }
}

impl MuonConfig {
    /// Weight matrices of an MLP parameter vector.
    pub fn for_mlp(spec: &crate::nn::MlpSpec) -> Self {
        let matrices = spec
            .layers()
            .iter()
            .map(|l| MatrixSlice { offset: l.weight_offset, rows: l.rows, cols: l.cols })
            .collect();
        Self { matrices, ..Default::default() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.ns_iters == 0 {
            return Err(Error::Argument("Newton–Schulz needs at least one iteration".into()));
        }
        let mut spans: Vec<_> = self.matrices.iter().map(|m| m.range()).collect();
        spans.sort_by_key(|r| r.start);
        for (i, m) in self.matrices.iter().enumerate() {
            if m.rows == 0 || m.cols == 0 || m.offset + m.len() > n {
                return Err(Error::Shape(format!("matrix slice {i} {m:?} does not fit {n} parameters")));
            }
        }
        if spans.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(Error::Shape("matrix slices overlap".into()));
        }
        Ok(())
    }
}

/// Newton–Schulz orthogonalization: Frobenius-normalize `M`, then apply the
/// matrix quintic `X ← aX + b(XXᵀ)X + c(XXᵀ)²X` up to `iters` times,
/// stopping early once `‖X_{j+1} − X_j‖_F ≤ eps‖X_j‖_F`.
pub fn newton_schulz(m: &DMatrix<f64>, coeffs: [f64; 3], iters: usize, eps: f64) -> Result<DMatrix<f64>> {
    let fro = m.norm();
    if fro == 0.0 || !fro.is_finite() {
        return Err(Error::Domain(format!("cannot orthogonalize a matrix with Frobenius norm {fro}")));
    }
    let [a, b, c] = coeffs;
    // work on the wide orientation so the Gram matrix is the small one
    let tall = m.nrows() > m.ncols();
    let mut x = if tall { m.transpose() } else { m.clone() } / (fro + eps);
    for _ in 0..iters {
        let gram = &x * x.transpose();
        let poly = &gram * b + &gram * &gram * c;
        let next = &x * a + poly * &x;
        let change = (&next - &x).norm() / x.norm();
        x = next;
        if change <= eps {
            break;
        }
    }
    Ok(if tall { x.transpose() } else { x })
}

/// One Muon step on each matrix: `M ← μM + g`, `O = NS(M)`,
/// `W ← W − αλW − αO`. A zero momentum matrix contributes no direction.
pub fn muon_step(
    cfg: &MuonConfig,
    weights: &[DMatrix<f64>],
    grads: &[DMatrix<f64>],
    buffers: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    muon_step_scaled(cfg, cfg.alpha, weights, grads, buffers)
}

pub(crate) fn muon_step_scaled(
    cfg: &MuonConfig,
    alpha: f64,
    weights: &[DMatrix<f64>],
    grads: &[DMatrix<f64>],
    buffers: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    if weights.len() != grads.len() || weights.len() != buffers.len() {
        return Err(Error::Shape("weights, gradients and buffers differ in count".into()));
    }
    let mut new_w = Vec::with_capacity(weights.len());
    let mut new_m = Vec::with_capacity(weights.len());
    for (i, ((w, g), m)) in weights.iter().zip(grads).zip(buffers).enumerate() {
        if w.shape() != g.shape() || w.shape() != m.shape() {
            return Err(Error::Shape(format!(
                "matrix {i}: weight {:?}, gradient {:?}, buffer {:?}",
                w.shape(),
                g.shape(),
                m.shape()
            )));
        }
        let mom = m * cfg.momentum + g;
        let dir = if mom.norm() == 0.0 {
            DMatrix::zeros(w.nrows(), w.ncols())
        } else {
            newton_schulz(&mom, cfg.coeffs, cfg.ns_iters, cfg.ns_eps)?
        };
        let step = if cfg.shape_scale {
            alpha * (w.nrows() as f64 / w.ncols() as f64).max(1.0).sqrt()
        } else {
            alpha
        };
        new_w.push(w - w * (step * cfg.weight_decay) - dir * step);
        new_m.push(mom);
    }
    Ok((new_w, new_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
        m.clone().svd(false, false).singular_values.as_slice().to_vec()
    }

    #[test]
    fn rotation_is_a_fixed_point() {
        let t: f64 = 0.7;
        let u = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let o = newton_schulz(&u, [2.0, -1.5, 0.5], 5, 1e-7).unwrap();
        assert!((&o - &u).amax() < 1e-10, "{o}");
    }

    #[test]
    fn rank_one_maps_to_its_polar_factor() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 2.0]);
        let v = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let m = &u * v.transpose();
        let polar = &m / (u.norm() * v.norm());
        let o = newton_schulz(&m, [2.0, -1.5, 0.5], 10, 1e-7).unwrap();
        assert!((&o - &polar).amax() < 1e-10);
        let q = newton_schulz(&m, QUINTIC, 5, 1e-7).unwrap();
        let s = q.norm();
        assert!((&q / s - &polar).amax() < 1e-12);
        assert!((0.68..=1.21).contains(&s));
    }

    #[test]
    fn singular_vectors_are_kept() {
        let mut r = rng::seeded(3);
        let m = DMatrix::from_fn(6, 4, |_, _| rng::normal(&mut r));
        let o = newton_schulz(&m, QUINTIC, 5, 1e-7).unwrap();
        // O = U f(Σ) Vᵀ, so Oᵀ M is symmetric positive definite
        let p = o.transpose() * &m;
        assert!((&p - p.transpose()).amax() < 1e-10);
        assert!(p.cholesky().is_some());
    }

    #[test]
    fn gram_close_to_identity_for_full_rank() {
        let mut r = rng::seeded(11);
        for _ in 0..30 {
            let rows = 2 + (rng::uniform(&mut r) * 15.0) as usize;
            let cols = rows + (rng::uniform(&mut r) * 8.0) as usize;
            let m = DMatrix::from_fn(rows, cols, |_, _| rng::normal(&mut r));
            let o = newton_schulz(&m, QUINTIC, 5, 1e-7).unwrap();
            let dev = (&o * o.transpose() - DMatrix::identity(rows, rows)).norm();
            // per singular value |φ⁵(σ)² − 1| ≤ 0.5352 on (0, 1]
            assert!(dev <= 0.54 * (rows as f64).sqrt(), "{rows}x{cols}: {dev}");
        }
    }

    #[test]
    fn zero_matrix_rejected() {
        assert!(matches!(
            newton_schulz(&DMatrix::zeros(2, 3), QUINTIC, 5, 1e-7),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decay_only_when_gradient_vanishes() {
        let cfg = MuonConfig::default();
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let z = DMatrix::zeros(2, 2);
        let (nw, nm) = muon_step(&cfg, std::slice::from_ref(&w), std::slice::from_ref(&z), std::slice::from_ref(&z)).unwrap();
        assert_eq!(nw[0], &w - &w * (cfg.alpha * cfg.weight_decay));
        assert_eq!(nm[0], z);
    }

    #[test]
    fn direction_has_unit_singular_values() {
        let mut r = rng::seeded(4);
        let cfg = MuonConfig { momentum: 0.0, weight_decay: 0.0, alpha: 1.0, ..Default::default() };
        let w = DMatrix::zeros(8, 5);
        let g = DMatrix::from_fn(8, 5, |_, _| rng::normal(&mut r));
        let (nw, _) = muon_step(&cfg, std::slice::from_ref(&w), std::slice::from_ref(&g), std::slice::from_ref(&w)).unwrap();
        let dir = -&nw[0];
        let ns = newton_schulz(&g, QUINTIC, 5, 1e-7).unwrap();
        assert!((&dir - &ns).amax() < 1e-15);
        let fro = dir.norm();
        assert!((fro / 5f64.sqrt() - 1.0).abs() < 0.3, "{fro}");
        for s in singular_values(&dir) {
            assert!((0.68..1.21).contains(&s));
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::zeros(2, 3);
        assert!(matches!(
            muon_step(&MuonConfig::default(), std::slice::from_ref(&a), &[b], std::slice::from_ref(&a)),
            Err(Error::Shape(_))
        ));
    }
}
