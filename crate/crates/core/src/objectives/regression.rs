use nalgebra::{DMatrix, DVector};

use super::{Dataset, Objective};
use crate::error::{shape_check, Error, Result};
use crate::nn::sigmoid;

/// `f(θ) = ½ |Y − Aθ|²` with `A = [X, 1]`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    design: DMatrix<f64>,
    targets: DVector<f64>,
    minimizer: Vec<f64>,
    minimum: f64,
}

/// Least squares with its normal-equation solution precomputed.
pub fn least_squares(data: &Dataset) -> Result<LeastSquares> {
    let design = data.augmented();
    let n = design.ncols();
    let svd = design.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd.rank(smax * 1e-12 * n.max(design.nrows()) as f64);
    if rank < n {
        return Err(Error::Singular(format!(
            "augmented design matrix has rank {rank} < {n} columns"
        )));
    }
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * &data.targets;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?;
    let theta = chol.solve(&rhs);
    let mut obj = LeastSquares {
        design,
        targets: data.targets.clone(),
        minimizer: theta.as_slice().to_vec(),
        minimum: 0.0,
    };
    obj.minimum = obj.value(&obj.minimizer.clone())?;
    Ok(obj)
}

impl LeastSquares {
    fn residual(&self, theta: &[f64]) -> Result<DVector<f64>> {
        shape_check("parameter", self.design.ncols(), theta.len())?;
        Ok(&self.design * DVector::from_column_slice(theta) - &self.targets)
    }
}

impl Objective for LeastSquares {
    fn dim(&self) -> usize {
        self.design.ncols()
    }
    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(0.5 * self.residual(theta)?.norm_squared())
    }
    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = self.residual(theta)?;
        let g = self.design.transpose() * &r;
        Ok((0.5 * r.norm_squared(), g.as_slice().to_vec()))
    }
    fn hvp(&self, _theta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        shape_check("hvp direction", self.dim(), v.len())?;
        let av = &self.design * DVector::from_column_slice(v);
        Ok((self.design.transpose() * av).as_slice().to_vec())
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn known_minimum(&self) -> Option<f64> {
        Some(self.minimum)
    }
    fn known_minimizer(&self) -> Option<Vec<f64>> {
        Some(self.minimizer.clone())
    }
}

/// Logistic negative log-likelihood
/// `ℓ(θ) = −Σ_j [y_j log σ(a_jᵀθ) + (1 − y_j) log(1 − σ(a_jᵀθ))]`, `a_j = (x_j, 1)`.
#[derive(Clone, Debug)]
pub struct LogisticNll {
    design: DMatrix<f64>,
    labels: DVector<f64>,
}

pub fn logistic_nll(data: &Dataset) -> Result<LogisticNll> {
    if !data.is_binary() {
        return Err(Error::Argument("logistic regression needs labels in {0, 1}".into()));
    }
    Ok(LogisticNll {
        design: data.augmented(),
        labels: data.targets.clone(),
    })
}

/// `log(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticNll {
    fn logits(&self, theta: &[f64]) -> Result<DVector<f64>> {
        shape_check("parameter", self.design.ncols(), theta.len())?;
        Ok(&self.design * DVector::from_column_slice(theta))
    }

    /// `Σ_j σ_j (1 − σ_j) a_j a_jᵀ`.
    pub fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let z = self.logits(theta)?;
        let w = z.map(|zi| {
            let s = sigmoid(zi);
            s * (1.0 - s)
        });
        let weighted = DMatrix::from_fn(self.design.nrows(), self.design.ncols(), |i, j| {
            w[i] * self.design[(i, j)]
        });
        Ok(self.design.transpose() * weighted)
    }
}

impl Objective for LogisticNll {
    fn dim(&self) -> usize {
        self.design.ncols()
    }
    fn value(&self, theta: &[f64]) -> Result<f64> {
        let z = self.logits(theta)?;
        // −[y log σ(z) + (1−y) log(1−σ(z))] = softplus(z) − y z
        Ok(z.iter().zip(self.labels.iter()).map(|(&zi, &y)| softplus(zi) - y * zi).sum())
    }
    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = self.logits(theta)?;
        let mut f = 0.0;
        let mut resid = DVector::zeros(z.len());
        for (i, (&zi, &y)) in z.iter().zip(self.labels.iter()).enumerate() {
            f += softplus(zi) - y * zi;
            resid[i] = sigmoid(zi) - y;
        }
        Ok((f, (self.design.transpose() * resid).as_slice().to_vec()))
    }
    fn hvp(&self, theta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        shape_check("hvp direction", self.dim(), v.len())?;
        let z = self.logits(theta)?;
        let av = &self.design * DVector::from_column_slice(v);
        let wav = DVector::from_fn(z.len(), |i, _| {
            let s = sigmoid(z[i]);
            s * (1.0 - s) * av[i]
        });
        Ok((self.design.transpose() * wav).as_slice().to_vec())
    }
    fn has_hvp(&self) -> bool {
        true
    }
}
