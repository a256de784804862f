//! Benchmark objectives with value, gradient and (where available)
//! Hessian-vector products.
//!
//! Every optimizer in the crate is generic over [`Objective`]. Concrete
//! problems live in the submodules; [`ObjectiveHandle`] wraps closures and
//! [`GraphObjective`] wraps a scalar computational graph.

mod dataset;
mod pde;
mod regression;
mod sg;

pub use dataset::Dataset;
pub use pde::{PdeKind, PdeLoss};
pub use regression::{least_squares, logistic_nll, LeastSquares, LogisticNll};
pub use sg::{sg_family, SgFamily};

use std::sync::Arc;

use crate::autodiff::{self, Graph};
use crate::error::{shape_check, Error, Result};

/// A differentiable function `Rⁿ → R`.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_grad(x)?.1)
    }

    /// `∇²f(x) v`.
    fn hvp(&self, _x: &[f64], _v: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Capability("objective has no Hessian-vector product".into()))
    }

    fn has_hvp(&self) -> bool {
        false
    }

    fn known_minimum(&self) -> Option<f64> {
        None
    }

    fn known_minimizer(&self) -> Option<Vec<f64>> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).value_grad(x)
    }
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).grad(x)
    }
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        (**self).hvp(x, v)
    }
    fn has_hvp(&self) -> bool {
        (**self).has_hvp()
    }
    fn known_minimum(&self) -> Option<f64> {
        (**self).known_minimum()
    }
    fn known_minimizer(&self) -> Option<Vec<f64>> {
        (**self).known_minimizer()
    }
}

type ValueGradFn = dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Send + Sync;
type HvpFn = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync;

/// Objective assembled from callbacks.
#[derive(Clone)]
pub struct ObjectiveHandle {
    dim: usize,
    value_grad: Arc<ValueGradFn>,
    hvp: Option<Arc<HvpFn>>,
    known_minimum: Option<f64>,
    known_minimizer: Option<Vec<f64>>,
}

impl ObjectiveHandle {
    pub fn new(
        dim: usize,
        value_grad: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value_grad: Arc::new(value_grad),
            hvp: None,
            known_minimum: None,
            known_minimizer: None,
        }
    }

    pub fn with_hvp(
        mut self,
        hvp: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.hvp = Some(Arc::new(hvp));
        self
    }

    pub fn with_minimum(mut self, value: f64, minimizer: Option<Vec<f64>>) -> Self {
        self.known_minimum = Some(value);
        self.known_minimizer = minimizer;
        self
    }
}

impl std::fmt::Debug for ObjectiveHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectiveHandle")
            .field("dim", &self.dim)
            .field("hvp", &self.hvp.is_some())
            .field("known_minimum", &self.known_minimum)
            .finish()
    }
}

impl Objective for ObjectiveHandle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(Objective::value_grad(self, x)?.0)
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        shape_check("objective argument", self.dim, x.len())?;
        (self.value_grad)(x)
    }
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        match &self.hvp {
            Some(h) => {
                shape_check("objective argument", self.dim, x.len())?;
                shape_check("hvp direction", self.dim, v.len())?;
                h(x, v)
            }
            None => Err(Error::Capability("objective has no Hessian-vector product".into())),
        }
    }
    fn has_hvp(&self) -> bool {
        self.hvp.is_some()
    }
    fn known_minimum(&self) -> Option<f64> {
        self.known_minimum
    }
    fn known_minimizer(&self) -> Option<Vec<f64>> {
        self.known_minimizer.clone()
    }
}

/// Scalar-output graph used as an objective; derivatives come from the
/// autodiff sweeps.
#[derive(Clone, Debug)]
pub struct GraphObjective {
    graph: Graph,
}

impl GraphObjective {
    pub fn new(graph: Graph) -> Result<Self> {
        if graph.outputs().len() != 1 {
            return Err(Error::Shape("objective graph must have one output".into()));
        }
        Ok(Self { graph })
    }

    /// Parses a prefix expression (see [`autodiff::parse`]).
    pub fn parse(src: &str) -> Result<Self> {
        Self::new(autodiff::parse(src)?)
    }

    /// Parses with an explicit input count, for expressions that do not
    /// mention every variable.
    pub fn parse_with_dim(src: &str, dim: usize) -> Result<Self> {
        Self::new(autodiff::parse_multi(&[src], dim)?)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
}

impl Objective for GraphObjective {
    fn dim(&self) -> usize {
        self.graph.input_count()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(autodiff::evaluate(&self.graph, x)?.0)
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        autodiff::reverse_grad(&self.graph, x)
    }
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        autodiff::reverse_hvp(&self.graph, x, v)
    }
    fn has_hvp(&self) -> bool {
        true
    }
}

/// `½ xᵀQx − bᵀx` with `Q` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub q: nalgebra::DMatrix<f64>,
    pub b: nalgebra::DVector<f64>,
}

impl Quadratic {
    pub fn new(q: nalgebra::DMatrix<f64>, b: nalgebra::DVector<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != b.len() {
            return Err(Error::Shape("quadratic needs square Q matching b".into()));
        }
        Ok(Self { q, b })
    }

    /// Largest eigenvalue of `Q`, the gradient Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.q
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_grad(x)?.0)
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        shape_check("objective argument", self.dim(), x.len())?;
        let xv = nalgebra::DVector::from_column_slice(x);
        let qx = &self.q * &xv;
        let f = 0.5 * xv.dot(&qx) - self.b.dot(&xv);
        Ok((f, (qx - &self.b).as_slice().to_vec()))
    }
    fn hvp(&self, _x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        shape_check("hvp direction", self.dim(), v.len())?;
        Ok((&self.q * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec())
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn known_minimizer(&self) -> Option<Vec<f64>> {
        self.q
            .clone()
            .cholesky()
            .map(|c| c.solve(&self.b).as_slice().to_vec())
    }
    fn known_minimum(&self) -> Option<f64> {
        let x = self.known_minimizer()?;
        self.value(&x).ok()
    }
}

/// Rosenbrock function `(1 − x₁)² + 100 (x₂ − x₁²)²`, minimum 0 at `(1, 1)`.
pub fn rosenbrock() -> GraphObjective {
    let g = autodiff::parse("(add (pow 2 (shift 1 (neg x1))) (scale 100 (pow 2 (sub x2 (pow 2 x1)))))")
        .expect("valid expression");
    GraphObjective::new(g).expect("scalar graph")
}
