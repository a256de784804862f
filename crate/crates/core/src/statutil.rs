//! Monte Carlo and probability utilities: importance-sampled integration,
//! closed-form divergences between standard distributions, and an
//! Euler–Maruyama path simulator.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_check, Error, Result};
use crate::odeflow::SolverConfig;
use crate::rng::{self, Rng};

/// Proposal distribution for importance sampling.
pub trait Proposal {
    fn sample(&self, g: &mut Rng) -> Vec<f64>;
    fn density(&self, x: &[f64]) -> f64;
}

/// Uniform distribution on the box `Π [lo_i, hi_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Proposal for UniformBox {
    fn sample(&self, g: &mut Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) * rng::uniform(g)).collect()
    }

    fn density(&self, x: &[f64]) -> f64 {
        let inside = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| (*a..*b).contains(v));
        if inside {
            1.0 / self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product::<f64>()
        } else {
            0.0
        }
    }
}

/// Isotropic Gaussian `N(mean, sd² I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsoGaussian {
    pub mean: Vec<f64>,
    pub sd: f64,
}

impl Proposal for IsoGaussian {
    fn sample(&self, g: &mut Rng) -> Vec<f64> {
        self.mean.iter().map(|m| m + self.sd * rng::normal(g)).collect()
    }

    fn density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let r2: f64 = x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        (-0.5 * r2 / (self.sd * self.sd)).exp() / (2.0 * PI * self.sd * self.sd).powf(0.5 * d)
    }
}

/// `J = (1/N) Σ h(X_i)/p(X_i)` with `X_i ~ p`, and its standard error
/// `√(s²/N)` from the sample variance of the ratios.
pub fn importance_estimate<H, P>(h: H, proposal: &P, n: usize, seed: u64) -> Result<(f64, f64)>
where
    H: Fn(&[f64]) -> f64,
    P: Proposal + ?Sized,
{
    if n == 0 {
        return Err(Error::Argument("need at least one sample".into()));
    }
    let mut g = rng::seeded(seed);
    let mut ratios = Vec::with_capacity(n);
    for _ in 0..n {
        let x = proposal.sample(&mut g);
        let p = proposal.density(&x);
        if !(p > 0.0) {
            return Err(Error::Domain(format!("proposal density {p} at a drawn sample {x:?}")));
        }
        ratios.push(h(&x) / p);
    }
    let nf = n as f64;
    let mean = ratios.iter().sum::<f64>() / nf;
    let var = if n > 1 {
        ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / nf).sqrt()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    /// `s · I`.
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub cov: Covariance,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        let g = Self { mean, cov };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        match &self.cov {
            Covariance::Scalar(s) if *s > 0.0 => Ok(()),
            Covariance::Diagonal(v) => {
                shape_check("diagonal covariance", d, v.len())?;
                if v.iter().all(|s| *s > 0.0) {
                    Ok(())
                } else {
                    Err(Error::Precondition("diagonal covariance has a non-positive entry".into()))
                }
            }
            Covariance::Full(m) => {
                if m.shape() != (d, d) {
                    return Err(Error::Shape(format!("covariance is {:?}, need {d}×{d}", m.shape())));
                }
                if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) || m.clone().cholesky().is_none() {
                    return Err(Error::Precondition("covariance is not symmetric positive definite".into()));
                }
                Ok(())
            }
            Covariance::Scalar(_) => Err(Error::Precondition("scalar covariance must be positive".into())),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        match &self.cov {
            Covariance::Scalar(s) => DMatrix::identity(d, d) * *s,
            Covariance::Diagonal(v) => DMatrix::from_diagonal(&DVector::from_column_slice(v)),
            Covariance::Full(m) => m.clone(),
        }
    }

    /// Diagonal entries when the covariance is scalar or diagonal.
    fn diagonal(&self) -> Option<Vec<f64>> {
        match &self.cov {
            Covariance::Scalar(s) => Some(vec![*s; self.dim()]),
            Covariance::Diagonal(v) => Some(v.clone()),
            Covariance::Full(_) => None,
        }
    }
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let c = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("covariance is singular".into()))?;
    Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Differential entropy `(d/2)(1 + log 2π) + ½ log det Σ`.
pub fn entropy_gauss(p: &GaussianParams) -> Result<f64> {
    p.validate()?;
    let d = p.dim() as f64;
    Ok(0.5 * d * (1.0 + (2.0 * PI).ln()) + 0.5 * log_det_spd(&p.matrix())?)
}

/// `KL(N(μ₁, Σ₁) ‖ N(μ₂, Σ₂))`.
pub fn kl_gauss(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    shape_check("Gaussian dimension", p.dim(), q.dim())?;
    let (s1, s2) = (p.matrix(), q.matrix());
    let c2 = s2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("covariance is singular".into()))?;
    let dm = DVector::from_iterator(p.dim(), q.mean.iter().zip(&p.mean).map(|(a, b)| a - b));
    let quad = dm.dot(&c2.solve(&dm));
    let trace = c2.solve(&s1).trace();
    let kl = 0.5 * (log_det_spd(&s2)? - log_det_spd(&s1)? - p.dim() as f64 + trace + quad);
    // rounding can push identical arguments slightly below zero
    Ok(kl.max(0.0))
}

/// `KL(Poisson(λ₁) ‖ Poisson(λ₂)) = λ₁ log(λ₁/λ₂) + λ₂ − λ₁`.
pub fn kl_poisson(l1: f64, l2: f64) -> Result<f64> {
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::Precondition(format!("Poisson rates must be positive, got {l1}, {l2}")));
    }
    Ok(l1 * (l1 / l2).ln() + l2 - l1)
}

fn xlogy_ratio(p: f64, r: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / r).ln()
    }
}

/// Jensen–Shannon divergence (natural log) of two mass tables; lies in
/// `[0, log 2]`.
pub fn js_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    shape_check("mass tables", p.len(), q.len())?;
    for (name, t) in [("p", p), ("q", q)] {
        let total: f64 = t.iter().sum();
        if t.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("{name} is not a probability mass table")));
        }
    }
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let r = 0.5 * (a + b);
            xlogy_ratio(a, r) + xlogy_ratio(b, r)
        })
        .sum::<f64>()
        * 0.5;
    Ok(js.clamp(0.0, LN_2))
}

/// 2-Wasserstein distance between Gaussians with scalar or diagonal
/// covariances: `√(|μ₁ − μ₂|² + Σ (√σ₁ᵢ − √σ₂ᵢ)²)`.
pub fn w2_gauss(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    shape_check("Gaussian dimension", p.dim(), q.dim())?;
    let (Some(a), Some(b)) = (p.diagonal(), q.diagonal()) else {
        return Err(Error::Capability("W₂ is only implemented for scalar or diagonal covariances".into()));
    };
    let mean: f64 = p.mean.iter().zip(&q.mean).map(|(x, y)| (x - y).powi(2)).sum();
    let spread: f64 = a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
    Ok((mean + spread).sqrt())
}

#[derive(Clone, Debug)]
pub struct EmPaths {
    /// `X(T)` per path.
    pub terminal: Vec<Vec<f64>>,
    /// `W(T)` per path.
    pub brownian: Vec<Vec<f64>>,
    /// `Σ_k X_k ΔW_k` per path and component when requested.
    pub ito: Option<Vec<Vec<f64>>>,
}

/// Euler–Maruyama for `dX = f(t, X) dt + g(t, X) ⊙ dW` with diagonal noise:
/// `X_{k+1} = X_k + f h_k + g √h_k ζ_k`. Path `i` uses stream `i` of `seed`.
/// A shortened last step covers `T` when `T/h` is not integral.
pub fn euler_maruyama<F, G>(
    drift: F,
    diffusion: G,
    x0: &[f64],
    horizon: f64,
    h: f64,
    seed: u64,
    paths: usize,
    ito: bool,
) -> Result<EmPaths>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    G: Fn(f64, &[f64]) -> Vec<f64>,
{
    let grid = SolverConfig::new(crate::odeflow::Method::Euler, h, horizon).grid()?;
    let d = x0.len();
    let mut out = EmPaths {
        terminal: Vec::with_capacity(paths),
        brownian: Vec::with_capacity(paths),
        ito: ito.then(|| Vec::with_capacity(paths)),
    };
    for i in 0..paths {
        let mut g = rng::stream(seed, i as u64);
        let mut x = x0.to_vec();
        let mut w = vec![0.0; d];
        let mut acc = vec![0.0; d];
        for (k, span) in grid.windows(2).enumerate() {
            let (t, dt) = (span[0], span[1] - span[0]);
            let f = drift(t, &x);
            let s = diffusion(t, &x);
            shape_check("drift", d, f.len())?;
            shape_check("diffusion", d, s.len())?;
            for j in 0..d {
                let dw = dt.sqrt() * rng::normal(&mut g);
                acc[j] += x[j] * dw;
                w[j] += dw;
                x[j] += f[j] * dt + s[j] * dw;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: k + 1, time: span[1], times: Vec::new(), states: Vec::new() });
            }
        }
        out.terminal.push(x);
        out.brownian.push(w);
        if let Some(v) = out.ito.as_mut() {
            v.push(acc);
        }
    }
    Ok(out)
}

/// Mean over paths of `|Σ W_k ΔW_k − (W(T)²/2 − T/2)|` for the pure
/// Brownian motion `X = W`.
pub fn ito_deviation(horizon: f64, h: f64, paths: usize, seed: u64) -> Result<f64> {
    let em = euler_maruyama(|_, _| vec![0.0], |_, _| vec![1.0], &[0.0], horizon, h, seed, paths, true)?;
    let ito = em.ito.expect("requested");
    let total: f64 = ito
        .iter()
        .zip(&em.brownian)
        .map(|(est, w)| (est[0] - (0.5 * w[0] * w[0] - 0.5 * horizon)).abs())
        .sum();
    Ok(total / paths as f64)
}
