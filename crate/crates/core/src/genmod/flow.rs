use super::{check_time_net, fit, pick, regression_loss, with_time, Fitted, T_MIN};
use crate::error::{shape_check, Error, Result};
use crate::nn::{mlp_forward, MlpSpec};
use crate::odeflow::{step, Method};
use crate::rng;
use crate::stochastic::Hyper;

/// Data points `z`, base draws `ε` and times `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FmBatch {
    pub z: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl FmBatch {
    pub fn sample(data: &[Vec<f64>], m: usize, g: &mut rng::Rng) -> Self {
        let mut b = Self { z: Vec::with_capacity(m), eps: Vec::with_capacity(m), t: Vec::with_capacity(m) };
        for _ in 0..m {
            let z = pick(data, g).to_vec();
            b.eps.push(rng::normal_vec(g, z.len()));
            b.z.push(z);
            b.t.push(rng::uniform(g));
        }
        b
    }

    fn validate(&self) -> Result<usize> {
        let m = self.z.len();
        if m == 0 || self.eps.len() != m || self.t.len() != m {
            return Err(Error::Shape("batch needs equally many z, ε and t entries (≥ 1)".into()));
        }
        let d = self.z[0].len();
        for (z, e) in self.z.iter().zip(&self.eps) {
            shape_check("data point", d, z.len())?;
            shape_check("base draw", d, e.len())?;
        }
        let finite = |v: &Vec<f64>| v.iter().all(|x| x.is_finite());
        if !(self.z.iter().all(finite) && self.eps.iter().all(finite) && self.t.iter().all(|t| t.is_finite())) {
            return Err(Error::Domain("batch has non-finite entries".into()));
        }
        Ok(d)
    }

    /// Network inputs `(t z + (1 − t) ε, t)` and regression targets `z − ε`.
    fn pairs(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        self.z
            .iter()
            .zip(&self.eps)
            .zip(&self.t)
            .map(|((z, e), &t)| {
                let x: Vec<f64> = z.iter().zip(e).map(|(z, e)| t * z + (1.0 - t) * e).collect();
                (with_time(&x, t), fm_target(z, e))
            })
            .unzip()
    }
}

/// Regression target of the straight-line path from `ε` to `z`.
pub fn fm_target(z: &[f64], eps: &[f64]) -> Vec<f64> {
    z.iter().zip(eps).map(|(a, b)| a - b).collect()
}

/// Mean squared flow-matching residual for an arbitrary field `u(t, x)`.
pub fn fm_loss_with<F>(field: F, batch: &FmBatch) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    batch.validate()?;
    let (inputs, targets) = batch.pairs();
    let mut total = 0.0;
    for (z, y) in inputs.iter().zip(&targets) {
        let (x, t) = z.split_at(z.len() - 1);
        let u = field(t[0], x)?;
        total += u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / inputs.len() as f64)
}

/// Flow-matching loss of an MLP field and its parameter gradient.
pub fn fm_loss(spec: &MlpSpec, theta: &[f64], batch: &FmBatch) -> Result<(f64, Vec<f64>)> {
    let d = batch.validate()?;
    check_time_net(spec, d)?;
    let (inputs, targets) = batch.pairs();
    regression_loss(spec, theta, &inputs, &targets)
}

pub fn train_fm(
    spec: &MlpSpec,
    theta0: &[f64],
    data: &[Vec<f64>],
    hyper: &Hyper,
    steps: usize,
    batch: usize,
    seed: u64,
) -> Result<Fitted> {
    if data.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    check_time_net(spec, data[0].len())?;
    let mut g = rng::seeded(seed);
    fit(theta0, hyper, steps, |_, theta| fm_loss(spec, theta, &FmBatch::sample(data, batch, &mut g)))
}

/// Pushes `n` draws of `N(0, I_d)` through `ẋ = u(t, x)` with RK4 on
/// `[0, 1 − t_min]`. Sample `i` takes its initial draw from stream `i`.
pub fn fm_sample_with<F>(field: F, dim: usize, n: usize, steps: usize, seed: u64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let h = if steps == 0 { 0.0 } else { (1.0 - T_MIN) / steps as f64 };
    let mut rhs = |t: f64, x: &[f64]| field(t, x);
    (0..n)
        .map(|i| {
            let mut x = rng::normal_vec(&mut rng::stream(seed, i as u64), dim);
            for k in 0..steps {
                x = step(Method::Rk4, &mut rhs, k as f64 * h, &x, h)?;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { step: k + 1, time: (k + 1) as f64 * h, times: Vec::new(), states: Vec::new() });
                }
            }
            Ok(x)
        })
        .collect()
}

pub fn fm_sample(spec: &MlpSpec, theta: &[f64], n: usize, steps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = spec.output_dim();
    check_time_net(spec, d)?;
    fm_sample_with(|t, x| mlp_forward(spec, theta, &with_time(x, t)), d, n, steps, seed)
}
