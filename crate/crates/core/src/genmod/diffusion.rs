use serde::{Deserialize, Serialize};

use super::{check_time_net, fit, pick, regression_loss, with_time, Fitted, Schedule, TimeSampler, T_MIN};
use crate::error::{shape_check, Error, Result};
use crate::nn::{mlp_forward, MlpSpec};
use crate::odeflow::{step, Method};
use crate::rng;
use crate::stochastic::Hyper;

/// Data points, their noise draws and noising times.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseBatch {
    pub x0: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl DenoiseBatch {
    /// `m` rows drawn from `data` with times from `ξ ∝ β_t²`.
    pub fn sample(data: &[Vec<f64>], sampler: &TimeSampler, m: usize, g: &mut rng::Rng) -> Self {
        let mut b = Self { x0: Vec::with_capacity(m), eps: Vec::with_capacity(m), t: Vec::with_capacity(m) };
        for _ in 0..m {
            let x = pick(data, g).to_vec();
            b.eps.push(rng::normal_vec(g, x.len()));
            b.x0.push(x);
            b.t.push(sampler.sample(g));
        }
        b
    }

    fn validate(&self, sched: &Schedule) -> Result<usize> {
        let m = self.x0.len();
        if m == 0 || self.eps.len() != m || self.t.len() != m {
            return Err(Error::Shape("batch needs equally many x₀, ε and t entries (≥ 1)".into()));
        }
        let d = self.x0[0].len();
        for (x, e) in self.x0.iter().zip(&self.eps) {
            shape_check("data point", d, x.len())?;
            shape_check("noise draw", d, e.len())?;
        }
        if let Some(t) = self.t.iter().find(|&&t| !(T_MIN..=sched.horizon).contains(&t)) {
            return Err(Error::Precondition(format!("time {t} outside [{T_MIN}, {}]", sched.horizon)));
        }
        Ok(d)
    }

    /// Network inputs `(α_t x₀ + β_t ε, t)`.
    fn noised(&self, sched: &Schedule) -> Result<Vec<Vec<f64>>> {
        self.x0
            .iter()
            .zip(&self.eps)
            .zip(&self.t)
            .map(|((x, e), &t)| {
                let (a, b) = sched.eval(t)?;
                let xt: Vec<f64> = x.iter().zip(e).map(|(x, e)| a * x + b * e).collect();
                Ok(with_time(&xt, t))
            })
            .collect()
    }
}

/// Mean `|ε̂(α_t x₀ + β_t ε, t) − ε|²` for an arbitrary predictor.
pub fn denoise_loss_with<F>(predict: F, sched: &Schedule, batch: &DenoiseBatch) -> Result<f64>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    batch.validate(sched)?;
    let inputs = batch.noised(sched)?;
    let mut total = 0.0;
    for (z, e) in inputs.iter().zip(&batch.eps) {
        let (x, t) = z.split_at(z.len() - 1);
        let p = predict(x, t[0])?;
        total += p.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / inputs.len() as f64)
}

/// Denoising loss of an ε-prediction MLP and its parameter gradient.
pub fn denoise_loss(spec: &MlpSpec, theta: &[f64], sched: &Schedule, batch: &DenoiseBatch) -> Result<(f64, Vec<f64>)> {
    let d = batch.validate(sched)?;
    check_time_net(spec, d)?;
    regression_loss(spec, theta, &batch.noised(sched)?, &batch.eps)
}

/// Score estimate `s_t(x) = −ε̂(x, t)/β_t` from an ε-prediction MLP.
pub fn eps_net_score<'a>(
    spec: &'a MlpSpec,
    theta: &'a [f64],
    sched: &'a Schedule,
) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>> + 'a {
    move |t, x| {
        let (_, b) = sched.eval(t)?;
        Ok(mlp_forward(spec, theta, &with_time(x, t))?.iter().map(|e| -e / b).collect())
    }
}

/// Minibatch training of an ε-prediction net.
pub fn train_denoiser(
    spec: &MlpSpec,
    theta0: &[f64],
    data: &[Vec<f64>],
    sched: &Schedule,
    hyper: &Hyper,
    steps: usize,
    batch: usize,
    seed: u64,
) -> Result<Fitted> {
    if data.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    check_time_net(spec, data[0].len())?;
    let sampler = TimeSampler::new(sched, T_MIN)?;
    let mut g = rng::seeded(seed);
    fit(theta0, hyper, steps, |_, theta| {
        let b = DenoiseBatch::sample(data, &sampler, batch, &mut g);
        denoise_loss(spec, theta, sched, &b)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Euler–Maruyama on the reverse SDE.
    Em,
    /// RK4 on the probability-flow ODE.
    PfOde,
}

/// Generates `n` samples by running the reverse process from `N(0, I_d)` at
/// forward time `T` down to `t_min`, in `steps` equal steps. Sample `i`
/// draws all of its noise from its own stream of `seed`.
///
/// Reverse SDE: `dZ = (−f_{T−s}(Z) + g²_{T−s} s_{T−s}(Z)) ds + g_{T−s} dW`.
/// Probability flow: `ż = −f_{T−s}(z) + ½ g²_{T−s} s_{T−s}(z)`.
pub fn diffusion_sample<S>(
    score: S,
    sched: &Schedule,
    mode: SampleMode,
    dim: usize,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>>
where
    S: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    sched.validate()?;
    let span = sched.horizon - T_MIN;
    let h = if steps == 0 { 0.0 } else { span / steps as f64 };
    let field = |s: f64, z: &[f64], weight: f64| -> Result<Vec<f64>> {
        let t = (sched.horizon - s).max(T_MIN);
        let sc = score(t, z)?;
        let c = sched.rate(t);
        let g2 = sched.diffusion_sq(t);
        Ok(z.iter().zip(&sc).map(|(x, q)| c * x + weight * g2 * q).collect())
    };
    (0..n)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let mut z = rng::normal_vec(&mut g, dim);
            for k in 0..steps {
                let s = k as f64 * h;
                z = match mode {
                    SampleMode::Em => {
                        let drift = field(s, &z, 1.0)?;
                        let gt = sched.diffusion_sq(sched.horizon - s).sqrt();
                        z.iter()
                            .zip(&drift)
                            .map(|(x, f)| x + f * h + gt * h.sqrt() * rng::normal(&mut g))
                            .collect()
                    }
                    SampleMode::PfOde => step(Method::Rk4, &mut |s, z: &[f64]| field(s, z, 0.5), s, &z, h)?,
                };
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { step: k + 1, time: s + h, times: Vec::new(), states: Vec::new() });
                }
            }
            Ok(z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_init, Activation, Wrapper};

    fn moments(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = xs.len() as f64;
        let d = xs[0].len();
        let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let cov = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0))
                    .collect()
            })
            .collect();
        (mean, cov)
    }

    #[test]
    fn zero_predictor_loss_is_noise_energy() {
        let sched = Schedule::ou(1.0, 1.0).unwrap();
        let mut g = rng::seeded(1);
        let data: Vec<Vec<f64>> = (0..50).map(|_| rng::normal_vec(&mut g, 3)).collect();
        let b = DenoiseBatch::sample(&data, &TimeSampler::new(&sched, T_MIN).unwrap(), 4000, &mut g);
        let l = denoise_loss_with(|x, _| Ok(vec![0.0; x.len()]), &sched, &b).unwrap();
        assert!((l - 3.0).abs() < 0.15, "{l}");
        let exact = std::cell::Cell::new(0);
        let perfect = denoise_loss_with(
            |_, _| {
                let i = exact.get();
                exact.set(i + 1);
                Ok(b.eps[i].clone())
            },
            &sched,
            &b,
        )
        .unwrap();
        assert_eq!(perfect, 0.0);
    }

    #[test]
    fn early_times_rejected() {
        let sched = Schedule::ou(1.0, 1.0).unwrap();
        let b = DenoiseBatch { x0: vec![vec![0.0]], eps: vec![vec![1.0]], t: vec![1e-4] };
        let spec = MlpSpec::new(vec![2, 3, 1], Activation::Tanh, Wrapper::None).unwrap();
        let theta = mlp_init(&spec, 0).0;
        assert!(matches!(denoise_loss(&spec, &theta, &sched, &b), Err(Error::Precondition(_))));
    }

    #[test]
    fn denoise_gradient_matches_finite_differences() {
        let sched = Schedule::vp(0.1, 5.0, 1.0).unwrap();
        let spec = MlpSpec::new(vec![3, 5, 2], Activation::Tanh, Wrapper::None).unwrap();
        let theta = mlp_init(&spec, 3).0;
        let mut g = rng::seeded(2);
        let data: Vec<Vec<f64>> = (0..8).map(|_| rng::normal_vec(&mut g, 2)).collect();
        let b = DenoiseBatch::sample(&data, &TimeSampler::new(&sched, T_MIN).unwrap(), 6, &mut g);
        let (_, grad) = denoise_loss(&spec, &theta, &sched, &b).unwrap();
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let fd = (denoise_loss(&spec, &tp, &sched, &b).unwrap().0 - denoise_loss(&spec, &tm, &sched, &b).unwrap().0)
                / (2.0 * h);
            assert!((grad[i] - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "{i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn samplers_preserve_standard_gaussian() {
        let sched = Schedule::ou(1.0, 2.0).unwrap();
        let score = |_: f64, x: &[f64]| Ok(x.iter().map(|v| -v).collect());
        for mode in [SampleMode::PfOde, SampleMode::Em] {
            let xs = diffusion_sample(score, &sched, mode, 2, 3000, 100, 7).unwrap();
            let (mean, cov) = moments(&xs);
            assert!(mean.iter().all(|m| m.abs() < 0.06), "{mode:?} {mean:?}");
            for i in 0..2 {
                for j in 0..2 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((cov[i][j] - target).abs() < 0.1, "{mode:?} {cov:?}");
                }
            }
        }
    }

    #[test]
    fn zero_steps_and_reproducibility() {
        let sched = Schedule::ou(1.0, 1.0).unwrap();
        let score = |_: f64, x: &[f64]| Ok(x.iter().map(|v| -2.0 * v).collect());
        let init = diffusion_sample(score, &sched, SampleMode::Em, 3, 5, 0, 9).unwrap();
        let expect: Vec<Vec<f64>> = (0..5).map(|i| rng::normal_vec(&mut rng::stream(9, i), 3)).collect();
        assert_eq!(init, expect);
        let a = diffusion_sample(score, &sched, SampleMode::Em, 3, 5, 20, 9).unwrap();
        let b = diffusion_sample(score, &sched, SampleMode::Em, 3, 5, 20, 9).unwrap();
        assert_eq!(a, b);
    }
}
