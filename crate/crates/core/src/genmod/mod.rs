//! Small generative models: diffusion with OU / VP noising, flow matching,
//! and the VAE evidence lower bound.
//!
//! Networks are plain MLPs. Time-conditioned nets take `(x, t)` as input, so
//! their first layer is `d + 1` wide.

mod diffusion;
mod flow;
mod vae;

pub use diffusion::{
    denoise_loss, denoise_loss_with, diffusion_sample, eps_net_score, train_denoiser, DenoiseBatch, SampleMode,
};
pub use flow::{fm_loss, fm_loss_with, fm_sample, fm_sample_with, fm_target, train_fm, FmBatch};
pub use vae::{
    gaussian_log_evidence, train_vae, vae_elbo, vae_elbo_with_noise, vae_sample, ElboOutput, VaeNets, SIGMA_FLOOR,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::nn::{mlp_backward, mlp_forward_cached, MlpSpec};
use crate::optim::{Trace, TraceRow};
use crate::rng::{self, Rng};
use crate::stochastic::{stochastic_step, Hyper, StochState};

/// Lower time cutoff for samplers and denoising targets.
pub const T_MIN: f64 = 1e-3;

const XI_KNOTS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ScheduleKind {
    /// `dX = −aX dt + √(2a) dW`.
    Ou { a: f64 },
    /// `dX = −γ_t X dt + √(2γ_t) dW` with `γ_t = γ_min + t(γ_max − γ_min)`.
    Vp { gamma_min: f64, gamma_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub horizon: f64,
}

impl Schedule {
    pub fn ou(a: f64, horizon: f64) -> Result<Self> {
        let s = Self { kind: ScheduleKind::Ou { a }, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn vp(gamma_min: f64, gamma_max: f64, horizon: f64) -> Result<Self> {
        let s = Self { kind: ScheduleKind::Vp { gamma_min, gamma_max }, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.horizon > 0.0
            && match self.kind {
                ScheduleKind::Ou { a } => a > 0.0,
                ScheduleKind::Vp { gamma_min, gamma_max } => gamma_min > 0.0 && gamma_min <= gamma_max,
            };
        if !ok {
            return Err(Error::Argument(format!("invalid schedule {self:?}")));
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// `∫₀ᵗ γ_τ dτ`.
    fn integrated_rate(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Ou { a } => a * t,
            ScheduleKind::Vp { gamma_min, gamma_max } => t * gamma_min + 0.5 * t * t * (gamma_max - gamma_min),
        }
    }

    /// Noising rate `γ_t` (constant `a` for OU).
    pub fn rate(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Ou { a } => a,
            ScheduleKind::Vp { gamma_min, gamma_max } => gamma_min + t * (gamma_max - gamma_min),
        }
    }

    /// `(α_t, β_t)` with `X_t | x₀ ~ N(α_t x₀, β_t² I)`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        let g = self.integrated_rate(t);
        // 1 − e^{−2g} without cancellation for small g
        Ok(((-g).exp(), (-(-2.0 * g).exp_m1()).sqrt()))
    }

    /// Forward drift coefficient: `f_t(x) = −γ_t x`.
    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let c = self.rate(t);
        x.iter().map(|v| -c * v).collect()
    }

    /// Squared diffusion coefficient `g_t² = 2γ_t`.
    pub fn diffusion_sq(&self, t: f64) -> f64 {
        2.0 * self.rate(t)
    }
}

/// Inverse-CDF sampler for the time density `ξ(t) ∝ β_t²` on `[t_min, T]`,
/// tabulated on 1024 knots.
#[derive(Clone, Debug)]
pub struct TimeSampler {
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl TimeSampler {
    pub fn new(sched: &Schedule, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < sched.horizon) {
            return Err(Error::Argument(format!("t_min = {t_min} must lie in (0, T)")));
        }
        let h = (sched.horizon - t_min) / (XI_KNOTS - 1) as f64;
        let knots: Vec<f64> = (0..XI_KNOTS).map(|i| t_min + i as f64 * h).collect();
        let dens: Vec<f64> = knots.iter().map(|&t| sched.eval(t).map(|(_, b)| b * b)).collect::<Result<_>>()?;
        let mut cdf = vec![0.0; XI_KNOTS];
        for i in 1..XI_KNOTS {
            cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
        }
        let total = cdf[XI_KNOTS - 1];
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { knots, cdf })
    }

    pub fn sample(&self, g: &mut Rng) -> f64 {
        let u = rng::uniform(g);
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, XI_KNOTS - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.knots[k - 1] + w * (self.knots[k] - self.knots[k - 1])
    }
}

/// Time-conditioned MLP `(x, t) ↦ R^d`.
pub(crate) fn check_time_net(spec: &MlpSpec, d: usize) -> Result<()> {
    shape_check("time-conditioned net input", d + 1, spec.input_dim())?;
    shape_check("time-conditioned net output", d, spec.output_dim())
}

pub(crate) fn with_time(x: &[f64], t: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    z.push(t);
    z
}

/// Batch mean of `|net(x_i, t_i) − y_i|²` and its θ-gradient.
pub(crate) fn regression_loss(
    spec: &MlpSpec,
    theta: &[f64],
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    let m = inputs.len();
    if m == 0 {
        return Err(Error::Argument("empty batch".into()));
    }
    let scale = 1.0 / m as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (z, y) in inputs.iter().zip(targets) {
        let cache = mlp_forward_cached(spec, theta, z)?;
        let resid: Vec<f64> = cache.output.iter().zip(y).map(|(a, b)| a - b).collect();
        loss += resid.iter().map(|r| r * r).sum::<f64>();
        let up: Vec<f64> = resid.iter().map(|r| 2.0 * scale * r).collect();
        let (gt, _) = mlp_backward(spec, theta, &cache, &up)?;
        for (a, b) in grad.iter_mut().zip(gt) {
            *a += b;
        }
    }
    Ok((loss * scale, grad))
}

#[derive(Clone, Debug)]
pub struct Fitted {
    pub theta: Vec<f64>,
    pub trace: Trace,
}

/// Runs `steps` optimizer updates; `loss_grad(k, θ)` supplies the minibatch
/// loss and gradient for update `k`.
pub fn fit<F>(theta0: &[f64], hyper: &Hyper, steps: usize, mut loss_grad: F) -> Result<Fitted>
where
    F: FnMut(usize, &[f64]) -> Result<(f64, Vec<f64>)>,
{
    let start = Instant::now();
    let mut state = StochState::new(hyper.clone(), theta0.len())?;
    let mut theta = theta0.to_vec();
    let mut trace = Trace::default();
    for k in 0..steps {
        let (loss, grad) = loss_grad(k, &theta)?;
        trace.push(TraceRow {
            iter: k,
            f: loss,
            grad_norm: crate::optim::norm(&grad),
            step: hyper.step_size(state.k),
            ls_count: 0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let (next, st) = stochastic_step(&state, &theta, &grad)?;
        theta = next;
        state = st;
    }
    Ok(Fitted { theta, trace })
}

/// Row `i` of the data drawn uniformly.
pub(crate) fn pick<'a>(data: &'a [Vec<f64>], g: &mut Rng) -> &'a [f64] {
    use rand::Rng as _;
    &data[g.random_range(0..data.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let ou = Schedule::ou(1.0, 5.0).unwrap();
        assert_eq!(ou.eval(0.0).unwrap(), (1.0, 0.0));
        let (a, b) = ou.eval(2f64.ln()).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.75f64.sqrt()).abs() < 1e-15);
        for i in 0..=100 {
            let (a, b) = ou.eval(i as f64 * 0.05).unwrap();
            assert!((a * a + b * b - 1.0).abs() < 1e-12);
        }
        assert!(ou.eval(5.1).is_err());
    }

    #[test]
    fn vp_monotone() {
        let vp = Schedule::vp(0.1, 20.0, 1.0).unwrap();
        let mut prev = vp.eval(0.0).unwrap();
        for i in 1..=200 {
            let cur = vp.eval(i as f64 / 200.0).unwrap();
            assert!(cur.0 < prev.0 && cur.1 > prev.1);
            prev = cur;
        }
        assert!(Schedule::vp(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn time_sampler_follows_noise_level() {
        let ou = Schedule::ou(1.0, 1.0).unwrap();
        let ts = TimeSampler::new(&ou, T_MIN).unwrap();
        let mut g = rng::seeded(0);
        let draws: Vec<f64> = (0..20_000).map(|_| ts.sample(&mut g)).collect();
        assert!(draws.iter().all(|&t| (T_MIN..=1.0).contains(&t)));
        // ξ ∝ 1 − e^{−2t} on [0, 1]: mean = ∫t(1 − e^{−2t}) / ∫(1 − e^{−2t})
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let e2 = (-2f64).exp();
        let exact = (0.5 - (0.25 - 0.75 * e2)) / (1.0 - 0.5 * (1.0 - e2));
        assert!((mean - exact).abs() < 0.01, "{mean} vs {exact}");
    }
}
