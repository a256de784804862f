//! Fixed-step ODE solvers and neural-ODE adjoints: parameter gradients of a
//! terminal reward, log-density transport, and density-control training.
//!
//! Backward passes integrate the costate on the reversed forward grid and
//! read the state from the stored forward trajectory by linear interpolation.

mod drift;
mod solver;

pub use drift::{DriftGrad, GraphDrift};
pub use solver::{integrate, integrate_on, step, Method, SolverConfig, Trajectory};

use std::time::Instant;

use crate::error::{shape_check, Error, Result};
use crate::objectives::Objective;
use crate::optim::{Trace, TraceRow};
use crate::stochastic::{stochastic_step, Hyper, StochState};

/// Solve `ẋ = f_θ(t, x)` from `x0`.
pub fn ode_solve(drift: &GraphDrift, theta: &[f64], x0: &[f64], cfg: &SolverConfig) -> Result<Trajectory> {
    shape_check("initial state", drift.dim(), x0.len())?;
    integrate(|t, x| drift.eval(t, x, theta), x0, cfg)
}

/// Adjoint state at the initial time together with `J` and `∇θJ`.
#[derive(Clone, Debug)]
pub struct NodeGrad {
    pub value: f64,
    pub grad: Vec<f64>,
    pub p_x: Vec<f64>,
    /// Sensitivity of `J` to the clock coordinate at the start, with the
    /// duration `T` held fixed.
    pub p_tau: f64,
    pub terminal: Vec<f64>,
}

/// `J(θ) = g(x(T))` and its parameter gradient `p_σ(t0)` from the costate
/// system `ṗ_x = −p_x ∂_x f`, `ṗ_τ = −p_x ∂_t f`, `ṗ_σ = −p_x ∂_θ f` with
/// `p(T) = (∇g, 0, 0)`.
pub fn node_grad(
    drift: &GraphDrift,
    theta: &[f64],
    x0: &[f64],
    reward: &dyn Objective,
    cfg: &SolverConfig,
) -> Result<NodeGrad> {
    shape_check("reward dimension", drift.dim(), reward.dim())?;
    let fwd = ode_solve(drift, theta, x0, cfg)?;
    let terminal = fwd.last().to_vec();
    let (value, dg) = reward.value_grad(&terminal)?;
    let d = drift.dim();
    let mut p_end = dg;
    p_end.push(0.0);
    p_end.extend(std::iter::repeat_n(0.0, drift.param_count()));

    let back: Vec<f64> = fwd.times.iter().rev().copied().collect();
    let rhs = |t: f64, p: &[f64]| -> Result<Vec<f64>> {
        let x = fwd.interpolate(t);
        let g = drift.vjp(t, &x, theta, &p[..d])?;
        let mut out: Vec<f64> = g.x.iter().map(|v| -v).collect();
        out.push(-g.t);
        out.extend(g.theta.iter().map(|v| -v));
        Ok(out)
    };
    let adj = integrate_on(cfg.method, rhs, &p_end, &back)?;
    let p0 = adj.last();
    Ok(NodeGrad {
        value,
        grad: p0[d + 1..].to_vec(),
        p_x: p0[..d].to_vec(),
        p_tau: p0[d],
        terminal,
    })
}

/// Transports `(x, log ρ)` jointly with `d/dt log ρ = −∇·f`. Returns the
/// terminal state and log-density.
pub fn logdensity_trace(
    drift: &GraphDrift,
    theta: &[f64],
    x0: &[f64],
    logp0: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64)> {
    shape_check("initial state", drift.dim(), x0.len())?;
    let d = drift.dim();
    let mut z0 = x0.to_vec();
    z0.push(logp0);
    let tr = integrate(
        |t, z| {
            let x = &z[..d];
            let mut out = drift.eval(t, x, theta)?;
            out.push(-drift.divergence(t, x, theta)?);
            Ok(out)
        },
        &z0,
        cfg,
    )?;
    let end = tr.last();
    Ok((end[..d].to_vec(), end[d]))
}

#[derive(Clone, Debug)]
pub struct DensityLoss {
    pub loss: f64,
    /// Entropy term `h_T`.
    pub entropy: f64,
    pub terminal: Vec<Vec<f64>>,
    pub grad: Vec<f64>,
}

const MAX_SAMPLE_DIM: usize = 8;

/// `h_T + (1/2M) Σ|x_T⁽ⁱ⁾|²` with `ḣ = −(1/M) Σ ∇·f(x⁽ⁱ⁾)`, `h_0 = 0`,
/// and its θ-gradient by the adjoint over all particles.
pub fn density_control_loss(
    drift: &GraphDrift,
    theta: &[f64],
    samples: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<DensityLoss> {
    let d = drift.dim();
    let m = samples.len();
    if m == 0 {
        return Err(Error::Argument("density control needs at least one sample".into()));
    }
    if d > MAX_SAMPLE_DIM {
        return Err(Error::Capability(format!("sample dimension {d} exceeds {MAX_SAMPLE_DIM}")));
    }
    let inv_m = 1.0 / m as f64;
    let mut z0 = Vec::with_capacity(m * d + 1);
    for s in samples {
        shape_check("sample", d, s.len())?;
        z0.extend_from_slice(s);
    }
    z0.push(0.0);

    let fwd = integrate(
        |t, z| {
            let mut out = Vec::with_capacity(z.len());
            let mut div = 0.0;
            for x in z[..m * d].chunks(d) {
                out.extend(drift.eval(t, x, theta)?);
                div += drift.divergence(t, x, theta)?;
            }
            out.push(-inv_m * div);
            Ok(out)
        },
        &z0,
        cfg,
    )?;
    let end = fwd.last();
    let entropy = end[m * d];
    let terminal: Vec<Vec<f64>> = end[..m * d].chunks(d).map(<[f64]>::to_vec).collect();
    let quad: f64 = terminal.iter().flatten().map(|v| v * v).sum::<f64>() * 0.5 * inv_m;

    // costate (p_1..p_M, p_σ); p_h ≡ 1 since nothing depends on h
    let n = drift.param_count();
    let mut p_end: Vec<f64> = end[..m * d].iter().map(|v| v * inv_m).collect();
    p_end.extend(std::iter::repeat_n(0.0, n));
    let back: Vec<f64> = fwd.times.iter().rev().copied().collect();
    let rhs = |t: f64, p: &[f64]| -> Result<Vec<f64>> {
        let z = fwd.interpolate(t);
        let mut out = vec![0.0; p.len()];
        for i in 0..m {
            let x = &z[i * d..(i + 1) * d];
            let g = drift.vjp(t, x, theta, &p[i * d..(i + 1) * d])?;
            let (_, dg) = drift.divergence_grad(t, x, theta)?;
            for k in 0..d {
                out[i * d + k] = -g.x[k] + inv_m * dg.x[k];
            }
            for k in 0..n {
                out[m * d + k] += -g.theta[k] + inv_m * dg.theta[k];
            }
        }
        Ok(out)
    };
    let adj = integrate_on(cfg.method, rhs, &p_end, &back)?;
    Ok(DensityLoss {
        loss: entropy + quad,
        entropy,
        terminal,
        grad: adj.last()[m * d..].to_vec(),
    })
}

#[derive(Clone, Debug)]
pub struct DensityTraining {
    pub theta: Vec<f64>,
    pub trace: Trace,
    pub terminal: Vec<Vec<f64>>,
}

/// Full-batch training of the density-control objective with a stochastic
/// optimizer (Adam in the usual setting). Row `k` of the trace holds the loss
/// and gradient norm at the parameters before update `k`.
pub fn train_density_control(
    drift: &GraphDrift,
    theta0: &[f64],
    samples: &[Vec<f64>],
    cfg: &SolverConfig,
    hyper: &Hyper,
    steps: usize,
) -> Result<DensityTraining> {
    shape_check("parameters", drift.param_count(), theta0.len())?;
    let start = Instant::now();
    let mut state = StochState::new(hyper.clone(), theta0.len())?;
    let mut theta = theta0.to_vec();
    let mut trace = Trace::default();
    let mut last = density_control_loss(drift, &theta, samples, cfg)?;
    for k in 0..steps {
        let gn = crate::optim::norm(&last.grad);
        trace.push(TraceRow {
            iter: k,
            f: last.loss,
            grad_norm: gn,
            step: hyper.step_size(state.k),
            ls_count: 0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let (next, st) = stochastic_step(&state, &theta, &last.grad)?;
        theta = next;
        state = st;
        last = density_control_loss(drift, &theta, samples, cfg)?;
    }
    Ok(DensityTraining { theta, trace, terminal: last.terminal })
}
