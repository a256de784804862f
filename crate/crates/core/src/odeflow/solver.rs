use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Midpoint,
    Rk4,
}

impl Method {
    pub fn order(self) -> usize {
        match self {
            Method::Euler => 1,
            Method::Midpoint => 2,
            Method::Rk4 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub h: f64,
    pub t0: f64,
    pub horizon: f64,
}

impl SolverConfig {
    pub fn new(method: Method, h: f64, horizon: f64) -> Self {
        Self { method, h, t0: 0.0, horizon }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.horizon > 0.0 && self.h.is_finite() && self.horizon.is_finite()) {
            return Err(Error::Argument(format!(
                "need h > 0 and T > 0, got h = {}, T = {}",
                self.h, self.horizon
            )));
        }
        Ok(())
    }

    /// Time grid `t0, t0 + h, …, t0 + T`. When `T/h` is not integral the last
    /// step is shortened.
    pub fn grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let ratio = self.horizon / self.h;
        let full = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        let mut times: Vec<f64> = (0..full).map(|k| self.t0 + k as f64 * self.h).collect();
        times.push(self.t0 + self.horizon);
        Ok(times)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Piecewise-linear interpolation of the stored states.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let ts = &self.times;
        let n = ts.len();
        if n == 1 {
            return self.states[0].clone();
        }
        let ascending = ts[n - 1] >= ts[0];
        // index of the segment [k, k+1] containing t
        let pos = if ascending {
            ts.partition_point(|&s| s <= t)
        } else {
            ts.partition_point(|&s| s >= t)
        };
        let k = pos.clamp(1, n - 1) - 1;
        let (a, b) = (ts[k], ts[k + 1]);
        let w = if b == a { 0.0 } else { (t - a) / (b - a) };
        self.states[k]
            .iter()
            .zip(&self.states[k + 1])
            .map(|(x, y)| x + w * (y - x))
            .collect()
    }
}

fn add_scaled(x: &[f64], c: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + c * b).collect()
}

/// One explicit step of size `h` (may be negative).
pub fn step<F>(method: Method, rhs: &mut F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    Ok(match method {
        Method::Euler => add_scaled(x, h, &rhs(t, x)?),
        Method::Midpoint => {
            let k1 = rhs(t, x)?;
            let k2 = rhs(t + h / 2.0, &add_scaled(x, h / 2.0, &k1))?;
            add_scaled(x, h, &k2)
        }
        Method::Rk4 => {
            let k1 = rhs(t, x)?;
            let k2 = rhs(t + h / 2.0, &add_scaled(x, h / 2.0, &k1))?;
            let k3 = rhs(t + h / 2.0, &add_scaled(x, h / 2.0, &k2))?;
            let k4 = rhs(t + h, &add_scaled(x, h, &k3))?;
            x.iter()
                .enumerate()
                .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect()
        }
    })
}

/// Integrates along an explicit time grid (ascending or descending).
/// A non-finite state stops the solve with [`Error::BlowUp`].
pub fn integrate_on<F>(method: Method, mut rhs: F, x0: &[f64], grid: &[f64]) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    let mut times = vec![grid[0]];
    let mut states = vec![x0.to_vec()];
    for (k, w) in grid.windows(2).enumerate() {
        let x = states.last().expect("non-empty");
        let next = step(method, &mut rhs, w[0], x, w[1] - w[0])?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, time: w[1], times, states });
        }
        times.push(w[1]);
        states.push(next);
    }
    Ok(Trajectory { times, states })
}

/// Fixed-step solve of `ẋ = rhs(t, x)` over `[t0, t0 + T]`.
pub fn integrate<F>(rhs: F, x0: &[f64], cfg: &SolverConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    integrate_on(cfg.method, rhs, x0, &cfg.grid()?)
}
