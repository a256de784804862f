use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{fit, Fitted};
use crate::error::{shape_check, Error, Result};
use crate::nn::{mlp_backward, mlp_forward, mlp_forward_cached, sigmoid, MlpSpec};
use crate::rng;
use crate::stochastic::Hyper;

/// Lower bound on encoder and decoder standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Encoder `x ↦ (μ_η(x), raw σ)` of width `d → m + 1` and decoder
/// `z ↦ (μ_θ(z), raw σ)` of width `m → d + 1`. The last output of each net
/// passes through softplus and is floored at [`SIGMA_FLOOR`].
#[derive(Clone, Debug, PartialEq)]
pub struct VaeNets {
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
}

impl VaeNets {
    pub fn new(encoder: MlpSpec, decoder: MlpSpec) -> Result<Self> {
        let d = encoder.input_dim();
        let m = decoder.input_dim();
        shape_check("encoder outputs (latent + σ)", m + 1, encoder.output_dim())?;
        shape_check("decoder outputs (data + σ)", d + 1, decoder.output_dim())?;
        Ok(Self { encoder, decoder })
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder.input_dim()
    }

    pub fn param_counts(&self) -> (usize, usize) {
        (self.encoder.param_count(), self.decoder.param_count())
    }
}

fn softplus(r: f64) -> f64 {
    r.max(0.0) + (-r.abs()).exp().ln_1p()
}

/// `(σ, dσ/draw, clamped)`.
fn sigma(raw: f64) -> (f64, f64, bool) {
    let s = softplus(raw);
    if s < SIGMA_FLOOR {
        (SIGMA_FLOOR, 0.0, true)
    } else {
        (s, sigmoid(raw), false)
    }
}

#[derive(Clone, Debug)]
pub struct ElboOutput {
    /// Batch mean of `−(A − B)`.
    pub loss: f64,
    /// Batch mean of the reconstruction term `A`.
    pub recon: f64,
    /// Batch mean of the KL term `B`.
    pub kl: f64,
    pub grad_eta: Vec<f64>,
    pub grad_theta: Vec<f64>,
    /// Standard deviations raised to the floor.
    pub clamped: usize,
}

/// Single-sample ELBO estimate with the reparameterization noise supplied:
/// `z = μ_η(x) + σ_η(x) ε`, `A = log N(x; μ_θ(z), σ_θ(z)² I)` and
/// `B = ½(mσ_η² + |μ_η|² − m − 2m log σ_η)`.
pub fn vae_elbo_with_noise(
    nets: &VaeNets,
    eta: &[f64],
    theta: &[f64],
    batch: &[Vec<f64>],
    noise: &[Vec<f64>],
) -> Result<ElboOutput> {
    let (d, m) = (nets.data_dim(), nets.latent_dim());
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    shape_check("noise rows", batch.len(), noise.len())?;
    let scale = 1.0 / batch.len() as f64;
    let (mf, df) = (m as f64, d as f64);
    let mut out = ElboOutput {
        loss: 0.0,
        recon: 0.0,
        kl: 0.0,
        grad_eta: vec![0.0; eta.len()],
        grad_theta: vec![0.0; theta.len()],
        clamped: 0,
    };
    for (x, eps) in batch.iter().zip(noise) {
        shape_check("data point", d, x.len())?;
        shape_check("noise draw", m, eps.len())?;
        let enc = mlp_forward_cached(&nets.encoder, eta, x)?;
        let mu_e = &enc.output[..m];
        let (s_e, ds_e, c_e) = sigma(enc.output[m]);
        let z: Vec<f64> = mu_e.iter().zip(eps).map(|(mu, e)| mu + s_e * e).collect();
        let dec = mlp_forward_cached(&nets.decoder, theta, &z)?;
        let mu_d = &dec.output[..d];
        let (s_d, ds_d, c_d) = sigma(dec.output[d]);
        out.clamped += usize::from(c_e) + usize::from(c_d);

        let resid: Vec<f64> = x.iter().zip(mu_d).map(|(a, b)| a - b).collect();
        let r2: f64 = resid.iter().map(|r| r * r).sum();
        let a = -r2 / (2.0 * s_d * s_d) - 0.5 * df * (2.0 * PI * s_d * s_d).ln();
        let mu2: f64 = mu_e.iter().map(|v| v * v).sum();
        let b = 0.5 * (mf * s_e * s_e + mu2 - mf - 2.0 * mf * s_e.ln());
        out.recon += scale * a;
        out.kl += scale * b;
        out.loss += scale * (b - a);

        // decoder: ∂(−A)/∂μ_θ and ∂(−A)/∂σ_θ
        let mut up_d: Vec<f64> = resid.iter().map(|r| -scale * r / (s_d * s_d)).collect();
        up_d.push(scale * (-r2 / s_d.powi(3) + df / s_d) * ds_d);
        let (g_theta, g_z) = mlp_backward(&nets.decoder, theta, &dec, &up_d)?;
        for (acc, v) in out.grad_theta.iter_mut().zip(g_theta) {
            *acc += v;
        }
        // encoder: through z = μ + σε and through B
        let mut up_e: Vec<f64> = g_z.iter().zip(mu_e).map(|(gz, mu)| gz + scale * mu).collect();
        let d_sigma_e = g_z.iter().zip(eps).map(|(gz, e)| gz * e).sum::<f64>() + scale * (mf * s_e - mf / s_e);
        up_e.push(d_sigma_e * ds_e);
        let (g_eta, _) = mlp_backward(&nets.encoder, eta, &enc, &up_e)?;
        for (acc, v) in out.grad_eta.iter_mut().zip(g_eta) {
            *acc += v;
        }
    }
    Ok(out)
}

/// Single-sample ELBO estimate; row `i` draws its `ε` from stream `i` of
/// `seed`.
pub fn vae_elbo(nets: &VaeNets, eta: &[f64], theta: &[f64], batch: &[Vec<f64>], seed: u64) -> Result<ElboOutput> {
    let m = nets.latent_dim();
    let noise: Vec<Vec<f64>> = (0..batch.len()).map(|i| rng::normal_vec(&mut rng::stream(seed, i as u64), m)).collect();
    vae_elbo_with_noise(nets, eta, theta, batch, &noise)
}

/// Trains encoder and decoder jointly; the optimizer sees `[η, θ]`.
pub fn train_vae(
    nets: &VaeNets,
    eta0: &[f64],
    theta0: &[f64],
    data: &[Vec<f64>],
    hyper: &Hyper,
    steps: usize,
    batch: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, Fitted)> {
    if data.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    let ne = eta0.len();
    let mut start = eta0.to_vec();
    start.extend_from_slice(theta0);
    let mut g = rng::seeded(seed);
    let fitted = fit(&start, hyper, steps, |k, p| {
        let rows: Vec<Vec<f64>> = (0..batch).map(|_| super::pick(data, &mut g).to_vec()).collect();
        let out = vae_elbo(nets, &p[..ne], &p[ne..], &rows, seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))?;
        let mut grad = out.grad_eta;
        grad.extend(out.grad_theta);
        Ok((out.loss, grad))
    })?;
    let (eta, theta) = fitted.theta.split_at(ne);
    Ok((eta.to_vec(), theta.to_vec(), fitted))
}

/// Draws `x = μ_θ(z) + σ_θ(z) ζ` with `z, ζ` standard normal.
pub fn vae_sample(nets: &VaeNets, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let (d, m) = (nets.data_dim(), nets.latent_dim());
    (0..n)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let z = rng::normal_vec(&mut g, m);
            let out = mlp_forward(&nets.decoder, theta, &z)?;
            let (s, _, _) = sigma(out[d]);
            Ok(out[..d].iter().map(|mu| mu + s * rng::normal(&mut g)).collect())
        })
        .collect()
}

/// `log N(x; b, WWᵀ + σ²I)`: the exact evidence of the linear-Gaussian model
/// `z ~ N(0, I_m)`, `x | z ~ N(Wz + b, σ²I_d)`.
pub fn gaussian_log_evidence(w: &DMatrix<f64>, b: &[f64], sigma: f64, x: &[f64]) -> Result<f64> {
    let d = w.nrows();
    shape_check("offset", d, b.len())?;
    shape_check("data point", d, x.len())?;
    let cov = w * w.transpose() + DMatrix::identity(d, d) * (sigma * sigma);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Precondition("evidence covariance is not positive definite".into()))?;
    let r = DVector::from_iterator(d, x.iter().zip(b).map(|(x, b)| x - b));
    let sol = chol.solve(&r);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * (r.dot(&sol) + logdet + d as f64 * (2.0 * PI).ln()))
}
