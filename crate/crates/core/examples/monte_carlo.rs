//! Importance sampling, Gaussian divergences and an Euler–Maruyama Itô check.

use mfdl::statutil::{importance_estimate, ito_deviation, kl_gauss, w2_gauss, Covariance, GaussianParams, IsoGaussian};

fn main() -> mfdl::Result<()> {
    // ∫ exp(−x²) dx = √π with a wider Gaussian proposal
    let prop = IsoGaussian { mean: vec![0.0], sd: 1.0 };
    for n in [100, 10_000, 1_000_000] {
        let (est, se) = importance_estimate(|x| (-x[0] * x[0]).exp(), &prop, n, 5)?;
        println!("N = {n:>7}: {est:.5} ± {se:.5}  (√π = {:.5})", std::f64::consts::PI.sqrt());
    }

    let p = GaussianParams::new(vec![0.0, 0.0], Covariance::Diagonal(vec![1.0, 2.0]))?;
    let q = GaussianParams::new(vec![1.0, -1.0], Covariance::Scalar(1.5))?;
    println!("KL(p‖q) = {:.6}, KL(q‖p) = {:.6}, W₂ = {:.6}", kl_gauss(&p, &q)?, kl_gauss(&q, &p)?, w2_gauss(&p, &q)?);

    for h in [0.1, 0.05, 0.025, 0.0125] {
        println!("h = {h:<6}: mean |Σ W dW − (W²−T)/2| = {:.5}", ito_deviation(1.0, h, 2000, 9)?);
    }
    Ok(())
}
