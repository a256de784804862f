//! Least-squares and logistic objectives on synthetic data.

use mfdl::objectives::{least_squares, logistic_nll, Dataset, Objective};
use mfdl::optim::{newton_cg, NewtonCgConfig};
use mfdl::rng;

fn main() -> mfdl::Result<()> {
    let mut g = rng::seeded(1);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| rng::normal_vec(&mut g, 2)).collect();
    let y: Vec<f64> = rows.iter().map(|r| 1.5 * r[0] - 0.5 * r[1] + 0.3 + 0.1 * rng::normal(&mut g)).collect();
    let ls = least_squares(&Dataset::from_rows(&rows, &y)?)?;
    let fit = newton_cg(&ls, &vec![0.0; ls.dim()], &NewtonCgConfig::default())?;
    println!("least squares θ = {:.4?}  (f = {:.5})", fit.x, fit.f);

    let labels: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] + r[1] > 0.0))).collect();
    let nll = logistic_nll(&Dataset::from_rows(&rows, &labels)?)?;
    let (f0, g0) = nll.value_grad(&vec![0.0; nll.dim()])?;
    println!("logistic NLL at 0 = {f0:.6} (N log 2 = {:.6}), |∇| = {:.4}", 200.0 * 2f64.ln(), g0.iter().map(|v| v * v).sum::<f64>().sqrt());
    Ok(())
}
