//! Flow matching and an ε-prediction diffusion model on a 2-D Gaussian.

use mfdl::genmod::{diffusion_sample, eps_net_score, fm_sample, train_denoiser, train_fm, SampleMode, Schedule};
use mfdl::nn::{mlp_init, Activation, MlpSpec, Wrapper};
use mfdl::rng;
use mfdl::stochastic::{Hyper, Method};

fn mean(xs: &[Vec<f64>]) -> [f64; 2] {
    let n = xs.len() as f64;
    [xs.iter().map(|x| x[0]).sum::<f64>() / n, xs.iter().map(|x| x[1]).sum::<f64>() / n]
}

fn main() -> mfdl::Result<()> {
    let mut g = rng::seeded(0);
    let data: Vec<Vec<f64>> = (0..512).map(|_| vec![2.0 + 0.5 * rng::normal(&mut g), 2.0 + 0.5 * rng::normal(&mut g)]).collect();
    let spec = MlpSpec::new(vec![3, 32, 32, 2], Activation::Tanh, Wrapper::None)?;
    let hyper = Hyper { alpha: 1e-2, ..Hyper::new(Method::Adam) };

    let fm = train_fm(&spec, &mlp_init(&spec, 1).0, &data, &hyper, 1000, 64, 2)?;
    let xs = fm_sample(&spec, &fm.theta, 1000, 100, 3)?;
    println!("flow matching: sample mean {:.3?}", mean(&xs));

    let sched = Schedule::ou(1.0, 5.0)?;
    let dn = train_denoiser(&spec, &mlp_init(&spec, 1).0, &data, &sched, &hyper, 1000, 64, 2)?;
    let xs = diffusion_sample(eps_net_score(&spec, &dn.theta, &sched), &sched, SampleMode::PfOde, 2, 1000, 200, 3)?;
    println!("diffusion (probability flow): sample mean {:.3?}", mean(&xs));
    Ok(())
}
