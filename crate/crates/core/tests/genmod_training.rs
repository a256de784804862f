use mfdl::genmod::{fm_sample, train_denoiser, train_fm, Schedule};
use mfdl::nn::{mlp_forward, mlp_init, Activation, MlpSpec, Wrapper};
use mfdl::rng;
use mfdl::stochastic::{self, Hyper, Method};

fn gaussian(n: usize, mean: [f64; 2], sd: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng::seeded(seed);
    (0..n).map(|_| vec![mean[0] + sd * rng::normal(&mut g), mean[1] + sd * rng::normal(&mut g)]).collect()
}

fn mean(xs: &[Vec<f64>]) -> [f64; 2] {
    let n = xs.len() as f64;
    [xs.iter().map(|x| x[0]).sum::<f64>() / n, xs.iter().map(|x| x[1]).sum::<f64>() / n]
}

fn adam(alpha: f64) -> Hyper {
    Hyper { alpha, ..Hyper::new(Method::Adam) }
}

/// Adam with `α_k = 1/(k + 100)`; the decay keeps the final field from
/// carrying last-iterate noise into the sample mean.
fn adam_decaying() -> Hyper {
    Hyper { alpha: 1.0, schedule: stochastic::Schedule::Harmonic { k0: 100.0 }, ..Hyper::new(Method::Adam) }
}

#[test]
fn denoiser_on_standard_normal_learns_beta_x() {
    // For N(0, I) data under OU the optimal ε-predictor is β_t x.
    let data = gaussian(2000, [0.0, 0.0], 1.0, 1);
    let sched = Schedule::ou(1.0, 3.0).unwrap();
    let spec = MlpSpec::new(vec![3, 32, 2], Activation::Tanh, Wrapper::None).unwrap();
    let fit = train_denoiser(&spec, &mlp_init(&spec, 2).0, &data, &sched, &adam(3e-3), 3000, 128, 3).unwrap();
    let mut g = rng::seeded(9);
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..500 {
        let t = 0.3 + 2.7 * rng::uniform(&mut g);
        let x = rng::normal_vec(&mut g, 2);
        let (_, beta) = sched.eval(t).unwrap();
        let mut z = x.clone();
        z.push(t);
        let pred = mlp_forward(&spec, &fit.theta, &z).unwrap();
        for (p, xi) in pred.iter().zip(&x) {
            num += (p - beta * xi).powi(2);
            den += (beta * xi).powi(2);
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 0.1, "relative error {rel}");
}

#[test]
fn flow_matching_on_single_point() {
    let c = [1.5, -0.5];
    let data = vec![c.to_vec()];
    let spec = MlpSpec::new(vec![3, 32, 32, 2], Activation::Tanh, Wrapper::None).unwrap();
    let fit = train_fm(&spec, &mlp_init(&spec, 1).0, &data, &adam(1e-2), 2000, 64, 2).unwrap();
    let xs = fm_sample(&spec, &fit.theta, 500, 100, 3).unwrap();
    let m = mean(&xs);
    assert!((m[0] - c[0]).abs() < 0.1 && (m[1] - c[1]).abs() < 0.1, "{m:?}");
}

#[test]
fn flow_matching_on_shifted_gaussian() {
    let data = gaussian(2000, [2.0, 2.0], 0.5, 4);
    let spec = MlpSpec::new(vec![3, 32, 32, 2], Activation::Tanh, Wrapper::None).unwrap();
    let fit = train_fm(&spec, &mlp_init(&spec, 5).0, &data, &adam_decaying(), 2000, 256, 6).unwrap();
    let xs = fm_sample(&spec, &fit.theta, 2000, 100, 7).unwrap();
    let m = mean(&xs);
    assert!((m[0] - 2.0).abs() < 0.1 && (m[1] - 2.0).abs() < 0.1, "{m:?}");
}
