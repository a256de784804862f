mod common;

use common::{fd_grad, rel_err};
use mfdl::nn::{mlp_init, Activation, MlpSpec, Wrapper};
use mfdl::objectives::{GraphObjective, Objective};
use mfdl::odeflow::{node_grad, ode_solve, GraphDrift, Method, SolverConfig};
use mfdl::rng;
use rand::Rng as _;

/// `Σ_i c_i sin(x_i) + x_i²/2` over `d` coordinates.
fn reward(d: usize, seed: u64) -> GraphObjective {
    let mut g = rng::stream(seed, 11);
    let terms: Vec<String> = (1..=d)
        .map(|i| format!("(add (scale {:.3} (sin x{i})) (scale 0.5 (pow 2 x{i})))", g.random_range(-1.0..1.0)))
        .collect();
    let src = terms.into_iter().reduce(|a, b| format!("(add {a} {b})")).unwrap();
    GraphObjective::parse_with_dim(&src, d).unwrap()
}

#[test]
fn adjoint_matches_finite_differences_on_random_mlps() {
    for seed in 0..20u64 {
        let mut g = rng::stream(seed, 5);
        let d = g.random_range(1..=3);
        let timed = seed % 2 == 1;
        let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Gelu];
        let spec = MlpSpec::new(vec![d + usize::from(timed), 6, d], acts[seed as usize % 3], Wrapper::None).unwrap();
        let drift = GraphDrift::mlp(&spec, timed).unwrap();
        let theta = mlp_init(&spec, seed).0;
        let x0: Vec<f64> = (0..d).map(|_| g.random_range(-1.0..1.0)).collect();
        let r = reward(d, seed);
        let cfg = SolverConfig::new(Method::Rk4, 0.02, 1.0);
        let out = node_grad(&drift, &theta, &x0, &r, &cfg).unwrap();

        let j_theta = |t: &[f64]| r.value(ode_solve(&drift, t, &x0, &cfg).unwrap().last()).unwrap();
        let fd = fd_grad(j_theta, &theta, 1e-6);
        let err = rel_err(&out.grad, &fd, 1e-3);
        assert!(err < 1e-4, "seed {seed}: θ-gradient rel err {err}");

        let j_x = |x: &[f64]| r.value(ode_solve(&drift, &theta, x, &cfg).unwrap().last()).unwrap();
        let err = rel_err(&out.p_x, &fd_grad(j_x, &x0, 1e-6), 1e-3);
        assert!(err < 1e-4, "seed {seed}: x₀-gradient rel err {err}");
    }
}

#[test]
fn constant_drift_gradient_equals_horizon() {
    let f = GraphDrift::parse(&["(add (scale 0 x1) x2)"], 1, false).unwrap();
    let r = GraphObjective::parse("(scale 1 x1)").unwrap();
    for (h, t) in [(0.1, 1.0), (0.05, 2.5), (0.01, 0.37)] {
        let out = node_grad(&f, &[0.3], &[0.0], &r, &SolverConfig::new(Method::Rk4, h, t)).unwrap();
        assert!((out.grad[0] - t).abs() < 1e-12, "{} vs {t}", out.grad[0]);
    }
}
