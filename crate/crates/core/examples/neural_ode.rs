//! Adjoint gradient of a terminal reward through an MLP drift.

use mfdl::nn::{mlp_init, Activation, MlpSpec, Wrapper};
use mfdl::objectives::{GraphObjective, Objective};
use mfdl::odeflow::{node_grad, ode_solve, GraphDrift, Method, SolverConfig};

fn main() -> mfdl::Result<()> {
    let spec = MlpSpec::new(vec![2, 8, 2], Activation::Tanh, Wrapper::None)?;
    let drift = GraphDrift::mlp(&spec, false)?;
    let theta = mlp_init(&spec, 4).0;
    let reward = GraphObjective::parse("(add (pow 2 x1) (scale 0.5 x2))")?;
    let cfg = SolverConfig::new(Method::Rk4, 0.01, 1.0);
    let x0 = [0.5, -0.3];
    let out = node_grad(&drift, &theta, &x0, &reward, &cfg)?;

    let h = 1e-6;
    let j = |t: &[f64]| reward.value(ode_solve(&drift, t, &x0, &cfg)?.last());
    let mut tp = theta.clone();
    tp[0] += h;
    let mut tm = theta.clone();
    tm[0] -= h;
    let fd = (j(&tp)? - j(&tm)?) / (2.0 * h);
    println!("J = {:.8}, x(T) = {:.6?}", out.value, out.terminal);
    println!("dJ/dθ₀ adjoint {:.8}, finite difference {fd:.8}", out.grad[0]);
    println!("dJ/dx₀ = {:.6?}", out.p_x);
    Ok(())
}
