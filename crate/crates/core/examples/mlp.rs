//! MLP forward pass, backprop and a finite-difference spot check.

use mfdl::nn::{mlp_forward, mlp_grad, mlp_init, Activation, MlpSpec, Wrapper};

fn main() -> mfdl::Result<()> {
    let spec = MlpSpec::new(vec![3, 16, 16, 2], Activation::Gelu, Wrapper::None)?;
    let theta = mlp_init(&spec, 7).0;
    let x = [0.3, -1.2, 0.8];
    let y = mlp_forward(&spec, &theta, &x)?;
    // gradient of the first output
    let (dtheta, dx) = mlp_grad(&spec, &theta, &x, &[1.0, 0.0])?;
    let h = 1e-6;
    let mut tp = theta.clone();
    tp[5] += h;
    let fd = (mlp_forward(&spec, &tp, &x)?[0] - y[0]) / h;
    println!("params {}  output {y:?}", spec.param_count());
    println!("d out/d x      {dx:?}");
    println!("d out/d θ[5]   {:.8} (fd {fd:.8})", dtheta[5]);
    Ok(())
}
