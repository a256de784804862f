//! Reverse and forward sweeps on a small expression.

use mfdl::autodiff::{forward_jvp, parse, reverse_grad, reverse_hvp};

fn main() -> mfdl::Result<()> {
    let g = parse("(div (mul (exp (scale 2 x2)) (cos (mul x2 x3))) (add x1 x2))")?;
    let x = [0.0, 1.0, std::f64::consts::PI];
    let (f, grad) = reverse_grad(&g, &x)?;
    let (_, dv) = forward_jvp(&g, &x, &[2.0, 1.0, 0.0])?;
    let hv = reverse_hvp(&g, &x, &[1.0, 0.0, 0.0])?;
    println!("nodes   {}", g.len());
    println!("f       {f:.12}");
    println!("grad    {grad:.12?}");
    println!("D_v f   {dv:.12}");
    println!("H e1    {hv:.12?}");
    Ok(())
}
