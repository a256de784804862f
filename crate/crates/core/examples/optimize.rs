//! Deterministic optimizers: line-search methods, CG and the augmented
//! Lagrangian.

use mfdl::objectives::{rosenbrock, GraphObjective, Objective};
use mfdl::optim::{augmented_lagrangian, bfgs, cg_solve, gd_backtracking, newton_cg, LineSearchConfig, NewtonCgConfig, PenaltyConfig};

fn main() -> mfdl::Result<()> {
    let f = rosenbrock();
    let x0 = [-1.2, 1.0];
    let cfg = LineSearchConfig { max_iter: 20_000, ..Default::default() };
    for (name, out) in [
        ("gd", gd_backtracking(&f, &x0, &cfg)?),
        ("bfgs", bfgs(&f, &x0, &cfg)?),
        ("newton-cg", newton_cg(&f, &x0, &NewtonCgConfig::default())?),
    ] {
        println!("{name:>9}: x = {:.6?} after {} iterations", out.x, out.iterations);
    }

    let q = |v: &[f64]| vec![4.0 * v[0] + v[1], v[0] + 3.0 * v[1]];
    let sol = cg_solve(q, &[1.0, 2.0], 1e-12, 10)?;
    println!("CG: x = {:.6?} in {} iterations", sol.x, sol.iterations);

    // min x1 + x2 subject to |x|² = 2
    let obj = GraphObjective::parse("(add x1 x2)")?;
    let h = GraphObjective::parse("(shift -2 (add (pow 2 x1) (pow 2 x2)))")?;
    let eq: [&dyn Objective; 1] = [&h];
    let out = augmented_lagrangian(&obj, &eq, &[], &[0.5, -0.2], &PenaltyConfig::default())?;
    println!("ALM: x = {:.6?}, λ = {:.6?}", out.x, out.lambda);
    Ok(())
}
