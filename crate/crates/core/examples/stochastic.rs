//! Stochastic gradient on the averaged family (x − z_i)² and Newton–Schulz
//! orthogonalization.

use mfdl::objectives::sg_family;
use mfdl::rng;
use mfdl::stochastic::{newton_schulz, sg_trajectory, Hyper, Method, Schedule, QUINTIC};
use nalgebra::DMatrix;

fn main() -> mfdl::Result<()> {
    let fam = sg_family(101)?;
    for (label, schedule, alpha) in [
        ("constant α=0.1 ", Schedule::Constant, 0.1),
        ("constant α=0.05", Schedule::Constant, 0.05),
        ("α/(k+10)       ", Schedule::Harmonic { k0: 10.0 }, 1.0),
    ] {
        let h = Hyper { alpha, schedule, ..Hyper::new(Method::Sgd) };
        let path = sg_trajectory(&fam, 1.0, &h, 20_000, 3)?;
        let tail = &path[path.len() - 1000..];
        let spread = tail.iter().map(|x| x.abs()).fold(0.0, f64::max);
        println!("{label}: final x = {:+.4}, max |x| over last 1000 = {spread:.4}", path[path.len() - 1]);
    }

    let mut g = rng::seeded(0);
    let m = DMatrix::from_fn(12, 6, |_, _| rng::normal(&mut g));
    let o = newton_schulz(&m, QUINTIC, 5, 0.0)?;
    let sv = o.singular_values();
    println!("singular values after 5 quintic steps: {:.3?}", sv.as_slice());
    Ok(())
}
