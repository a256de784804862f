//! Sawtooth approximation of x² and its exact error.

use mfdl::uat::{square_approx, square_error_bound};

fn main() -> mfdl::Result<()> {
    for m in 1..=6 {
        let grid = 1 << (m + 4);
        let mut worst: f64 = 0.0;
        for i in 0..=grid {
            let x = i as f64 / grid as f64;
            worst = worst.max((square_approx(m, x)? - x * x).abs());
        }
        println!("m = {m}: max error {worst:.3e}, bound {:.3e}", square_error_bound(m));
    }
    Ok(())
}
