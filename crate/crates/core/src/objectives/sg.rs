use super::Objective;
use crate::error::{shape_check, Error, Result};

/// Components `f_i(x) = (x − z_i)²` with `z_i` evenly spaced on `[−1, 1]`;
/// as an [`Objective`] it is the average `F_N`.
#[derive(Clone, Debug)]
pub struct SgFamily {
    pub centers: Vec<f64>,
}

pub fn sg_family(n: usize) -> Result<SgFamily> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Argument(format!("component count must be odd and at least 3, got {n}")));
    }
    let centers = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    Ok(SgFamily { centers })
}

impl SgFamily {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn component_value(&self, i: usize, x: f64) -> f64 {
        (x - self.centers[i]).powi(2)
    }

    pub fn component_grad(&self, i: usize, x: f64) -> f64 {
        2.0 * (x - self.centers[i])
    }

    /// `(1/N) Σ z_i²`, the constant offset of `F_N(x) = x² + offset`.
    pub fn offset(&self) -> f64 {
        self.centers.iter().map(|z| z * z).sum::<f64>() / self.len() as f64
    }
}

impl Objective for SgFamily {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        shape_check("argument", 1, x.len())?;
        Ok((0..self.len()).map(|i| self.component_value(i, x[0])).sum::<f64>() / self.len() as f64)
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = self.value(x)?;
        let g = (0..self.len()).map(|i| self.component_grad(i, x[0])).sum::<f64>() / self.len() as f64;
        Ok((f, vec![g]))
    }
    fn hvp(&self, _x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        shape_check("direction", 1, v.len())?;
        Ok(vec![2.0 * v[0]])
    }
    fn has_hvp(&self) -> bool {
        true
    }
    fn known_minimum(&self) -> Option<f64> {
        Some(self.offset())
    }
    fn known_minimizer(&self) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_centers() {
        let s = sg_family(5).unwrap();
        assert_eq!(s.centers, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(s.offset(), 0.5);
        for x in [-2.0, 0.3, 1.7] {
            assert!((s.value(&[x]).unwrap() - (x * x + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn even_count_rejected() {
        assert!(matches!(sg_family(4), Err(Error::Argument(_))));
        assert!(sg_family(1).is_err());
    }

    #[test]
    fn average_of_component_gradients() {
        for n in [3, 11, 101] {
            let s = sg_family(n).unwrap();
            for x in [-0.7, 0.0, 2.5] {
                let avg = (0..n).map(|i| s.component_grad(i, x)).sum::<f64>() / n as f64;
                assert_eq!(avg, s.grad(&[x]).unwrap()[0]);
                assert!((avg - 2.0 * x).abs() < 1e-13);
            }
        }
    }
}
