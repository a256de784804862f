use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Scalar activation functions.
///
/// `Gelu` follows `x/2 · (1 + erf(x/2))`, which differs from the more common
/// `erf(x/√2)` form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Elu,
    Celu { alpha: f64 },
    Gelu,
    Swish { beta: f64 },
    Swiglu { v: f64, w: f64, b: f64, c: f64 },
    Identity,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn swish(beta: f64, x: f64) -> (f64, f64) {
    let s = sigmoid(beta * x);
    (x * s, s + beta * x * s * (1.0 - s))
}

impl Activation {
    pub fn validate(self) -> Result<Self> {
        match self {
            Activation::Celu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Argument(format!("celu alpha must be positive, got {alpha}")))
            }
            Activation::Swish { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(Error::Argument(format!("swish beta must be positive, got {beta}")))
            }
            _ => Ok(self),
        }
    }

    /// Value and first derivative at `x`.
    pub fn apply(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                (s, s * (1.0 - s))
            }
            Activation::Tanh => {
                let t = x.tanh();
                (t, 1.0 - t * t)
            }
            Activation::Relu => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    (x.exp_m1(), x.exp())
                }
            }
            Activation::Celu { alpha } => {
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    (alpha * (x / alpha).exp_m1(), (x / alpha).exp())
                }
            }
            Activation::Gelu => {
                let e = libm::erf(0.5 * x);
                let value = 0.5 * x * (1.0 + e);
                let deriv = 0.5 * (1.0 + e) + 0.5 * x * FRAC_1_SQRT_PI * (-0.25 * x * x).exp();
                (value, deriv)
            }
            Activation::Swish { beta } => swish(beta, x),
            Activation::Swiglu { v, w, b, c } => {
                let (s, ds) = swish(1.0, w * x + b);
                let lin = v * x + c;
                (lin * s, v * s + lin * w * ds)
            }
            Activation::Identity => (x, 1.0),
        }
    }

    pub fn value(self, x: f64) -> f64 {
        self.apply(x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<Activation> {
        vec![
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Relu,
            Activation::Elu,
            Activation::Celu { alpha: 2.0 / 3.0 },
            Activation::Gelu,
            Activation::Swish { beta: 1.0 },
            Activation::Swish { beta: 2.5 },
            Activation::Swiglu {
                v: 0.7,
                w: -1.3,
                b: 0.2,
                c: 0.5,
            },
            Activation::Identity,
        ]
    }

    #[test]
    fn catalog_values() {
        assert_eq!(Activation::Sigmoid.value(0.0), 0.5);
        assert_eq!(Activation::Relu.apply(-3.0), (0.0, 0.0));
        assert_eq!(Activation::Elu.value(1.0), 1.0);
        assert!((Activation::Elu.value(-1.0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        let celu = Activation::Celu { alpha: 2.0 / 3.0 }.value(-1.0);
        assert!((celu - (2.0 / 3.0) * ((-1.5f64).exp() - 1.0)).abs() < 1e-15);
        // GELU(2) = 1 + erf(1) with the half-argument form.
        assert!((Activation::Gelu.value(2.0) - (1.0 + libm::erf(1.0))).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_central_differences_on_grid() {
        // ELU/CELU are only C¹ at 0; a small step keeps the one-sided
        // curvature mismatch (≈ h/4) under the tolerance.
        let h = 1e-7;
        for act in all() {
            for k in 0..=100 {
                let x = -5.0 + 0.1 * k as f64;
                // ReLU has no derivative at its kink.
                if act == Activation::Relu && x.abs() < h {
                    continue;
                }
                let fd = (act.value(x + h) - act.value(x - h)) / (2.0 * h);
                let d = act.apply(x).1;
                assert!((d - fd).abs() < 1e-7, "{act:?} at {x}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(Activation::Celu { alpha: 0.0 }.validate().is_err());
        assert!(Activation::Swish { beta: -1.0 }.validate().is_err());
        assert!(Activation::Swish { beta: 1.0 }.validate().is_ok());
    }

    #[test]
    fn json_names() {
        let s = serde_json::to_string(&Activation::Relu).unwrap();
        assert_eq!(s, "\"relu\"");
        let c: Activation = serde_json::from_str("{\"celu\":{\"alpha\":0.5}}").unwrap();
        assert_eq!(c, Activation::Celu { alpha: 0.5 });
    }
}
