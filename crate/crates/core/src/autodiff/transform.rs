//! Symbolic forward mode: emits graph nodes that compute `D_v x_j`.
//!
//! Used where a derivative itself has to be differentiated again (Laplacian
//! losses, divergence terms in density control), so the result is a regular
//! graph that the numeric sweeps accept.

use super::{GraphBuilder, Lin, NodeId, Op};
use crate::error::{shape_check, Error, Result};

impl GraphBuilder {
    fn lin_add(&mut self, a: Lin, b: Lin) -> Lin {
        match (a, b) {
            (Lin::Zero, t) | (t, Lin::Zero) => t,
            (Lin::Const(x), Lin::Const(y)) => Lin::Const(x + y),
            (Lin::Const(c), Lin::Node(n)) | (Lin::Node(n), Lin::Const(c)) => {
                Lin::Node(self.shift(c, n))
            }
            (Lin::Node(x), Lin::Node(y)) => Lin::Node(self.add(x, y)),
        }
    }

    fn lin_scale(&mut self, c: f64, a: Lin) -> Lin {
        match a {
            _ if c == 0.0 => Lin::Zero,
            Lin::Zero => Lin::Zero,
            Lin::Const(k) => Lin::Const(c * k),
            Lin::Node(n) if c == 1.0 => Lin::Node(n),
            Lin::Node(n) => Lin::Node(self.scale(c, n)),
        }
    }

    fn lin_sub(&mut self, a: Lin, b: Lin) -> Lin {
        let nb = self.lin_scale(-1.0, b);
        self.lin_add(a, nb)
    }

    fn lin_mul_node(&mut self, a: Lin, n: NodeId) -> Lin {
        match a {
            Lin::Zero => Lin::Zero,
            Lin::Const(1.0) => Lin::Node(n),
            Lin::Const(k) => Lin::Node(self.scale(k, n)),
            Lin::Node(t) => Lin::Node(self.mul(t, n)),
        }
    }

    fn lin_div_node(&mut self, a: Lin, n: NodeId) -> Lin {
        match a {
            Lin::Zero => Lin::Zero,
            Lin::Const(k) => {
                let inv = self.unary(Op::Powi(-1), n);
                self.lin_scale(k, Lin::Node(inv))
            }
            Lin::Node(t) => Lin::Node(self.div(t, n)),
        }
    }

    /// Appends nodes computing the directional derivative `D_v` of each root
    /// (inputs seeded with `D_v x_i = v_i`) and returns one [`Lin`] per root.
    pub fn push_tangents(&mut self, roots: &[NodeId], v: &[f64]) -> Result<Vec<Lin>> {
        shape_check("tangent direction", self.input_count(), v.len())?;
        let upto = roots.iter().copied().max().map_or(0, |m| m + 1);
        let mut needed = vec![false; upto];
        for &r in roots {
            needed[r] = true;
        }
        for j in (0..upto).rev() {
            if needed[j] {
                let node = self.nodes[j];
                for &p in node.parents() {
                    needed[p] = true;
                }
            }
        }

        let mut tan = vec![Lin::Zero; upto];
        for (i, &vi) in v.iter().enumerate().take(upto) {
            tan[i] = if vi == 0.0 { Lin::Zero } else { Lin::Const(vi) };
        }
        for j in self.input_count()..upto {
            if !needed[j] {
                continue;
            }
            let node = self.nodes[j];
            let a = node.parents[0];
            let ta = tan[a];
            let t = match node.op {
                Op::Input => unreachable!(),
                Op::Add => self.lin_add(ta, tan[node.parents[1]]),
                Op::Sub => self.lin_sub(ta, tan[node.parents[1]]),
                Op::Mul => {
                    let b = node.parents[1];
                    let l = self.lin_mul_node(ta, b);
                    let r = self.lin_mul_node(tan[b], a);
                    self.lin_add(l, r)
                }
                Op::Div => {
                    let b = node.parents[1];
                    let ftb = self.lin_mul_node(tan[b], j);
                    let num = self.lin_sub(ta, ftb);
                    self.lin_div_node(num, b)
                }
                Op::Neg => self.lin_scale(-1.0, ta),
                Op::Scale(c) => self.lin_scale(c, ta),
                Op::Shift(_) => ta,
                _ if ta == Lin::Zero => Lin::Zero,
                Op::Sin => {
                    let c = self.unary(Op::Cos, a);
                    self.lin_mul_node(ta, c)
                }
                Op::Cos => {
                    let s = self.unary(Op::Sin, a);
                    let ns = self.unary(Op::Neg, s);
                    self.lin_mul_node(ta, ns)
                }
                Op::Exp => self.lin_mul_node(ta, j),
                Op::Log => self.lin_div_node(ta, a),
                Op::Erf => {
                    let sq = self.unary(Op::Powi(2), a);
                    let nsq = self.unary(Op::Neg, sq);
                    let e = self.unary(Op::Exp, nsq);
                    let d = self.scale(std::f64::consts::FRAC_2_SQRT_PI, e);
                    self.lin_mul_node(ta, d)
                }
                Op::Sigmoid => {
                    let nf = self.unary(Op::Neg, j);
                    let one_minus = self.shift(1.0, nf);
                    let d = self.mul(j, one_minus);
                    self.lin_mul_node(ta, d)
                }
                Op::Tanh => {
                    let sq = self.unary(Op::Powi(2), j);
                    let nsq = self.unary(Op::Neg, sq);
                    let d = self.shift(1.0, nsq);
                    self.lin_mul_node(ta, d)
                }
                Op::Powi(0) => Lin::Zero,
                Op::Powi(1) => ta,
                Op::Powi(n) => {
                    let p = self.unary(Op::Powi(n - 1), a);
                    let d = self.scale(n as f64, p);
                    self.lin_mul_node(ta, d)
                }
                Op::Relu | Op::ReluShift(_) => {
                    return Err(Error::Capability(format!(
                        "node {j}: `{}` has no symbolic derivative",
                        node.op.name()
                    )))
                }
            };
            tan[j] = t;
        }
        Ok(roots.iter().map(|&r| tan[r]).collect())
    }
}
