//! Prefix expression format.
//!
//! ```text
//! expr  := var | "(" head arg* ")"
//! var   := "x" <1-based index>
//! ```
//!
//! | head | arguments |
//! |------|-----------|
//! | `add`, `mul` | two or more exprs, folded left-associatively |
//! | `sub`, `div` | two exprs |
//! | `neg sin cos exp log erf relu sigmoid tanh` | one expr |
//! | `scale c e`, `shift c e`, `relu_shift c e` | number, expr |
//! | `pow n e` | integer, expr |
//! | `const c` | number |
//!
//! Example: `(div (mul (exp (scale 2 x2)) (cos (mul x2 x3))) (add x1 x2))`.

use super::{Graph, GraphBuilder, NodeId, Op};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b'(' | b')') && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                out.push((start, Tok::Atom(&src[start..i])));
            }
        }
    }
    out
}

/// Syntax tree before lowering; lets us infer the input count first.
#[derive(Debug)]
enum Expr {
    Var(usize),
    Const(f64),
    Call { head: String, num: Option<f64>, args: Vec<Expr>, pos: usize },
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    at: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos, msg: msg.into() })
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.len, |t| t.0)
    }

    fn next(&mut self) -> Option<(usize, Tok<'a>)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn number(&mut self) -> Result<f64> {
        match self.next() {
            Some((p, Tok::Atom(s))) => s
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite())
                .map_or_else(|| self.err(p, format!("expected a finite number, got `{s}`")), Ok),
            Some((p, _)) => self.err(p, "expected a number"),
            None => self.err(self.len, "unexpected end of input"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.next() {
            Some((p, Tok::Atom(s))) => {
                let idx = s
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| k >= 1);
                match idx {
                    Some(k) => Ok(Expr::Var(k - 1)),
                    None => self.err(p, format!("expected a variable like x1, got `{s}`")),
                }
            }
            Some((p, Tok::Open)) => {
                let head = match self.next() {
                    Some((_, Tok::Atom(h))) => h.to_string(),
                    _ => return self.err(p, "expected an operation name after `(`"),
                };
                let num = match head.as_str() {
                    "scale" | "shift" | "relu_shift" | "pow" | "const" => Some(self.number()?),
                    _ => None,
                };
                if head == "const" {
                    self.close()?;
                    return Ok(Expr::Const(num.unwrap()));
                }
                let mut args = Vec::new();
                while !matches!(self.toks.get(self.at), Some((_, Tok::Close)) | None) {
                    args.push(self.expr()?);
                }
                self.close()?;
                Ok(Expr::Call { head, num, args, pos: p })
            }
            Some((p, Tok::Close)) => self.err(p, "unexpected `)`"),
            None => self.err(self.len, "unexpected end of input"),
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.next() {
            Some((_, Tok::Close)) => Ok(()),
            _ => self.err(self.pos().min(self.len), "expected `)`"),
        }
    }
}

fn max_var(e: &Expr) -> Option<usize> {
    match e {
        Expr::Var(k) => Some(*k),
        Expr::Const(_) => None,
        Expr::Call { args, .. } => args.iter().filter_map(max_var).max(),
    }
}

fn lower(b: &mut GraphBuilder, e: &Expr) -> Result<NodeId> {
    match e {
        Expr::Var(k) => {
            if *k >= b.input_count() {
                return Err(Error::Parse {
                    pos: 0,
                    msg: format!("variable x{} exceeds input count {}", k + 1, b.input_count()),
                });
            }
            Ok(b.input(*k))
        }
        Expr::Const(c) => Ok(b.constant(*c)),
        Expr::Call { head, num, args, pos } => {
            let arity_err = |want: &str| Error::Parse {
                pos: *pos,
                msg: format!("`{head}` takes {want}, got {}", args.len()),
            };
            let lowered = args
                .iter()
                .map(|a| lower(b, a))
                .collect::<Result<Vec<_>>>()?;
            let unary_op = match head.as_str() {
                "neg" => Some(Op::Neg),
                "sin" => Some(Op::Sin),
                "cos" => Some(Op::Cos),
                "exp" => Some(Op::Exp),
                "log" => Some(Op::Log),
                "erf" => Some(Op::Erf),
                "relu" => Some(Op::Relu),
                "sigmoid" => Some(Op::Sigmoid),
                "tanh" => Some(Op::Tanh),
                "scale" => Some(Op::Scale(num.unwrap())),
                "shift" => Some(Op::Shift(num.unwrap())),
                "relu_shift" => Some(Op::ReluShift(num.unwrap())),
                "pow" => {
                    let n = num.unwrap();
                    if n.fract() != 0.0 || n.abs() > i32::MAX as f64 {
                        return Err(Error::Parse {
                            pos: *pos,
                            msg: format!("`pow` needs an integer exponent, got {n}"),
                        });
                    }
                    Some(Op::Powi(n as i32))
                }
                _ => None,
            };
            if let Some(op) = unary_op {
                if lowered.len() != 1 {
                    return Err(arity_err("one expression"));
                }
                return Ok(b.unary(op, lowered[0]));
            }
            match head.as_str() {
                "add" | "mul" => {
                    if lowered.len() < 2 {
                        return Err(arity_err("at least two expressions"));
                    }
                    Ok(if head == "add" {
                        b.sum(&lowered)
                    } else {
                        b.product(&lowered)
                    })
                }
                "sub" | "div" => {
                    if lowered.len() != 2 {
                        return Err(arity_err("two expressions"));
                    }
                    let op = if head == "sub" { Op::Sub } else { Op::Div };
                    Ok(b.binary(op, lowered[0], lowered[1]))
                }
                other => Err(Error::Parse {
                    pos: *pos,
                    msg: format!("unknown operation `{other}`"),
                }),
            }
        }
    }
}

fn parse_all(src: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: tokenize(src),
        at: 0,
        len: src.len(),
    };
    let e = p.expr()?;
    if p.at < p.toks.len() {
        return p.err(p.pos(), "trailing input after expression");
    }
    Ok(e)
}

/// Parses one expression; the input count is the largest variable index used
/// (at least 1).
pub fn parse(src: &str) -> Result<Graph> {
    let e = parse_all(src)?;
    let n = max_var(&e).map_or(1, |k| k + 1);
    let mut b = GraphBuilder::new(n);
    let out = lower(&mut b, &e)?;
    b.finish(vec![out])
}

/// Parses several expressions over shared inputs `x1..x{input_count}` into one
/// graph with one output per expression.
pub fn parse_multi(srcs: &[&str], input_count: usize) -> Result<Graph> {
    let mut b = GraphBuilder::new(input_count);
    let mut outs = Vec::with_capacity(srcs.len());
    for src in srcs {
        let e = parse_all(src)?;
        outs.push(lower(&mut b, &e)?);
    }
    b.finish(outs)
}
