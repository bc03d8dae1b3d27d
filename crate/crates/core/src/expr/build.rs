//! Rewriting constructors used when expressions are produced by the
//! machinery (differentiation, Lie derivatives) rather than parsed.
//!
//! Each constructor applies local, value-preserving rules: constant
//! folding, additive and multiplicative identities, `x - x -> 0`,
//! `x / x -> 1`, and gathering of constant factors into the leftmost
//! position of a product.

use super::eval::{apply_binary, apply_unary};
use super::{BinOp, Expr, Func, Node};

fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
    let (x, y) = (a.as_const()?, b.as_const()?);
    apply_binary(op, x, y)
        .ok()
        .filter(|v| v.is_finite())
        .map(Expr::constant)
}

pub fn constant(c: f64) -> Expr {
    Expr::constant(c)
}

pub fn zero() -> Expr {
    Expr::constant(0.0)
}

pub fn one() -> Expr {
    Expr::constant(1.0)
}

pub fn add(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold(BinOp::Add, &a, &b) {
        return c;
    }
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    // a + (-1)*b  ->  a - b
    if let Node::Binary(BinOp::Mul, m, rest) = b.node() {
        if m.as_const() == Some(-1.0) {
            return sub(a, rest.clone());
        }
    }
    Expr::binary(BinOp::Add, a, b)
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold(BinOp::Sub, &a, &b) {
        return c;
    }
    if b.is_zero() {
        return a;
    }
    if a == b {
        return zero();
    }
    if a.is_zero() {
        return neg(b);
    }
    Expr::binary(BinOp::Sub, a, b)
}

pub fn neg(a: Expr) -> Expr {
    mul(constant(-1.0), a)
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold(BinOp::Mul, &a, &b) {
        return c;
    }
    if a.is_zero() || b.is_zero() {
        return zero();
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    // Keep constants on the left.
    if b.as_const().is_some() && a.as_const().is_none() {
        return mul(b, a);
    }
    if let Some(c) = a.as_const() {
        match b.node() {
            // c1 * (c2 * x)  ->  (c1 c2) * x
            Node::Binary(BinOp::Mul, inner, rest) if inner.as_const().is_some() => {
                return mul(constant(c * inner.as_const().unwrap()), rest.clone());
            }
            // -1 * (x - y)  ->  y - x
            Node::Binary(BinOp::Sub, x, y) if c == -1.0 => return sub(y.clone(), x.clone()),
            _ => {}
        }
    }
    // x * (c * y)  ->  c * (x * y)
    if let Node::Binary(BinOp::Mul, inner, rest) = b.node() {
        if inner.as_const().is_some() && a.as_const().is_none() {
            return mul(inner.clone(), mul(a, rest.clone()));
        }
    }
    if let Node::Binary(BinOp::Mul, inner, rest) = a.node() {
        if inner.as_const().is_some() && b.as_const().is_none() {
            return mul(inner.clone(), mul(rest.clone(), b));
        }
    }
    Expr::binary(BinOp::Mul, a, b)
}

pub fn div(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold(BinOp::Div, &a, &b) {
        return c;
    }
    if a.is_zero() && !b.is_zero() {
        return zero();
    }
    if b.is_one() {
        return a;
    }
    if a == b && !b.is_zero() {
        return one();
    }
    Expr::binary(BinOp::Div, a, b)
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold(BinOp::Pow, &a, &b) {
        return c;
    }
    if b.is_one() {
        return a;
    }
    if b.is_zero() {
        return one();
    }
    if a.is_one() {
        return one();
    }
    Expr::binary(BinOp::Pow, a, b)
}

pub fn apply(f: Func, a: Expr) -> Expr {
    if let Some(x) = a.as_const() {
        if let Ok(v) = apply_unary(f, x) {
            if v.is_finite() {
                return constant(v);
            }
        }
    }
    Expr::unary(f, a)
}

pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    match op {
        BinOp::Add => add(a, b),
        BinOp::Sub => sub(a, b),
        BinOp::Mul => mul(a, b),
        BinOp::Div => div(a, b),
        BinOp::Pow => pow(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities() {
        let x = Expr::symbol("x");
        let y = Expr::symbol("y");
        assert_eq!(add(mul(zero(), x.clone()), y.clone()), y);
        assert_eq!(sub(x.clone(), x.clone()), zero());
        assert_eq!(mul(constant(2.0), mul(constant(3.0), x.clone())), mul(constant(6.0), x.clone()));
        assert_eq!(mul(x.clone(), constant(4.0)).to_string(), "4 * x");
        assert_eq!(pow(x.clone(), one()), x);
        assert_eq!(div(x.clone(), x.clone()), one());
        assert_eq!(neg(sub(x.clone(), y.clone())), sub(y, x));
    }

    #[test]
    fn illegal_constants_are_not_folded() {
        let e = div(one(), zero());
        assert_eq!(e.to_string(), "1 / 0");
        assert_eq!(apply(Func::Ln, constant(-1.0)).to_string(), "ln((-1))");
        assert_eq!(apply(Func::Tanh, zero()), zero());
    }
}
