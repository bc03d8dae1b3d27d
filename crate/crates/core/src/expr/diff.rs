use std::collections::HashMap;

use super::build::{add, apply, constant, div, mul, one, pow, sub, zero};
use super::{BinOp, Expr, Func, Node};

/// Partial derivative of `e` with respect to the symbol named `wrt`.
///
/// Shared sub-expressions are differentiated once. For a general power
/// `a^b` the rule `a^b * (b' ln a + b a' / a)` is used; it reduces to
/// `b a^(b-1) a'` when the exponent does not depend on `wrt` and to
/// `a^b ln(a) b'` when the base does not.
pub fn differentiate(e: &Expr, wrt: &str) -> Expr {
    Differentiator::new(wrt).run(e)
}

pub(crate) struct Differentiator<'a> {
    wrt: &'a str,
    memo: HashMap<usize, Expr>,
}

impl<'a> Differentiator<'a> {
    pub(crate) fn new(wrt: &'a str) -> Self {
        Differentiator {
            wrt,
            memo: HashMap::new(),
        }
    }

    pub(crate) fn run(&mut self, e: &Expr) -> Expr {
        if let Some(d) = self.memo.get(&e.addr()) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => zero(),
            Node::Symbol(name) => {
                if name.as_ref() == self.wrt {
                    one()
                } else {
                    zero()
                }
            }
            Node::Binary(op, a, b) => {
                let da = self.run(a);
                let db = self.run(b);
                if da.is_zero() && db.is_zero() {
                    return self.finish(e, zero());
                }
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b.clone()), mul(a.clone(), db)),
                    BinOp::Div => {
                        if db.is_zero() {
                            div(da, b.clone())
                        } else {
                            div(
                                sub(mul(da, b.clone()), mul(a.clone(), db)),
                                pow(b.clone(), constant(2.0)),
                            )
                        }
                    }
                    BinOp::Pow => {
                        if db.is_zero() {
                            let reduced = pow(a.clone(), sub(b.clone(), one()));
                            mul(mul(b.clone(), reduced), da)
                        } else if da.is_zero() {
                            mul(mul(e.clone(), apply(Func::Ln, a.clone())), db)
                        } else {
                            let log_term = mul(db, apply(Func::Ln, a.clone()));
                            let base_term = div(mul(b.clone(), da), a.clone());
                            mul(e.clone(), add(log_term, base_term))
                        }
                    }
                }
            }
            Node::Unary(f, a) => {
                let da = self.run(a);
                if da.is_zero() {
                    zero()
                } else {
                    match f {
                        Func::Tanh => mul(sub(one(), pow(e.clone(), constant(2.0))), da),
                        Func::Atanh => div(da, sub(one(), pow(a.clone(), constant(2.0)))),
                        Func::Ln => div(da, a.clone()),
                        Func::Exp => mul(e.clone(), da),
                        Func::Sqrt => div(da, mul(constant(2.0), e.clone())),
                    }
                }
            }
        };
        self.finish(e, d)
    }

    fn finish(&mut self, e: &Expr, d: Expr) -> Expr {
        self.memo.insert(e.addr(), d.clone());
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse, SymbolTable};
    use std::collections::HashMap;

    fn table() -> SymbolTable {
        SymbolTable::car_following(
            &["k1".into(), "tau".into(), "C".into(), "gamma".into(), "x".into()],
            0,
        )
        .unwrap()
    }

    #[test]
    fn linear_term() {
        let t = table();
        let e = parse("k1*(s - tau*v)", &t).unwrap();
        assert_eq!(differentiate(&e, "s"), Expr::symbol("k1"));
        assert_eq!(differentiate(&e, "u"), zero());
    }

    #[test]
    fn tanh_identity() {
        let t = table();
        let e = parse("tanh(x)", &t).unwrap();
        assert_eq!(differentiate(&e, "x").to_string(), "1 - tanh(x)^2");
    }

    #[test]
    fn power_with_symbolic_exponent() {
        let t = table();
        let e = parse("C*(u - v)*s^(-1*gamma)", &t).unwrap();
        let d = differentiate(&e, "gamma");
        let expected = parse("(-1)*C*(u - v)*s^(-1*gamma)*ln(s)", &t).unwrap();
        let p: HashMap<String, f64> = [("C", 300.0), ("u", 30.0), ("v", 28.5), ("s", 41.0), ("gamma", 1.7)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let got = evaluate(&d, &p).unwrap();
        let want = evaluate(&expected, &p).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
    }
}
