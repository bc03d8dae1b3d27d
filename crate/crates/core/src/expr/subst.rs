use std::collections::HashMap;

use super::{Expr, Node};

/// Simultaneous substitution of symbols by expressions. Symbols without a
/// binding are left in place and no other rewriting is applied.
pub fn substitute(e: &Expr, bindings: &HashMap<String, Expr>) -> Expr {
    fn go(e: &Expr, bindings: &HashMap<String, Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(r) = memo.get(&e.addr()) {
            return r.clone();
        }
        let r = match e.node() {
            Node::Const(_) => e.clone(),
            Node::Symbol(name) => bindings.get(name.as_ref()).cloned().unwrap_or_else(|| e.clone()),
            Node::Binary(op, a, b) => {
                let (na, nb) = (go(a, bindings, memo), go(b, bindings, memo));
                if na == *a && nb == *b {
                    e.clone()
                } else {
                    Expr::binary(*op, na, nb)
                }
            }
            Node::Unary(f, a) => {
                let na = go(a, bindings, memo);
                if na == *a {
                    e.clone()
                } else {
                    Expr::unary(*f, na)
                }
            }
        };
        memo.insert(e.addr(), r.clone());
        r
    }
    if bindings.is_empty() {
        return e.clone();
    }
    go(e, bindings, &mut HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, SymbolTable};

    fn bind(pairs: &[(&str, Expr)]) -> HashMap<String, Expr> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn examples() {
        let t = SymbolTable::car_following(&["x".into()], 1).unwrap();
        let e = parse("u - v", &t).unwrap();
        let r = substitute(&e, &bind(&[("u", Expr::constant(31.0))]));
        assert_eq!(r, parse("31 - v", &t).unwrap());

        let x = Expr::symbol("x");
        assert_eq!(substitute(&x, &bind(&[("x", x.clone())])), x);

        // simultaneous, not sequential
        let swap = bind(&[("s", Expr::symbol("v")), ("v", Expr::symbol("s"))]);
        assert_eq!(substitute(&parse("s - v", &t).unwrap(), &swap), parse("v - s", &t).unwrap());

        let no_input_rate = parse("k - u", &SymbolTable::car_following(&["k".into()], 1).unwrap()).unwrap();
        assert_eq!(substitute(&no_input_rate, &bind(&[("u_1", Expr::constant(0.0))])), no_input_rate);
    }
}
