use std::collections::HashMap;

use super::build;
use super::{Expr, Node};

/// Rebuilds `e` bottom-up through the rewriting constructors in
/// [`build`](super::build). The result evaluates to the same value as `e`
/// at every point where `e` is defined.
pub fn simplify(e: &Expr) -> Expr {
    fn go(e: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(r) = memo.get(&e.addr()) {
            return r.clone();
        }
        let r = match e.node() {
            Node::Const(_) | Node::Symbol(_) => e.clone(),
            Node::Binary(op, a, b) => {
                let a = go(a, memo);
                let b = go(b, memo);
                build::binary(*op, a, b)
            }
            Node::Unary(f, a) => {
                let a = go(a, memo);
                build::apply(*f, a)
            }
        };
        memo.insert(e.addr(), r.clone());
        r
    }
    go(e, &mut HashMap::new())
}
