//! Minimal computer-algebra core.
//!
//! Expressions are immutable, hash-consed DAGs: two structurally identical
//! expressions built anywhere in the process share one allocation, so
//! equality is a pointer comparison and repeated differentiation reuses
//! common sub-expressions instead of copying them.
//!
//! # Grammar
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right-associative
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := tanh | atanh | ln | exp | sqrt
//! ```
//!
//! Numbers accept an optional fraction and exponent (`1.5e-3`). A leading
//! minus applied directly to a number literal yields a negative constant.

pub mod build;
mod diff;
mod eval;
mod parse;
mod simplify;
mod subst;
mod symbol;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock, Weak};

pub use diff::differentiate;
pub use eval::{evaluate, EvalError, Tape};
pub use parse::parse;
pub use simplify::simplify;
pub use subst::substitute;
pub use symbol::{input_name, Symbol, SymbolKind, SymbolTable};

/// Default cap on the number of distinct nodes in a derived expression.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("symbol `{0}` is not bound")]
    Unbound(String),
    #[error(transparent)]
    Domain(#[from] EvalError),
    #[error("expression has {nodes} distinct nodes, above the cap of {cap}")]
    SizeCap { nodes: usize, cap: usize },
    #[error("invalid symbol table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Tanh,
    Atanh,
    Ln,
    Exp,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Tanh, Func::Atanh, Func::Ln, Func::Exp, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Tanh => "tanh",
            Func::Atanh => "atanh",
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Symbol(Arc<str>),
    Binary(BinOp, Expr, Expr),
    Unary(Func, Expr),
}

/// Shared handle to an interned expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

#[derive(PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Symbol(Arc<str>),
    Binary(BinOp, usize, usize),
    Unary(Func, usize),
}

struct Interner {
    map: HashMap<Key, Weak<Node>>,
    purge_at: usize,
}

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        Mutex::new(Interner {
            map: HashMap::new(),
            purge_at: 1 << 16,
        })
    })
}

fn intern(key: Key, node: impl FnOnce() -> Node) -> Expr {
    let mut guard = interner().lock().unwrap_or_else(|p| p.into_inner());
    if let Some(hit) = guard.map.get(&key).and_then(Weak::upgrade) {
        return Expr(hit);
    }
    let arc = Arc::new(node());
    guard.map.insert(key, Arc::downgrade(&arc));
    if guard.map.len() > guard.purge_at {
        guard.map.retain(|_, w| w.strong_count() > 0);
        guard.purge_at = (guard.map.len() * 2).max(1 << 16);
    }
    Expr(arc)
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        intern(Key::Const(value.to_bits()), || Node::Const(value))
    }

    pub fn symbol(name: &str) -> Expr {
        let name: Arc<str> = Arc::from(name);
        intern(Key::Symbol(name.clone()), || Node::Symbol(name))
    }

    /// Builds a binary node exactly as given, without any rewriting.
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let key = Key::Binary(op, lhs.addr(), rhs.addr());
        intern(key, || Node::Binary(op, lhs, rhs))
    }

    /// Builds a function application exactly as given.
    pub fn unary(func: Func, arg: Expr) -> Expr {
        let key = Key::Unary(func, arg.addr());
        intern(key, || Node::Unary(func, arg))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match &*self.0 {
            Node::Symbol(name) => Some(name),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub(crate) fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Number of distinct nodes reachable from this expression.
    pub fn dag_size(&self) -> usize {
        dag_size_of(std::slice::from_ref(self))
    }

    /// Names of all symbols the expression references, sorted.
    pub fn symbols(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut names = Vec::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.addr()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Symbol(name) => names.push(name.to_string()),
                Node::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Node::Unary(_, a) => stack.push(a.clone()),
            }
        }
        names.sort();
        names
    }

    pub fn references(&self, name: &str) -> bool {
        self.symbols().iter().any(|s| s == name)
    }
}

/// Distinct node count over several roots that may share structure.
pub fn dag_size_of(roots: &[Expr]) -> usize {
    let mut seen = HashSet::new();
    let mut stack: Vec<Expr> = roots.to_vec();
    while let Some(e) = stack.pop() {
        if !seen.insert(e.addr()) {
            continue;
        }
        match e.node() {
            Node::Const(_) | Node::Symbol(_) => {}
            Node::Binary(_, a, b) => {
                stack.push(a.clone());
                stack.push(b.clone());
            }
            Node::Unary(_, a) => stack.push(a.clone()),
        }
    }
    seen.len()
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.addr().hash(state)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Prints in the grammar accepted by [`parse`]; parsing the output rebuilds
/// the identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Symbol(name) => f.write_str(name),
            Node::Unary(func, arg) => write!(f, "{}({arg})", func.name()),
            Node::Binary(op, lhs, rhs) => {
                let prec = op.precedence();
                let lhs_parens = match lhs.node() {
                    Node::Binary(l, _, _) => {
                        if *op == BinOp::Pow {
                            true
                        } else {
                            l.precedence() < prec
                        }
                    }
                    _ => false,
                };
                let rhs_parens = match rhs.node() {
                    Node::Binary(r, _, _) => {
                        if *op == BinOp::Pow {
                            r.precedence() < prec
                        } else {
                            r.precedence() <= prec
                        }
                    }
                    _ => false,
                };
                if lhs_parens {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                if *op == BinOp::Pow {
                    f.write_str("^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                if rhs_parens {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_shares_structure() {
        let a = Expr::binary(BinOp::Sub, Expr::symbol("u"), Expr::symbol("v"));
        let b = Expr::binary(BinOp::Sub, Expr::symbol("u"), Expr::symbol("v"));
        assert_eq!(a, b);
        assert_ne!(a, Expr::binary(BinOp::Sub, Expr::symbol("v"), Expr::symbol("u")));
        assert_ne!(Expr::constant(0.0), Expr::constant(-0.0));
    }

    #[test]
    fn printer_keeps_tree_shape() {
        let u = Expr::symbol("u");
        let v = Expr::symbol("v");
        let s = Expr::symbol("s");
        let inner = Expr::binary(BinOp::Sub, v.clone(), s.clone());
        let e = Expr::binary(BinOp::Sub, u.clone(), inner);
        assert_eq!(e.to_string(), "u - (v - s)");
        let p = Expr::binary(BinOp::Pow, Expr::binary(BinOp::Pow, u, v), s);
        assert_eq!(p.to_string(), "(u^v)^s");
        assert_eq!(Expr::constant(-2.5).to_string(), "(-2.5)");
    }

    #[test]
    fn dag_size_counts_shared_nodes_once() {
        let x = Expr::symbol("x");
        let sq = Expr::binary(BinOp::Mul, x.clone(), x.clone());
        let e = Expr::binary(BinOp::Add, sq.clone(), sq);
        assert_eq!(e.dag_size(), 3);
    }
}
