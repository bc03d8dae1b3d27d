use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{BinOp, Expr, ExprError, Func, Node};

/// A domain violation raised while evaluating a node.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("domain violation in `{node}`: {reason}")]
pub struct EvalError {
    /// Printed form of the offending node (truncated for large nodes).
    pub node: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Bin(BinOp, u32, u32),
    Un(Func, u32),
}

/// Straight-line program evaluating a set of expressions over a fixed
/// ordering of input symbols.
///
/// Slots `0..n_inputs` hold the inputs, followed by constants, followed by
/// one slot per operation in topological order. Shared sub-expressions are
/// computed once.
#[derive(Clone)]
pub struct Tape {
    inputs: Vec<String>,
    template: Vec<f64>,
    ops: Vec<Op>,
    op_base: usize,
    op_nodes: Vec<Expr>,
    outputs: Vec<u32>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("inputs", &self.inputs)
            .field("ops", &self.ops.len())
            .field("outputs", &self.outputs.len())
            .finish()
    }
}

impl Tape {
    /// Compiles `roots` against the input ordering `inputs`. Every symbol
    /// referenced by the roots must appear in `inputs`.
    pub fn compile(roots: &[Expr], inputs: &[String]) -> Result<Tape, ExprError> {
        let input_slot: HashMap<&str, u32> = inputs
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as u32))
            .collect();

        // Post-order over the DAG, iterative to keep deep chains off the stack.
        let mut order: Vec<Expr> = Vec::new();
        let mut visited: HashSet<usize> = HashSet::new();
        for root in roots {
            let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
            while let Some((e, expanded)) = stack.pop() {
                if expanded {
                    order.push(e);
                    continue;
                }
                if visited.contains(&e.addr()) {
                    continue;
                }
                visited.insert(e.addr());
                stack.push((e.clone(), true));
                match e.node() {
                    Node::Binary(_, a, b) => {
                        stack.push((b.clone(), false));
                        stack.push((a.clone(), false));
                    }
                    Node::Unary(_, a) => stack.push((a.clone(), false)),
                    _ => {}
                }
            }
        }

        let mut slot_of: HashMap<usize, u32> = HashMap::new();
        let mut template: Vec<f64> = vec![0.0; inputs.len()];
        for e in &order {
            match e.node() {
                Node::Symbol(name) => {
                    let slot = *input_slot
                        .get(name.as_ref())
                        .ok_or_else(|| ExprError::Unbound(name.to_string()))?;
                    slot_of.insert(e.addr(), slot);
                }
                Node::Const(c) => {
                    slot_of.insert(e.addr(), template.len() as u32);
                    template.push(*c);
                }
                _ => {}
            }
        }
        let op_base = template.len();
        let mut ops = Vec::new();
        let mut op_nodes = Vec::new();
        for e in &order {
            let op = match e.node() {
                Node::Binary(op, a, b) => Op::Bin(*op, slot_of[&a.addr()], slot_of[&b.addr()]),
                Node::Unary(f, a) => Op::Un(*f, slot_of[&a.addr()]),
                _ => continue,
            };
            slot_of.insert(e.addr(), (op_base + ops.len()) as u32);
            ops.push(op);
            op_nodes.push(e.clone());
        }
        template.resize(op_base + ops.len(), 0.0);
        let outputs = roots.iter().map(|r| slot_of[&r.addr()]).collect();
        Ok(Tape {
            inputs: inputs.to_vec(),
            template,
            ops,
            op_base,
            op_nodes,
            outputs,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_ops(&self) -> usize {
        self.ops.len()
    }

    /// Scratch buffer sized for this tape, with constants preloaded.
    pub fn scratch(&self) -> Vec<f64> {
        self.template.clone()
    }

    /// Evaluates into `out` using a caller-owned scratch buffer obtained
    /// from [`Tape::scratch`].
    pub fn eval_into(&self, inputs: &[f64], scratch: &mut [f64], out: &mut [f64]) -> Result<(), EvalError> {
        assert_eq!(inputs.len(), self.inputs.len(), "input arity mismatch");
        assert_eq!(out.len(), self.outputs.len(), "output arity mismatch");
        scratch[..inputs.len()].copy_from_slice(inputs);
        for (i, op) in self.ops.iter().enumerate() {
            let value = match *op {
                Op::Bin(op, a, b) => apply_binary(op, scratch[a as usize], scratch[b as usize]),
                Op::Un(f, a) => apply_unary(f, scratch[a as usize]),
            };
            match value {
                Ok(v) => scratch[self.op_base + i] = v,
                Err(reason) => return Err(self.violation(i, reason)),
            }
        }
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[slot as usize];
        }
        Ok(())
    }

    /// Convenience wrapper allocating its own buffers.
    pub fn eval(&self, inputs: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = self.scratch();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(inputs, &mut scratch, &mut out)?;
        Ok(out)
    }

    fn violation(&self, op_index: usize, reason: String) -> EvalError {
        let mut node = self.op_nodes[op_index].to_string();
        if node.len() > 160 {
            let cut = (0..=157).rev().find(|&i| node.is_char_boundary(i)).unwrap_or(0);
            node.truncate(cut);
            node.push_str("...");
        }
        EvalError { node, reason }
    }
}

pub(crate) fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, String> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(format!("division by zero ({a} / {b})"))
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => {
            if a == 0.0 && b <= 0.0 {
                return Err(format!("zero raised to non-positive power ({a}^{b})"));
            }
            if a < 0.0 && b.fract() != 0.0 {
                return Err(format!("negative base with non-integer exponent ({a}^{b})"));
            }
            if b == 2.0 {
                Ok(a * a)
            } else {
                Ok(a.powf(b))
            }
        }
    }
}

pub(crate) fn apply_unary(f: Func, a: f64) -> Result<f64, String> {
    match f {
        Func::Tanh => Ok(a.tanh()),
        Func::Exp => Ok(a.exp()),
        Func::Atanh => {
            if a.abs() < 1.0 {
                Ok(a.atanh())
            } else {
                Err(format!("atanh argument {a} outside (-1, 1)"))
            }
        }
        Func::Ln => {
            if a > 0.0 {
                Ok(a.ln())
            } else {
                Err(format!("ln of non-positive value {a}"))
            }
        }
        Func::Sqrt => {
            if a >= 0.0 {
                Ok(a.sqrt())
            } else {
                Err(format!("sqrt of negative value {a}"))
            }
        }
    }
}

/// Evaluates `e` at a binding of every symbol it references.
pub fn evaluate(e: &Expr, point: &HashMap<String, f64>) -> Result<f64, ExprError> {
    let names = e.symbols();
    let values = names
        .iter()
        .map(|n| point.get(n).copied().ok_or_else(|| ExprError::Unbound(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let tape = Tape::compile(std::slice::from_ref(e), &names)?;
    Ok(tape.eval(&values)?[0])
}
