use std::collections::HashMap;

use super::{ExprError, Func};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    State,
    Parameter,
    /// `order`-th time derivative of the scalar input.
    InputDerivative(usize),
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

impl Symbol {
    pub fn new(name: impl Into<String>, kind: SymbolKind) -> Self {
        Symbol {
            name: name.into(),
            kind,
        }
    }
}

/// Conventional name of the `order`-th input derivative: `u`, `u_1`, `u_2`, ...
pub fn input_name(order: usize) -> String {
    if order == 0 {
        "u".to_string()
    } else {
        format!("u_{order}")
    }
}

/// Write-once ordered collection of symbols.
///
/// The augmented state order is states first, then parameters, in
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self, ExprError> {
        let mut index = HashMap::new();
        for (i, sym) in symbols.iter().enumerate() {
            if !is_identifier(&sym.name) {
                return Err(ExprError::Table(format!("`{}` is not an identifier", sym.name)));
            }
            if Func::from_name(&sym.name).is_some() {
                return Err(ExprError::Table(format!(
                    "`{}` is a reserved function name",
                    sym.name
                )));
            }
            if index.insert(sym.name.clone(), i).is_some() {
                return Err(ExprError::Table(format!("duplicate symbol `{}`", sym.name)));
            }
        }
        let mut orders: Vec<usize> = symbols
            .iter()
            .filter_map(|s| match s.kind {
                SymbolKind::InputDerivative(j) => Some(j),
                _ => None,
            })
            .collect();
        orders.sort_unstable();
        if orders.iter().enumerate().any(|(i, &j)| i != j) {
            return Err(ExprError::Table(
                "input derivatives must form a contiguous family starting at order 0".into(),
            ));
        }
        Ok(SymbolTable { symbols, index })
    }

    /// Table for a car-following system: states `s`, `v`, the given
    /// parameters, and input derivatives up to `max_order`.
    pub fn car_following(params: &[String], max_order: usize) -> Result<Self, ExprError> {
        let mut symbols = vec![
            Symbol::new("s", SymbolKind::State),
            Symbol::new("v", SymbolKind::State),
        ];
        symbols.extend(params.iter().map(|p| Symbol::new(p.clone(), SymbolKind::Parameter)));
        symbols.extend((0..=max_order).map(|j| Symbol::new(input_name(j), SymbolKind::InputDerivative(j))));
        SymbolTable::new(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.index.get(name).map(|&i| &self.symbols[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn of_kind(&self, pred: impl Fn(SymbolKind) -> bool) -> Vec<&Symbol> {
        self.symbols.iter().filter(|s| pred(s.kind)).collect()
    }

    pub fn states(&self) -> Vec<&Symbol> {
        self.of_kind(|k| k == SymbolKind::State)
    }

    pub fn parameters(&self) -> Vec<&Symbol> {
        self.of_kind(|k| k == SymbolKind::Parameter)
    }

    /// `[states..., parameters...]`.
    pub fn augmented_state(&self) -> Vec<&Symbol> {
        let mut out = self.states();
        out.extend(self.parameters());
        out
    }

    /// Input derivative symbols ordered by derivative order.
    pub fn inputs(&self) -> Vec<&Symbol> {
        let mut out = self.of_kind(|k| matches!(k, SymbolKind::InputDerivative(_)));
        out.sort_by_key(|s| match s.kind {
            SymbolKind::InputDerivative(j) => j,
            _ => unreachable!(),
        });
        out
    }

    pub fn max_input_order(&self) -> Option<usize> {
        self.inputs().len().checked_sub(1)
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmented_order_is_states_then_parameters() {
        let t = SymbolTable::car_following(&["k1".into(), "k2".into(), "tau".into()], 4).unwrap();
        let names: Vec<_> = t.augmented_state().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["s", "v", "k1", "k2", "tau"]);
        assert_eq!(t.max_input_order(), Some(4));
        assert_eq!(t.inputs()[2].name, "u_2");
    }

    #[test]
    fn rejects_duplicates_and_gaps() {
        let dup = vec![
            Symbol::new("x", SymbolKind::State),
            Symbol::new("x", SymbolKind::Parameter),
        ];
        assert!(SymbolTable::new(dup).is_err());
        let gap = vec![
            Symbol::new("u", SymbolKind::InputDerivative(0)),
            Symbol::new("u_2", SymbolKind::InputDerivative(2)),
        ];
        assert!(SymbolTable::new(gap).is_err());
        assert!(SymbolTable::new(vec![Symbol::new("ln", SymbolKind::Parameter)]).is_err());
    }
}
