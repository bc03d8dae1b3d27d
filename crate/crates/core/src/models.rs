//! Car-following models as symbolic systems
//!
//! ```text
//! s' = u - v
//! v' = f_CF(s, v, u; theta)
//! ```
//!
//! with box bounds on `theta` and a closed-form equilibrium gap.
//!
//! Units are SI throughout (m, m/s, m/s^2, s). FTL's `C` carries the
//! formal unit m^gamma/s induced by its dynamics; no physical meaning is
//! attached to it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, ExprError, Symbol, SymbolKind, SymbolTable, Tape};

/// Space gap `s` (m) and ego speed `v` (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub v: f64,
}

impl State {
    pub fn new(s: f64, v: f64) -> Self {
        State { s, v }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub unit: String,
}

impl ParamSpec {
    fn new(name: &str, lower: f64, upper: f64, unit: &str) -> Self {
        ParamSpec {
            name: name.into(),
            lower,
            upper,
            unit: unit.into(),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// How the equilibrium space gap follows from the lead speed.
#[derive(Debug, Clone)]
pub enum EquilibriumGap {
    /// `s0* = expr(u, theta)`, where `u` stands for the lead speed `u0`.
    Closed(Expr),
    /// Every gap is an equilibrium once `v0 = u0` (FTL).
    Free,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    name: String,
    params: Vec<ParamSpec>,
    dynamics: Expr,
    equilibrium: EquilibriumGap,
    dynamics_tape: Tape,
    gap_tape: Option<Tape>,
}

pub const BUILTIN_MODELS: [&str; 4] = ["CTH-RV", "OV", "FTL", "IDM"];

/// Returns the canonical builtin name for loose spellings such as `cthrv`.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "cthrv" => Some("CTH-RV"),
        "ov" | "bando" => Some("OV"),
        "ftl" => Some("FTL"),
        "idm" => Some("IDM"),
        _ => None,
    }
}

pub fn builtin_model(name: &str) -> Result<ModelSpec> {
    let canonical = canonical_name(name).ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    let m = match canonical {
        "CTH-RV" => ModelSpec::new(
            "CTH-RV",
            vec![
                ParamSpec::new("k1", 0.001, 1.0, "1/s^2"),
                ParamSpec::new("k2", 0.01, 1.0, "1/s"),
                ParamSpec::new("tau", 0.1, 3.0, "s"),
            ],
            "k1*(s - tau*v) + k2*(u - v)",
            Some("tau*u"),
        ),
        "OV" => ModelSpec::new(
            "OV",
            vec![
                ParamSpec::new("alpha", 0.5, 3.3, "1/s"),
                ParamSpec::new("a", 10.0, 32.0, "m/s"),
                ParamSpec::new("h_m", 2.0, 30.0, "m"),
                ParamSpec::new("b", 18.0, 45.0, "m"),
            ],
            "alpha*(a*(tanh((s - h_m)/b) + tanh(h_m/b)) - v)",
            Some("h_m - b*atanh(tanh(h_m/b) - u/a)"),
        ),
        "FTL" => ModelSpec::new(
            "FTL",
            vec![
                ParamSpec::new("C", 100.0, 600.0, "m^gamma/s"),
                ParamSpec::new("gamma", 1.0, 3.0, "1"),
            ],
            "C*(u - v)/s^gamma",
            None,
        ),
        "IDM" => ModelSpec::new(
            "IDM",
            vec![
                ParamSpec::new("s_j", 3.0, 25.0, "m"),
                ParamSpec::new("v_f", 21.0, 41.0, "m/s"),
                ParamSpec::new("T", 0.1, 3.0, "s"),
                ParamSpec::new("a", 0.1, 3.0, "m/s^2"),
                ParamSpec::new("b", 0.5, 5.0, "m/s^2"),
            ],
            "a*(1 - (v/v_f)^4 - ((s_j + v*T + v*(u - v)/(2*sqrt(a*b)))/s)^2)",
            Some("(s_j + u*T)/sqrt(1 - (u/v_f)^4)"),
        ),
        _ => unreachable!(),
    };
    Ok(m.expect("builtin models are well-formed"))
}

impl ModelSpec {
    /// Builds a model from expression text. `dynamics` may reference `s`,
    /// `v`, `u` and the parameters; `equilibrium_gap` may reference `u`
    /// (the lead speed) and the parameters, or be `None` when any gap is an
    /// equilibrium.
    pub fn new(
        name: &str,
        params: Vec<ParamSpec>,
        dynamics: &str,
        equilibrium_gap: Option<&str>,
    ) -> Result<Self> {
        for p in &params {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::InvalidModel(format!(
                    "parameter `{}` needs finite bounds with lower < upper (got [{}, {}])",
                    p.name, p.lower, p.upper
                )));
            }
            if matches!(p.name.as_str(), "s" | "v") || p.name.starts_with("u_") || p.name == "u" {
                return Err(Error::InvalidModel(format!(
                    "parameter name `{}` collides with a state or input",
                    p.name
                )));
            }
        }
        let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let table = SymbolTable::car_following(&names, 0)?;
        let dynamics = parse(dynamics, &table).map_err(|e| invalid("dynamics", e))?;

        let mut gap_symbols = vec![Symbol::new("u", SymbolKind::InputDerivative(0))];
        gap_symbols.extend(names.iter().map(|n| Symbol::new(n.clone(), SymbolKind::Parameter)));
        let gap_table = SymbolTable::new(gap_symbols)?;
        let equilibrium = match equilibrium_gap {
            Some(text) => EquilibriumGap::Closed(
                parse(text, &gap_table).map_err(|e| invalid("equilibrium gap", e))?,
            ),
            None => EquilibriumGap::Free,
        };

        let mut inputs = vec!["s".to_string(), "v".to_string(), "u".to_string()];
        inputs.extend(names.iter().cloned());
        let dynamics_tape = Tape::compile(std::slice::from_ref(&dynamics), &inputs)?;
        let gap_tape = match &equilibrium {
            EquilibriumGap::Closed(e) => Some(Tape::compile(std::slice::from_ref(e), &inputs[2..])?),
            EquilibriumGap::Free => None,
        };
        Ok(ModelSpec {
            name: name.to_string(),
            params,
            dynamics,
            equilibrium,
            dynamics_tape,
            gap_tape,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.lower).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.upper).collect()
    }

    /// Symbolic acceleration `f_CF(s, v, u; theta)`.
    pub fn dynamics(&self) -> &Expr {
        &self.dynamics
    }

    pub fn equilibrium_gap(&self) -> &EquilibriumGap {
        &self.equilibrium
    }

    /// Compiled acceleration over inputs `[s, v, u, theta...]`.
    pub fn dynamics_tape(&self) -> &Tape {
        &self.dynamics_tape
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.params.len(),
                theta.len()
            )));
        }
        for (p, &x) in self.params.iter().zip(theta) {
            if !(x >= p.lower && x <= p.upper) {
                return Err(Error::InvalidArgument(format!(
                    "{} = {x} is outside [{}, {}]",
                    p.name, p.lower, p.upper
                )));
            }
        }
        Ok(())
    }

    /// Acceleration at state `x` under lead speed `u`.
    pub fn acceleration(&self, x: State, u: f64, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.params.len(),
                theta.len()
            )));
        }
        let mut inputs = Vec::with_capacity(3 + theta.len());
        inputs.extend_from_slice(&[x.s, x.v, u]);
        inputs.extend_from_slice(theta);
        let out = self.dynamics_tape.eval(&inputs).map_err(ExprError::from)?;
        Ok(out[0])
    }

    /// Equilibrium initial condition `[s0*, u0]` for lead speed `u0`.
    ///
    /// For models whose equilibrium gap is free, `free_gap` supplies it;
    /// otherwise the argument is ignored.
    pub fn equilibrium_ic(&self, u0: f64, theta: &[f64], free_gap: Option<f64>) -> Result<State> {
        if !(u0 >= 0.0 && u0.is_finite()) {
            return Err(Error::InvalidArgument(format!("lead speed must be non-negative, got {u0}")));
        }
        self.check_theta(theta)?;
        let s0 = match &self.gap_tape {
            Some(tape) => {
                let mut inputs = Vec::with_capacity(1 + theta.len());
                inputs.push(u0);
                inputs.extend_from_slice(theta);
                let s0 = tape.eval(&inputs).map_err(|e| Error::NoEquilibrium {
                    model: self.name.clone(),
                    reason: e.to_string(),
                })?[0];
                if !s0.is_finite() {
                    return Err(Error::NoEquilibrium {
                        model: self.name.clone(),
                        reason: format!("gap evaluates to {s0}"),
                    });
                }
                s0
            }
            None => free_gap.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{} has a free equilibrium gap; supply one explicitly",
                    self.name
                ))
            })?,
        };
        Ok(State::new(s0, u0))
    }

    /// Named binding of state, lead speed and parameters, for use with
    /// [`crate::expr::evaluate`].
    pub fn binding(&self, x: State, u: f64, theta: &[f64]) -> HashMap<String, f64> {
        let mut p: HashMap<String, f64> = self
            .params
            .iter()
            .zip(theta)
            .map(|(spec, &val)| (spec.name.clone(), val))
            .collect();
        p.insert("s".into(), x.s);
        p.insert("v".into(), x.v);
        p.insert("u".into(), u);
        p
    }
}

fn invalid(what: &str, e: ExprError) -> Error {
    Error::InvalidModel(format!("{what}: {e}"))
}
