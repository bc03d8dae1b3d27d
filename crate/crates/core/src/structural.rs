//! Structural local identifiability through the observability-identifiability
//! matrix.
//!
//! Parameters are appended to the state as constants (`theta' = 0`), the
//! output is differentiated along the dynamics with the input-derivative
//! chain terms included, and the gradients of those derivatives with respect
//! to the augmented state are stacked into `O_I`. Full rank at a point
//! implies local observability and local structural identifiability there.
//!
//! Rank is decided numerically: free symbols are drawn at random and the
//! largest rank over the trials is reported as the generic rank. Verdicts
//! are therefore "generic" and cannot certify the measure-zero exception
//! set.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{
    build, dag_size_of, differentiate, input_name, Expr, ExprError, SymbolTable, Tape,
    DEFAULT_NODE_CAP,
};
use crate::models::{builtin_model, EquilibriumGap, ModelSpec, State, BUILTIN_MODELS};

/// Sampling range for the initial space gap (m).
pub const GAP_RANGE: (f64, f64) = (5.0, 120.0);
/// Sampling range for the initial ego and lead speeds (m/s).
pub const SPEED_RANGE: (f64, f64) = (1.0, 40.0);
/// Sampling range for input derivatives of order one and higher.
pub const INPUT_RATE_RANGE: (f64, f64) = (-3.0, 3.0);
pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
const ATTEMPTS_PER_TRIAL: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    GapOnly,
    GapAndSpeed,
}

impl OutputMode {
    pub fn label(self) -> &'static str {
        match self {
            OutputMode::GapOnly => "gap-only",
            OutputMode::GapAndSpeed => "gap-and-speed",
        }
    }
}

impl std::str::FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gap-only" => Ok(OutputMode::GapOnly),
            "gap-and-speed" => Ok(OutputMode::GapAndSpeed),
            _ => Err(Error::InvalidArgument(format!(
                "unknown output `{s}` (expected gap-only or gap-and-speed)"
            ))),
        }
    }
}

/// The car-following system with parameters appended to the state.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    model: ModelSpec,
    table: SymbolTable,
    augmented: Vec<String>,
    f: Vec<Expr>,
    g: Vec<Expr>,
    max_order: usize,
    extra_lie: usize,
    node_cap: usize,
}

pub fn augment(m: &ModelSpec, output: OutputMode, max_order: usize) -> Result<AugmentedSystem> {
    let n_aug = 2 + m.n_params();
    if max_order + 1 < n_aug {
        return Err(Error::InvalidArgument(format!(
            "input derivative order {max_order} is below n_aug - 1 = {}",
            n_aug - 1
        )));
    }
    let table = SymbolTable::car_following(&m.param_names(), max_order)?;
    let augmented: Vec<String> = table.augmented_state().iter().map(|s| s.name.clone()).collect();
    let mut f = vec![
        build::sub(Expr::symbol("u"), Expr::symbol("v")),
        m.dynamics().clone(),
    ];
    f.extend((0..m.n_params()).map(|_| build::zero()));
    let g = match output {
        OutputMode::GapOnly => vec![Expr::symbol("s")],
        OutputMode::GapAndSpeed => vec![Expr::symbol("s"), Expr::symbol("v")],
    };
    Ok(AugmentedSystem {
        model: m.clone(),
        table,
        augmented,
        f,
        g,
        max_order,
        extra_lie: 0,
        node_cap: DEFAULT_NODE_CAP,
    })
}

impl AugmentedSystem {
    pub fn with_node_cap(mut self, cap: usize) -> Self {
        self.node_cap = cap;
        self
    }

    /// Appends `extra` Lie-derivative rows per output beyond the usual
    /// `n_aug`. A gap-only system with one extra row spans the same space as
    /// the gap-and-speed system without any.
    pub fn with_extra_lie(mut self, extra: usize) -> Result<Self> {
        if self.n_aug() + extra > self.max_order + 1 {
            return Err(Error::InvalidArgument(format!(
                "{extra} extra Lie derivatives need input derivatives up to order {}",
                self.n_aug() + extra - 1
            )));
        }
        self.extra_lie = extra;
        Ok(self)
    }

    /// Lie-derivative rows per output in the matrix.
    pub fn rows_per_output(&self) -> usize {
        self.n_aug() + self.extra_lie
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    /// Names of the augmented state `[s, v, theta...]`.
    pub fn augmented_names(&self) -> &[String] {
        &self.augmented
    }

    pub fn n_aug(&self) -> usize {
        self.augmented.len()
    }

    pub fn vector_field(&self) -> &[Expr] {
        &self.f
    }

    pub fn outputs(&self) -> &[Expr] {
        &self.g
    }

    pub fn max_input_order(&self) -> usize {
        self.max_order
    }

    /// One application of the extended Lie derivative operator.
    pub fn lie_step(&self, h: &Expr) -> Result<Expr> {
        let mut acc = build::zero();
        for (name, fk) in self.augmented.iter().zip(&self.f) {
            if fk.is_zero() {
                continue;
            }
            let d = differentiate(h, name);
            acc = build::add(acc, build::mul(d, fk.clone()));
        }
        for j in 0..=self.max_order {
            let uj = input_name(j);
            let d = differentiate(h, &uj);
            if d.is_zero() {
                continue;
            }
            if j == self.max_order {
                return Err(Error::InvalidArgument(format!(
                    "expression depends on {uj}, the highest housed input derivative"
                )));
            }
            acc = build::add(acc, build::mul(d, Expr::symbol(&input_name(j + 1))));
        }
        self.check_size(std::slice::from_ref(&acc))?;
        Ok(acc)
    }

    /// `L_f^order h`.
    pub fn extended_lie(&self, h: &Expr, order: usize) -> Result<Expr> {
        if order > self.max_order {
            return Err(Error::InvalidArgument(format!(
                "Lie derivative order {order} exceeds the housed input order {}",
                self.max_order
            )));
        }
        let mut current = h.clone();
        for _ in 0..order {
            current = self.lie_step(&current)?;
        }
        Ok(current)
    }

    /// `[L^0 h, L^1 h, ..., L^(count-1) h]`.
    pub fn lie_series(&self, h: &Expr, count: usize) -> Result<Vec<Expr>> {
        let mut out = Vec::with_capacity(count);
        let mut current = h.clone();
        for i in 0..count {
            if i > 0 {
                current = self.lie_step(&current)?;
            }
            out.push(current.clone());
        }
        Ok(out)
    }

    fn check_size(&self, roots: &[Expr]) -> Result<()> {
        let nodes = dag_size_of(roots);
        if nodes > self.node_cap {
            return Err(ExprError::SizeCap {
                nodes,
                cap: self.node_cap,
            }
            .into());
        }
        Ok(())
    }
}

/// Symbolic observability-identifiability matrix.
#[derive(Debug, Clone)]
pub struct OIMatrix {
    rows: Vec<Vec<Expr>>,
    columns: Vec<String>,
    symbols: Vec<String>,
    tape: Tape,
}

pub fn build_oi(sys: &AugmentedSystem) -> Result<OIMatrix> {
    let n = sys.rows_per_output();
    let mut rows = Vec::with_capacity(n * sys.g.len());
    for g in &sys.g {
        for lie in sys.lie_series(g, n)? {
            let row: Vec<Expr> = sys
                .augmented
                .iter()
                .map(|x| differentiate(&lie, x))
                .collect();
            rows.push(row);
        }
    }
    let flat: Vec<Expr> = rows.iter().flatten().cloned().collect();
    sys.check_size(&flat)?;
    let symbols: Vec<String> = sys.table.symbols().iter().map(|s| s.name.clone()).collect();
    let tape = Tape::compile(&flat, &symbols)?;
    Ok(OIMatrix {
        rows,
        columns: sys.augmented.clone(),
        symbols,
        tape,
    })
}

impl OIMatrix {
    pub fn rows(&self) -> &[Vec<Expr>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Column labels, the augmented state names.
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Ordering of the numeric point expected by [`OIMatrix::evaluate`]:
    /// `[s, v, theta..., u, u_1, ..., u_J]`.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expr {
        &self.rows[row][col]
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let values = self.tape.eval(point).map_err(ExprError::from)?;
        Ok(DMatrix::from_row_slice(self.rows.len(), self.columns.len(), &values))
    }

    /// Evaluates at a named binding; unbound input derivatives default to 0.
    pub fn evaluate_named(&self, point: &HashMap<String, f64>) -> Result<DMatrix<f64>> {
        let values = self
            .symbols
            .iter()
            .map(|name| match point.get(name) {
                Some(&v) => Ok(v),
                None if name.starts_with("u_") => Ok(0.0),
                None => Err(Error::Expr(ExprError::Unbound(name.clone()))),
            })
            .collect::<Result<Vec<_>>>()?;
        self.evaluate(&values)
    }
}

/// Number of singular values above `tol` times the largest one.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 || !largest.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&x| x > tol * largest).count()
}

fn without_column(m: &DMatrix<f64>, col: usize) -> DMatrix<f64> {
    m.clone().remove_column(col)
}

/// Where the initial condition comes from in a rank experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum IcMode {
    /// Gap, speeds and parameters all drawn at random.
    Generic,
    /// `v0 = u0` and the model's equilibrium gap.
    Equilibrium,
    /// Fixed `x0`, random parameters and lead speed.
    FixedIc { s0: f64, v0: f64 },
    /// Fixed `x0` and parameters, random lead speed.
    FixedPoint { s0: f64, v0: f64, theta: Vec<f64> },
}

impl IcMode {
    pub fn label(&self) -> &'static str {
        match self {
            IcMode::Generic => "generic",
            IcMode::Equilibrium => "equilibrium",
            IcMode::FixedIc { .. } => "fixed-ic",
            IcMode::FixedPoint { .. } => "fixed-point",
        }
    }
}

/// A symbol whose sampled value is replaced by an expression of the other
/// symbols, e.g. `tau = s / v`. Pins are applied in order after sampling.
#[derive(Debug, Clone)]
pub struct Pin {
    pub symbol: String,
    pub value: Expr,
}

#[derive(Debug, Clone)]
pub struct RankOptions {
    pub mode: IcMode,
    /// Input polynomial degree: `u^(j) = 0` for every `j > degree`.
    pub degree: usize,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub pins: Vec<Pin>,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            mode: IcMode::Generic,
            degree: 0,
            trials: DEFAULT_TRIALS,
            seed: 0,
            tol: DEFAULT_RANK_TOL,
            pins: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub model: String,
    pub output: OutputMode,
    pub mode: String,
    pub degree: usize,
    pub n_aug: usize,
    pub generic_rank: usize,
    pub full: bool,
    pub unidentifiable: Vec<String>,
    pub trials: usize,
    pub valid_trials: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl RankReport {
    pub fn verdict(&self) -> &'static str {
        if self.full {
            "full rank (generic): structurally locally identifiable"
        } else {
            "deficient"
        }
    }

    /// `key = value` lines, one field per line.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("model", self.model.clone());
        kv("output", self.output.label().into());
        kv("mode", self.mode.clone());
        kv("degree", self.degree.to_string());
        kv("n_aug", self.n_aug.to_string());
        kv("rank", self.generic_rank.to_string());
        kv("full", self.full.to_string());
        kv("verdict", self.verdict().into());
        kv("unidentifiable", self.unidentifiable.join(","));
        kv("trials", self.trials.to_string());
        kv("valid_trials", self.valid_trials.to_string());
        kv("tolerance", format!("{:e}", self.tolerance));
        kv("seed", self.seed.to_string());
        out
    }
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}; {}; degree {}]: rank {}/{} {}",
            self.model,
            self.output.label(),
            self.mode,
            self.degree,
            self.generic_rank,
            self.n_aug,
            self.verdict()
        )?;
        if !self.unidentifiable.is_empty() {
            write!(f, "; unidentifiable: {}", self.unidentifiable.join(", "))?;
        }
        Ok(())
    }
}

/// Draws one numeric point in the ordering of [`OIMatrix::symbols`].
fn sample_point(
    model: &ModelSpec,
    symbols: &[String],
    opts: &RankOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let n_params = model.n_params();
    let mut theta: Vec<f64> = model
        .params()
        .iter()
        .map(|p| rng.random_range(p.lower..=p.upper))
        .collect();
    let mut s0 = rng.random_range(GAP_RANGE.0..=GAP_RANGE.1);
    let mut v0 = rng.random_range(SPEED_RANGE.0..=SPEED_RANGE.1);
    let u0 = rng.random_range(SPEED_RANGE.0..=SPEED_RANGE.1);
    let n_inputs = symbols.len() - 2 - n_params;
    let mut inputs = vec![u0];
    for j in 1..n_inputs {
        let draw = rng.random_range(INPUT_RATE_RANGE.0..=INPUT_RATE_RANGE.1);
        inputs.push(if j <= opts.degree { draw } else { 0.0 });
    }

    match &opts.mode {
        IcMode::Generic => {}
        IcMode::Equilibrium => {
            let free = match model.equilibrium_gap() {
                EquilibriumGap::Free => Some(s0),
                EquilibriumGap::Closed(_) => None,
            };
            let x = model.equilibrium_ic(u0, &theta, free)?;
            s0 = x.s;
            v0 = x.v;
        }
        IcMode::FixedIc { s0: s, v0: v } => {
            s0 = *s;
            v0 = *v;
        }
        IcMode::FixedPoint { s0: s, v0: v, theta: t } => {
            model.check_theta(t)?;
            s0 = *s;
            v0 = *v;
            theta = t.clone();
        }
    }

    let mut point = Vec::with_capacity(symbols.len());
    point.push(s0);
    point.push(v0);
    point.extend_from_slice(&theta);
    point.extend_from_slice(&inputs);

    if !opts.pins.is_empty() {
        let mut named: HashMap<String, f64> =
            symbols.iter().cloned().zip(point.iter().cloned()).collect();
        for pin in &opts.pins {
            let idx = symbols
                .iter()
                .position(|s| s == &pin.symbol)
                .ok_or_else(|| Error::InvalidArgument(format!("cannot pin unknown symbol `{}`", pin.symbol)))?;
            let value = crate::expr::evaluate(&pin.value, &named)?;
            point[idx] = value;
            named.insert(pin.symbol.clone(), value);
        }
    }
    Ok(point)
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Generic rank of `oi` over random points drawn according to `opts`, with
/// column-removal diagnosis of the unidentifiable augmented-state entries.
pub fn generic_rank(sys: &AugmentedSystem, oi: &OIMatrix, opts: &RankOptions) -> Result<RankReport> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if opts.degree > sys.max_input_order() {
        return Err(Error::InvalidArgument(format!(
            "input degree {} exceeds the housed order {}",
            opts.degree,
            sys.max_input_order()
        )));
    }
    let n = sys.n_aug();
    let mut best = 0usize;
    let mut best_without = vec![0usize; n];
    let mut valid = 0usize;
    let mut last_err = None;
    for trial in 0..opts.trials {
        let mut rng = trial_rng(opts.seed, trial);
        let mut matrix = None;
        for _ in 0..ATTEMPTS_PER_TRIAL {
            let point = match sample_point(sys.model(), oi.symbols(), opts, &mut rng) {
                Ok(p) => p,
                Err(e) if e.is_domain() => {
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            match oi.evaluate(&point) {
                Ok(m) if m.iter().all(|x| x.is_finite()) => {
                    matrix = Some(m);
                    break;
                }
                Ok(_) => continue,
                Err(e) if e.is_domain() => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        let Some(m) = matrix else { continue };
        valid += 1;
        best = best.max(numeric_rank(&m, opts.tol));
        for (col, slot) in best_without.iter_mut().enumerate() {
            *slot = (*slot).max(numeric_rank(&without_column(&m, col), opts.tol));
        }
    }
    if valid == 0 {
        return Err(last_err.unwrap_or(Error::NoValidSample {
            attempts: opts.trials * ATTEMPTS_PER_TRIAL,
        }));
    }
    let full = best == n;
    let unidentifiable = if full {
        Vec::new()
    } else {
        best_without
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == best)
            .map(|(i, _)| sys.augmented_names()[i].clone())
            .collect()
    };
    Ok(RankReport {
        model: sys.model().name().to_string(),
        output: if sys.outputs().len() == 1 {
            OutputMode::GapOnly
        } else {
            OutputMode::GapAndSpeed
        },
        mode: opts.mode.label().to_string(),
        degree: opts.degree,
        n_aug: n,
        generic_rank: best,
        full,
        unidentifiable,
        trials: opts.trials,
        valid_trials: valid,
        tolerance: opts.tol,
        seed: opts.seed,
    })
}

/// Smallest input degree `n <= max_degree` giving full generic rank.
pub fn min_admissible_degree(
    sys: &AugmentedSystem,
    oi: &OIMatrix,
    base: &RankOptions,
    max_degree: usize,
) -> Result<Option<usize>> {
    if max_degree + 1 > sys.max_input_order() {
        return Err(Error::InvalidArgument(format!(
            "max degree {max_degree} needs input derivatives up to order {}",
            max_degree + 1
        )));
    }
    for degree in 0..=max_degree {
        let opts = RankOptions {
            degree,
            ..base.clone()
        };
        if generic_rank(sys, oi, &opts)?.full {
            return Ok(Some(degree));
        }
    }
    Ok(None)
}

/// Input-derivative order housed by default for a model: enough for the
/// Lie derivatives plus one extra row, and for degree searches up to
/// `max_degree`.
pub fn default_max_order(m: &ModelSpec, max_degree: usize) -> usize {
    (m.n_params() + 2).max(max_degree + 1)
}

/// The eight cells of the structural summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralSummaryRow {
    pub model: String,
    pub params: Vec<String>,
    pub generic: Option<usize>,
    pub equilibrium: Option<usize>,
    pub reports: Vec<RankReport>,
}

fn degree_cell(d: Option<usize>) -> String {
    match d {
        Some(n) => format!("n>={n}"),
        None => "N/A".to_string(),
    }
}

pub const SUMMARY_MAX_DEGREE: usize = 3;

/// Minimum admissible input degree for every builtin model from generic and
/// equilibrium initial conditions, searching degrees `0..=3`.
pub fn structural_summary(output: OutputMode, trials: usize, seed: u64, tol: f64) -> Result<Vec<StructuralSummaryRow>> {
    let mut rows = Vec::new();
    for name in BUILTIN_MODELS {
        let m = builtin_model(name)?;
        let sys = augment(&m, output, default_max_order(&m, SUMMARY_MAX_DEGREE))?;
        let oi = build_oi(&sys)?;
        let mut reports = Vec::new();
        let mut cells = [None, None];
        for (slot, mode) in [IcMode::Generic, IcMode::Equilibrium].into_iter().enumerate() {
            for degree in 0..=SUMMARY_MAX_DEGREE {
                let opts = RankOptions {
                    mode: mode.clone(),
                    degree,
                    trials,
                    seed,
                    tol,
                    pins: Vec::new(),
                };
                let report = generic_rank(&sys, &oi, &opts)?;
                let full = report.full;
                reports.push(report);
                if full {
                    cells[slot] = Some(degree);
                    break;
                }
            }
        }
        rows.push(StructuralSummaryRow {
            model: m.name().to_string(),
            params: m.param_names(),
            generic: cells[0],
            equilibrium: cells[1],
            reports,
        });
    }
    Ok(rows)
}

pub fn render_summary(rows: &[StructuralSummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:<24} {:<18} {:<18}\n",
        "Model", "Parameters", "Generic x0", "Equilibrium x0*"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:<24} {:<18} {:<18}\n",
            r.model,
            r.params.join(", "),
            degree_cell(r.generic),
            degree_cell(r.equilibrium)
        ));
    }
    out
}

/// Convenience: a fixed-point rank check at a state, parameters and input
/// derivatives `[u, u_1, ...]` (missing orders are zero).
pub fn rank_at(oi: &OIMatrix, x: State, theta: &[f64], inputs: &[f64], tol: f64) -> Result<usize> {
    let mut point = vec![x.s, x.v];
    point.extend_from_slice(theta);
    let n_inputs = oi.symbols().len() - point.len();
    if inputs.len() > n_inputs {
        return Err(Error::InvalidArgument(format!(
            "{} input values given, {} housed",
            inputs.len(),
            n_inputs
        )));
    }
    point.extend_from_slice(inputs);
    point.resize(oi.symbols().len(), 0.0);
    Ok(numeric_rank(&oi.evaluate(&point)?, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn cthrv() -> (AugmentedSystem, OIMatrix) {
        let m = builtin_model("CTH-RV").unwrap();
        let sys = augment(&m, OutputMode::GapOnly, 4).unwrap();
        let oi = build_oi(&sys).unwrap();
        (sys, oi)
    }

    #[test]
    fn augmented_cthrv() {
        let (sys, _) = cthrv();
        assert_eq!(sys.n_aug(), 5);
        let f: Vec<String> = sys.vector_field().iter().map(|e| e.to_string()).collect();
        assert_eq!(f, ["u - v", "k1 * (s - tau * v) + k2 * (u - v)", "0", "0", "0"]);
        let m = builtin_model("FTL").unwrap();
        assert_eq!(augment(&m, OutputMode::GapOnly, 3).unwrap().n_aug(), 4);
        let m = builtin_model("IDM").unwrap();
        let idm = augment(&m, OutputMode::GapAndSpeed, 6).unwrap();
        assert_eq!((idm.outputs().len(), idm.n_aug()), (2, 7));
        assert!(augment(&m, OutputMode::GapOnly, 5).is_err());
    }

    #[test]
    fn low_order_lie_derivatives() {
        let (sys, _) = cthrv();
        let g = Expr::symbol("s");
        assert_eq!(sys.extended_lie(&g, 0).unwrap(), g);
        assert_eq!(sys.extended_lie(&g, 1).unwrap().to_string(), "u - v");
        assert!(sys.extended_lie(&g, 5).is_err());
    }

    #[test]
    fn first_rows_of_cthrv_matrix() {
        let (_, oi) = cthrv();
        let row = |i: usize| -> Vec<String> { oi.rows()[i].iter().map(|e| e.to_string()).collect() };
        assert_eq!(row(0), ["1", "0", "0", "0", "0"]);
        assert_eq!(row(1), ["0", "(-1)", "0", "0", "0"]);
        let t = SymbolTable::car_following(&["k1".into(), "k2".into(), "tau".into()], 0).unwrap();
        let p = |s: &str| parse(s, &t).unwrap();
        let point: HashMap<String, f64> =
            [("s", 52.0), ("v", 21.0), ("u", 24.0), ("k1", 0.3), ("k2", 0.7), ("tau", 1.9)]
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect();
        let expected = ["-k1", "k2 + k1*tau", "tau*v - s", "v - u", "k1*v"];
        for (col, text) in expected.iter().enumerate() {
            let got = crate::expr::evaluate(oi.entry(2, col), &point).unwrap();
            let want = crate::expr::evaluate(&p(text), &point).unwrap();
            assert!((got - want).abs() < 1e-12, "entry (3,{}) {got} vs {want}", col + 1);
        }
    }

    #[test]
    fn numeric_rank_of_simple_matrices() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(numeric_rank(&m, 1e-9), 2);
        assert_eq!(numeric_rank(&DMatrix::zeros(2, 2), 1e-9), 0);
        assert_eq!(numeric_rank(&DMatrix::identity(4, 4), 1e-9), 4);
    }

    #[test]
    fn equilibrium_cthrv_is_deficient_without_input_rate() {
        let (sys, oi) = cthrv();
        let opts = RankOptions {
            mode: IcMode::Equilibrium,
            ..RankOptions::default()
        };
        let r = generic_rank(&sys, &oi, &opts).unwrap();
        assert_eq!(r.generic_rank, 3);
        assert_eq!(r.unidentifiable, ["k1", "k2"]);
        assert!(!r.full);
        let r1 = generic_rank(&sys, &oi, &RankOptions { degree: 1, ..opts }).unwrap();
        assert!(r1.full);
        assert!(r1.unidentifiable.is_empty());
    }

    #[test]
    fn same_seed_same_report() {
        let (sys, oi) = cthrv();
        let opts = RankOptions {
            seed: 99,
            ..RankOptions::default()
        };
        assert_eq!(generic_rank(&sys, &oi, &opts).unwrap(), generic_rank(&sys, &oi, &opts).unwrap());
    }

    #[test]
    fn node_cap_aborts() {
        let m = builtin_model("IDM").unwrap();
        let sys = augment(&m, OutputMode::GapOnly, 6).unwrap().with_node_cap(50);
        assert!(matches!(
            build_oi(&sys),
            Err(Error::Expr(ExprError::SizeCap { cap: 50, .. }))
        ));
    }

    #[test]
    fn report_key_values() {
        let (sys, oi) = cthrv();
        let r = generic_rank(&sys, &oi, &RankOptions { mode: IcMode::Equilibrium, seed: 3, ..Default::default() }).unwrap();
        let kv = r.to_key_values();
        assert!(kv.contains("model = CTH-RV\n"));
        assert!(kv.contains("rank = 3\n"));
        assert!(kv.contains("unidentifiable = k1,k2\n"));
        assert!(kv.contains("seed = 3\n"));
    }
}
