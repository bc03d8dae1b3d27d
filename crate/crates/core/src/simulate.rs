//! Fixed-step forward simulation and the output-error functional.
//!
//! The integrator is explicit Euler:
//! `s[k+1] = s[k] + dt (u(t_k) - v[k])`, `v[k+1] = v[k] + dt f(s[k], v[k], u(t_k))`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Tape;
use crate::models::{ModelSpec, State};
use crate::structural::OutputMode;

pub const DEFAULT_HORIZON: f64 = 80.0;
pub const DEFAULT_DT: f64 = 0.1;
/// Non-equilibrium initial condition used for the direct tests.
pub const DEFAULT_X0: State = State { s: 72.7, v: 32.5 };

/// Lead-vehicle speed as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InputProfile {
    Constant { u: f64 },
    /// `u(t) = c0 + c1 t + c2 t^2 + ...`
    Polynomial { coefficients: Vec<f64> },
    /// Linear interpolation between `(t, u)` samples.
    PiecewiseLinear { samples: Vec<(f64, f64)> },
}

/// Breakpoints of the shipped time-varying lead profile: 80 s starting at
/// 32.5 m/s, oscillating within [27, 35] m/s with four speed reversals.
pub const SHIPPED_PROFILE: [(f64, f64); 6] = [
    (0.0, 32.5),
    (12.0, 35.0),
    (28.0, 27.5),
    (44.0, 34.5),
    (60.0, 28.0),
    (80.0, 33.0),
];

impl InputProfile {
    pub fn constant(u: f64) -> Self {
        InputProfile::Constant { u }
    }

    pub fn shipped() -> Self {
        InputProfile::PiecewiseLinear {
            samples: SHIPPED_PROFILE.to_vec(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            InputProfile::Constant { u } => *u,
            InputProfile::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            InputProfile::PiecewiseLinear { samples } => {
                let i = samples.partition_point(|&(tk, _)| tk <= t);
                if i == 0 {
                    return samples[0].1;
                }
                if i == samples.len() {
                    return samples[samples.len() - 1].1;
                }
                let (t0, u0) = samples[i - 1];
                let (t1, u1) = samples[i];
                u0 + (u1 - u0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Structural checks that do not depend on the time grid.
    fn validate_shape(&self, horizon: f64) -> Result<()> {
        match self {
            InputProfile::Constant { u } => {
                if !u.is_finite() || *u < 0.0 {
                    return Err(Error::InvalidArgument(format!("constant input {u} must be finite and >= 0")));
                }
            }
            InputProfile::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "polynomial input needs at least one finite coefficient".into(),
                    ));
                }
            }
            InputProfile::PiecewiseLinear { samples } => {
                if samples.len() < 2 {
                    return Err(Error::InvalidArgument("piecewise-linear input needs at least two samples".into()));
                }
                if samples.iter().any(|(t, u)| !t.is_finite() || !u.is_finite()) {
                    return Err(Error::InvalidArgument("input samples must be finite".into()));
                }
                if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidArgument("input sample times must be strictly increasing".into()));
                }
                let (first, last) = (samples[0].0, samples[samples.len() - 1].0);
                if first > 0.0 || last < horizon - 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "input samples cover [{first}, {last}] but the horizon is [0, {horizon}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses two-column `t,u` CSV text; a non-numeric first line is taken
    /// as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "input CSV line {}: expected two columns `t,u`",
                    lineno + 1
                )));
            }
            match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
                (Ok(t), Ok(u)) => samples.push((t, u)),
                _ if samples.is_empty() && lineno == first_content_line(text) => continue,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "input CSV line {}: cannot parse `{line}` as numbers",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(InputProfile::PiecewiseLinear { samples })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read input CSV {}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    /// `t,u` CSV sampled on the scenario grid.
    pub fn to_csv(&self, horizon: f64, dt: f64) -> String {
        let mut out = String::from("t,u\n");
        let k = (horizon / dt).round() as usize;
        for i in 0..=k {
            let t = i as f64 * dt;
            let _ = writeln!(out, "{t},{}", self.value(t));
        }
        out
    }
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

/// A fully specified experiment: initial state, input, time grid, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x0: State,
    pub input: InputProfile,
    pub horizon: f64,
    pub dt: f64,
    pub output: OutputMode,
}

impl Scenario {
    pub fn new(x0: State, input: InputProfile, horizon: f64, dt: f64, output: OutputMode) -> Result<Self> {
        let sc = Scenario {
            x0,
            input,
            horizon,
            dt,
            output,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// The direct-test experiment: `x0 = [72.7, 32.5]`, shipped input,
    /// 80 s at 0.1 s, gap-only output.
    pub fn direct_default() -> Self {
        Scenario {
            x0: DEFAULT_X0,
            input: InputProfile::shipped(),
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            output: OutputMode::GapOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step dt = {} must be positive", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon T = {} must be positive", self.horizon)));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "horizon T = {} is not a positive integer multiple of dt = {}",
                self.horizon, self.dt
            )));
        }
        if !self.x0.s.is_finite() || !self.x0.v.is_finite() {
            return Err(Error::InvalidArgument("initial state must be finite".into()));
        }
        self.input.validate_shape(self.horizon)?;
        for (k, u) in self.input_samples().iter().enumerate() {
            if !u.is_finite() || *u < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "input speed {u} at t = {} is negative or not finite",
                    k as f64 * self.dt
                )));
            }
        }
        Ok(())
    }

    /// Number of steps `K = T / dt`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// `u(t_k)` for `k = 0..=K`.
    pub fn input_samples(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| self.input.value(self.time(k))).collect()
    }

    pub fn output_dim(&self) -> usize {
        match self.output {
            OutputMode::GapOnly => 1,
            OutputMode::GapAndSpeed => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub output: OutputMode,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Output vector at step `k`.
    pub fn output_at(&self, k: usize) -> Vec<f64> {
        match self.output {
            OutputMode::GapOnly => vec![self.s[k]],
            OutputMode::GapAndSpeed => vec![self.s[k], self.v[k]],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,v\n");
        for k in 0..self.len() {
            let _ = writeln!(out, "{},{},{}", self.times[k], self.s[k], self.v[k]);
        }
        out
    }
}

/// Reusable simulation workspace for one model and scenario. Holds the
/// sampled input and the tape scratch so repeated runs do not allocate.
#[derive(Debug, Clone)]
pub struct Simulator {
    tape: Tape,
    scratch: Vec<f64>,
    args: Vec<f64>,
    out: [f64; 1],
    u: Vec<f64>,
    x0: State,
    dt: f64,
    output: OutputMode,
    n_params: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Simulator {
    pub fn new(m: &ModelSpec, sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        let tape = m.dynamics_tape().clone();
        let scratch = tape.scratch();
        Ok(Simulator {
            scratch,
            args: vec![0.0; 3 + m.n_params()],
            out: [0.0],
            u: sc.input_samples(),
            x0: sc.x0,
            dt: sc.dt,
            output: sc.output,
            n_params: m.n_params(),
            lower: m.lower_bounds(),
            upper: m.upper_bounds(),
            tape,
        })
    }

    pub fn steps(&self) -> usize {
        self.u.len() - 1
    }

    /// Length of the flattened output buffer written by [`Simulator::run_outputs`].
    pub fn output_len(&self) -> usize {
        self.u.len()
            * match self.output {
                OutputMode::GapOnly => 1,
                OutputMode::GapAndSpeed => 2,
            }
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.n_params,
                theta.len()
            )));
        }
        for (i, &x) in theta.iter().enumerate() {
            if !(x >= self.lower[i] && x <= self.upper[i]) {
                return Err(Error::InvalidArgument(format!(
                    "parameter {} = {x} outside [{}, {}]",
                    i, self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    /// Integrates and calls `visit(k, s_k, v_k)` for `k = 0..=K`.
    fn integrate(&mut self, theta: &[f64], mut visit: impl FnMut(usize, f64, f64)) -> Result<()> {
        self.check_theta(theta)?;
        self.args[3..].copy_from_slice(theta);
        let (mut s, mut v) = (self.x0.s, self.x0.v);
        let k_max = self.u.len() - 1;
        for k in 0..=k_max {
            visit(k, s, v);
            if k == k_max {
                break;
            }
            let u = self.u[k];
            self.args[0] = s;
            self.args[1] = v;
            self.args[2] = u;
            let time = k as f64 * self.dt;
            self.tape
                .eval_into(&self.args, &mut self.scratch, &mut self.out)
                .map_err(|source| Error::DomainAtStep { step: k, time, source })?;
            let a = self.out[0];
            let s_next = s + self.dt * (u - v);
            let v_next = v + self.dt * a;
            if !s_next.is_finite() || !v_next.is_finite() {
                return Err(Error::BlowUp {
                    step: k + 1,
                    time: time + self.dt,
                    s: s_next,
                    v: v_next,
                });
            }
            s = s_next;
            v = v_next;
        }
        Ok(())
    }

    pub fn run(&mut self, theta: &[f64]) -> Result<Trajectory> {
        let n = self.u.len();
        let (mut ss, mut vs) = (Vec::with_capacity(n), Vec::with_capacity(n));
        self.integrate(theta, |_, s, v| {
            ss.push(s);
            vs.push(v);
        })?;
        Ok(Trajectory {
            times: (0..n).map(|k| k as f64 * self.dt).collect(),
            s: ss,
            v: vs,
            output: self.output,
        })
    }

    /// Writes the flattened outputs `[y_0, y_1, ...]` into `buf`.
    pub fn run_outputs(&mut self, theta: &[f64], buf: &mut Vec<f64>) -> Result<()> {
        buf.clear();
        let both = self.output == OutputMode::GapAndSpeed;
        self.integrate(theta, |_, s, v| {
            buf.push(s);
            if both {
                buf.push(v);
            }
        })
    }
}

impl Simulator {
    fn accel(&mut self, s: f64, v: f64, u: f64, theta: &[f64], k: usize) -> Result<f64> {
        self.args[0] = s;
        self.args[1] = v;
        self.args[2] = u;
        self.args[3..].copy_from_slice(theta);
        self.tape
            .eval_into(&self.args, &mut self.scratch, &mut self.out)
            .map_err(|source| Error::DomainAtStep {
                step: k,
                time: k as f64 * self.dt,
                source,
            })?;
        Ok(self.out[0])
    }

    /// Sum of squared output differences between two parameter vectors,
    /// integrating both in lockstep. Stops early and returns the partial
    /// sum as soon as it exceeds `cap`.
    pub fn pair_sq_error(&mut self, theta1: &[f64], theta2: &[f64], cap: f64) -> Result<f64> {
        self.check_theta(theta1)?;
        self.check_theta(theta2)?;
        let both = self.output == OutputMode::GapAndSpeed;
        let (mut s1, mut v1) = (self.x0.s, self.x0.v);
        let (mut s2, mut v2) = (s1, v1);
        let mut sum = 0.0;
        let k_max = self.u.len() - 1;
        for k in 0..=k_max {
            let ds = s1 - s2;
            sum += ds * ds;
            if both {
                let dv = v1 - v2;
                sum += dv * dv;
            }
            if sum > cap {
                return Ok(sum);
            }
            if k == k_max {
                break;
            }
            let u = self.u[k];
            let a1 = self.accel(s1, v1, u, theta1, k)?;
            let a2 = self.accel(s2, v2, u, theta2, k)?;
            let next = [
                s1 + self.dt * (u - v1),
                v1 + self.dt * a1,
                s2 + self.dt * (u - v2),
                v2 + self.dt * a2,
            ];
            if next.iter().any(|x| !x.is_finite()) {
                let (s, v) = if next[0].is_finite() && next[1].is_finite() {
                    (next[2], next[3])
                } else {
                    (next[0], next[1])
                };
                return Err(Error::BlowUp {
                    step: k + 1,
                    time: (k + 1) as f64 * self.dt,
                    s,
                    v,
                });
            }
            [s1, v1, s2, v2] = next;
        }
        Ok(sum)
    }
}

pub fn simulate(m: &ModelSpec, sc: &Scenario, theta: &[f64]) -> Result<Trajectory> {
    Simulator::new(m, sc)?.run(theta)
}

/// Mean squared output difference over the `K + 1` samples of two
/// flattened output buffers.
pub fn output_distance(y1: &[f64], y2: &[f64], samples: usize) -> f64 {
    debug_assert_eq!(y1.len(), y2.len());
    let sum: f64 = y1.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum();
    sum / samples as f64
}

/// `e(theta1, theta2) = sum_k |y_k(theta1) - y_k(theta2)|^2 / (K + 1)`.
pub fn output_error(m: &ModelSpec, sc: &Scenario, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
    let mut sim = Simulator::new(m, sc)?;
    let (mut y1, mut y2) = (Vec::new(), Vec::new());
    sim.run_outputs(theta1, &mut y1)?;
    sim.run_outputs(theta2, &mut y2)?;
    Ok(output_distance(&y1, &y2, sim.steps() + 1))
}

/// One axis of an error grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        (0..self.points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// `e(theta, theta_true)` over a two-parameter slice. `values[i][j]` is at
/// `x = xs[i]`, `y = ys[j]`; failed cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorGrid {
    pub x_param: String,
    pub y_param: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl ErrorGrid {
    pub fn finite_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().filter_map(|v| *v)
    }

    /// Long-format CSV: one row per cell, empty `e` for failed cells.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},e\n", self.x_param, self.y_param);
        for (i, x) in self.xs.iter().enumerate() {
            for (j, y) in self.ys.iter().enumerate() {
                match self.values[i][j] {
                    Some(e) => {
                        let _ = writeln!(out, "{x},{y},{e}");
                    }
                    None => {
                        let _ = writeln!(out, "{x},{y},");
                    }
                }
            }
        }
        out
    }
}

pub fn error_grid(
    m: &ModelSpec,
    sc: &Scenario,
    theta_true: &[f64],
    x_axis: &GridAxis,
    y_axis: &GridAxis,
) -> Result<ErrorGrid> {
    let names = m.param_names();
    let index = |axis: &GridAxis| {
        names
            .iter()
            .position(|n| *n == axis.param)
            .ok_or_else(|| Error::InvalidArgument(format!("model {} has no parameter `{}`", m.name(), axis.param)))
    };
    let (ix, iy) = (index(x_axis)?, index(y_axis)?);
    if ix == iy {
        return Err(Error::InvalidArgument("grid axes must be two different parameters".into()));
    }
    for axis in [x_axis, y_axis] {
        if axis.points == 0 || !(axis.min <= axis.max) {
            return Err(Error::InvalidArgument(format!("invalid range for grid axis `{}`", axis.param)));
        }
    }
    m.check_theta(theta_true)?;
    let mut base = Simulator::new(m, sc)?;
    let mut y_true = Vec::new();
    base.run_outputs(theta_true, &mut y_true)?;
    let samples = base.steps() + 1;
    let xs = x_axis.values();
    let ys = y_axis.values();
    let values = xs
        .par_iter()
        .map_init(
            || (base.clone(), Vec::new(), theta_true.to_vec()),
            |(sim, buf, theta), &x| {
                ys.iter()
                    .map(|&y| {
                        theta[ix] = x;
                        theta[iy] = y;
                        sim.run_outputs(theta, buf).ok()?;
                        Some(output_distance(buf, &y_true, samples))
                    })
                    .collect()
            },
        )
        .collect();
    Ok(ErrorGrid {
        x_param: x_axis.param.clone(),
        y_param: y_axis.param.clone(),
        xs,
        ys,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin_model;

    #[test]
    fn shipped_profile_shape() {
        let p = InputProfile::shipped();
        assert_eq!(p.value(0.0), 32.5);
        assert_eq!(p.value(6.0), 33.75);
        assert_eq!(p.value(80.0), 33.0);
        let sc = Scenario::direct_default();
        let u = sc.input_samples();
        assert_eq!(u.len(), 801);
        assert!(u.iter().all(|&x| (27.0..=35.0).contains(&x)));
        let reversals = u
            .windows(3)
            .filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
            .count();
        assert_eq!(reversals, 4);
    }

    #[test]
    fn polynomial_profile() {
        let p = InputProfile::Polynomial {
            coefficients: vec![20.0, 0.5, -0.01],
        };
        assert!((p.value(10.0) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn csv_profile_with_and_without_header() {
        let a = InputProfile::from_csv_str("t,u\n0,30\n10,31\n").unwrap();
        let b = InputProfile::from_csv_str("0, 30\n10, 31\n").unwrap();
        assert_eq!(a, b);
        assert!(InputProfile::from_csv_str("0,30\nx,31\n").is_err());
        assert!(InputProfile::from_csv_str("0,30,1\n").is_err());
    }

    #[test]
    fn scenario_validation() {
        let x0 = State { s: 30.0, v: 20.0 };
        assert!(Scenario::new(x0, InputProfile::constant(20.0), 10.0, 0.0, OutputMode::GapOnly).is_err());
        assert!(Scenario::new(x0, InputProfile::constant(20.0), 10.0, 0.3, OutputMode::GapOnly).is_err());
        assert!(Scenario::new(x0, InputProfile::constant(-1.0), 10.0, 0.1, OutputMode::GapOnly).is_err());
        let short = InputProfile::PiecewiseLinear {
            samples: vec![(0.0, 20.0), (5.0, 21.0)],
        };
        assert!(Scenario::new(x0, short, 10.0, 0.1, OutputMode::GapOnly).is_err());
        let sc = Scenario::new(x0, InputProfile::constant(20.0), 10.0, 0.1, OutputMode::GapOnly).unwrap();
        assert_eq!(sc.steps(), 100);
    }

    #[test]
    fn euler_update_by_hand() {
        let m = builtin_model("CTH-RV").unwrap();
        let sc = Scenario::new(
            State { s: 40.0, v: 33.0 },
            InputProfile::constant(30.0),
            0.2,
            0.1,
            OutputMode::GapOnly,
        )
        .unwrap();
        let tr = simulate(&m, &sc, &[0.01, 0.12, 1.4]).unwrap();
        let a0 = 0.01 * (40.0 - 1.4 * 33.0) + 0.12 * (30.0 - 33.0);
        assert_eq!(tr.s[1], 40.0 + 0.1 * (30.0 - 33.0));
        assert_eq!(tr.v[1], 33.0 + 0.1 * a0);
        assert_eq!(tr.len(), 3);
    }

    #[test]
    fn ftl_zero_gap_fails_at_first_step() {
        let m = builtin_model("FTL").unwrap();
        let sc = Scenario::new(
            State { s: 0.0, v: 20.0 },
            InputProfile::constant(20.0),
            10.0,
            0.1,
            OutputMode::GapOnly,
        )
        .unwrap();
        match simulate(&m, &sc, &[300.0, 1.5]) {
            Err(Error::DomainAtStep { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected a domain error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_theta_rejected() {
        let m = builtin_model("CTH-RV").unwrap();
        assert!(simulate(&m, &Scenario::direct_default(), &[2.0, 0.1, 1.0]).is_err());
    }

    #[test]
    fn grid_zero_at_truth() {
        let m = builtin_model("CTH-RV").unwrap();
        let sc = Scenario::new(
            State { s: 60.0, v: 20.0 },
            InputProfile::constant(31.0),
            20.0,
            0.1,
            OutputMode::GapOnly,
        )
        .unwrap();
        let truth = [0.02, 0.2, 1.2];
        let ax = GridAxis { param: "k1".into(), min: 0.01, max: 0.03, points: 3 };
        let ay = GridAxis { param: "k2".into(), min: 0.1, max: 0.3, points: 3 };
        let g = error_grid(&m, &sc, &truth, &ax, &ay).unwrap();
        assert_eq!(g.values[1][1], Some(0.0));
        assert!(g.to_csv().starts_with("k1,k2,e\n"));
        assert!(error_grid(&m, &sc, &truth, &ax, &ax).is_err());
    }
}
