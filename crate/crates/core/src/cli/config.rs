//! Run configuration.
//!
//! A run is described by one TOML file; every field has a default, so an
//! empty file is valid. Command-line flags override file values. Example:
//!
//! ```toml
//! model = "CTH-RV"
//! seed = 0
//! theta = [0.0216, 0.1943, 1.2293]
//!
//! [scenario]
//! x0 = "equilibrium"        # or "72.7,32.5"
//! input = "constant:31"     # shipped | constant:U | poly:c0,c1,... | csv:PATH
//! horizon = 80.0
//! dt = 0.1
//! output = "gap-only"       # or "gap-and-speed"
//!
//! [structural]
//! mode = "equilibrium"      # generic | equilibrium | fixed-ic | fixed-point
//! degree = 0
//!
//! [direct]
//! eps = 1e-6
//! starts = 16
//!
//! [sweep]
//! eps_min = 1e-6
//! eps_max = 1.0
//! eps_points = 13
//!
//! [grid]
//! x = { param = "k1", min = 0.001, max = 1.0, points = 41 }
//! y = { param = "k2", min = 0.001, max = 1.0, points = 41 }
//! ```
//!
//! A user model replaces the builtin one when `[custom_model]` is present:
//!
//! ```toml
//! [custom_model]
//! name = "linear"
//! dynamics = "a*(s - h*v) + b*(u - v)"
//! equilibrium_gap = "h*u"
//! params = [
//!   { name = "a", lower = 0.001, upper = 1.0 },
//!   { name = "b", lower = 0.001, upper = 1.0 },
//!   { name = "h", lower = 0.5, upper = 3.0 },
//! ]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::directtest::{default_eps_grid, log_grid, OptimizerSettings};
use crate::error::{Error, Result};
use crate::models::{builtin_model, ModelSpec, ParamSpec, State};
use crate::simulate::{GridAxis, InputProfile, Scenario, DEFAULT_DT, DEFAULT_HORIZON};
use crate::structural::{IcMode, OutputMode, DEFAULT_RANK_TOL, DEFAULT_TRIALS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin model name; ignored when `custom_model` is set.
    pub model: String,
    pub custom_model: Option<CustomModel>,
    /// Reference parameters: equilibrium initial condition, grid truth and
    /// fixed-point rank tests. Defaults to the midpoint of the bounds.
    pub theta: Option<Vec<f64>>,
    pub seed: u64,
    /// Where output files go. Not part of the embedded record, so moving
    /// a run elsewhere reproduces the same bytes.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub structural: StructuralConfig,
    pub direct: DirectConfig,
    pub sweep: SweepConfig,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub name: String,
    pub dynamics: String,
    /// Omit when every gap is an equilibrium at `v = u`.
    pub equilibrium_gap: Option<String>,
    pub params: Vec<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `"s,v"` or `"equilibrium"`.
    pub x0: String,
    /// `shipped`, `constant:U`, `poly:c0,c1,...` or `csv:PATH`.
    pub input: String,
    /// Equilibrium gap for models where any gap is an equilibrium.
    pub free_gap: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub output: OutputMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructuralConfig {
    pub mode: String,
    pub degree: usize,
    /// When set, also search degrees `degree..=max_degree` for the first
    /// full-rank one.
    pub max_degree: Option<usize>,
    /// Defaults to gap-only for single runs and gap-and-speed for the
    /// summary table.
    pub output: Option<OutputMode>,
    pub trials: usize,
    pub tol: f64,
    pub extra_lie: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectConfig {
    pub eps: f64,
    pub starts: usize,
    pub sweep_starts: usize,
    pub max_evals: usize,
    pub initial_mesh: f64,
    pub contraction: f64,
    pub expansion: f64,
    pub mesh_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit caps; overrides the log-spaced range below.
    pub eps_grid: Option<Vec<f64>>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x: Option<GridAxis>,
    pub y: Option<GridAxis>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "CTH-RV".into(),
            custom_model: None,
            theta: None,
            seed: 0,
            output_dir: None,
            scenario: ScenarioConfig::default(),
            structural: StructuralConfig::default(),
            direct: DirectConfig::default(),
            sweep: SweepConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            x0: "72.7,32.5".into(),
            input: "shipped".into(),
            free_gap: None,
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            output: OutputMode::GapOnly,
        }
    }
}

impl Default for StructuralConfig {
    fn default() -> Self {
        StructuralConfig {
            mode: "generic".into(),
            degree: 0,
            max_degree: None,
            output: None,
            trials: DEFAULT_TRIALS,
            tol: DEFAULT_RANK_TOL,
            extra_lie: 0,
        }
    }
}

impl Default for DirectConfig {
    fn default() -> Self {
        let o = OptimizerSettings::default();
        DirectConfig {
            eps: 1e-6,
            starts: o.starts,
            sweep_starts: o.sweep_starts,
            max_evals: o.max_evals,
            initial_mesh: o.initial_mesh,
            contraction: o.contraction,
            expansion: o.expansion,
            mesh_tol: o.mesh_tol,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_grid: None,
            eps_min: 1e-6,
            eps_max: 1.0,
            eps_points: 13,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("{what}: `{}` is not a number", t.trim())))
        })
        .collect()
}

/// Parses an input profile spec.
pub fn parse_input(spec: &str) -> Result<InputProfile> {
    let spec = spec.trim();
    if spec == "shipped" {
        return Ok(InputProfile::shipped());
    }
    match spec.split_once(':') {
        Some(("constant", u)) => Ok(InputProfile::constant(
            u.trim()
                .parse()
                .map_err(|_| bad(format!("input `{spec}`: `{u}` is not a number")))?,
        )),
        Some(("poly", cs)) => Ok(InputProfile::Polynomial {
            coefficients: parse_list(cs, "polynomial input")?,
        }),
        Some(("csv", path)) => InputProfile::load_csv(Path::new(path.trim())),
        _ => Err(bad(format!(
            "unknown input `{spec}` (expected shipped, constant:U, poly:c0,c1,... or csv:PATH)"
        ))),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The configuration as embedded in every output.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        match &self.custom_model {
            Some(c) => ModelSpec::new(&c.name, c.params.clone(), &c.dynamics, c.equilibrium_gap.as_deref()),
            None => builtin_model(&self.model),
        }
    }

    /// Reference parameters, checked against the model bounds.
    pub fn theta_ref(&self, m: &ModelSpec) -> Result<Vec<f64>> {
        let theta = match &self.theta {
            Some(t) => t.clone(),
            None => m.params().iter().map(|p| 0.5 * (p.lower + p.upper)).collect(),
        };
        m.check_theta(&theta)?;
        Ok(theta)
    }

    pub fn input(&self) -> Result<InputProfile> {
        parse_input(&self.scenario.input)
    }

    /// The initial state, resolving `"equilibrium"` against the reference
    /// parameters and the lead speed at `t = 0`.
    pub fn x0(&self, m: &ModelSpec, input: &InputProfile) -> Result<State> {
        let x0 = self.scenario.x0.trim();
        if x0 == "equilibrium" {
            let theta = self.theta_ref(m)?;
            return m.equilibrium_ic(input.value(0.0), &theta, self.scenario.free_gap);
        }
        match parse_list(x0, "x0")?.as_slice() {
            [s, v] => Ok(State::new(*s, *v)),
            _ => Err(bad(format!("x0 `{x0}` must be `s,v` or `equilibrium`"))),
        }
    }

    pub fn scenario(&self, m: &ModelSpec) -> Result<Scenario> {
        let input = self.input()?;
        let x0 = self.x0(m, &input)?;
        let sc = &self.scenario;
        Scenario::new(x0, input, sc.horizon, sc.dt, sc.output)
    }

    pub fn ic_mode(&self, m: &ModelSpec) -> Result<IcMode> {
        let fixed = || -> Result<State> {
            match parse_list(self.scenario.x0.trim(), "x0")?.as_slice() {
                [s, v] => Ok(State::new(*s, *v)),
                _ => Err(bad("fixed-ic and fixed-point modes need a numeric x0 `s,v`")),
            }
        };
        match self.structural.mode.as_str() {
            "generic" => Ok(IcMode::Generic),
            "equilibrium" => Ok(IcMode::Equilibrium),
            "fixed-ic" => {
                let x = fixed()?;
                Ok(IcMode::FixedIc { s0: x.s, v0: x.v })
            }
            "fixed-point" => {
                let x = fixed()?;
                Ok(IcMode::FixedPoint {
                    s0: x.s,
                    v0: x.v,
                    theta: self.theta_ref(m)?,
                })
            }
            other => Err(bad(format!(
                "unknown structural mode `{other}` (expected generic, equilibrium, fixed-ic or fixed-point)"
            ))),
        }
    }

    pub fn structural_output(&self, table: bool) -> OutputMode {
        self.structural.output.unwrap_or(if table {
            OutputMode::GapAndSpeed
        } else {
            OutputMode::GapOnly
        })
    }

    pub fn optimizer(&self) -> Result<OptimizerSettings> {
        let d = &self.direct;
        let o = OptimizerSettings {
            initial_mesh: d.initial_mesh,
            contraction: d.contraction,
            expansion: d.expansion,
            mesh_tol: d.mesh_tol,
            max_evals: d.max_evals,
            starts: d.starts,
            sweep_starts: d.sweep_starts,
            seed: self.seed,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn eps_grid(&self) -> Result<Vec<f64>> {
        let s = &self.sweep;
        if let Some(g) = &s.eps_grid {
            return Ok(g.clone());
        }
        if s == &SweepConfig::default() {
            return Ok(default_eps_grid());
        }
        if !(s.eps_min > 0.0 && s.eps_max >= s.eps_min && s.eps_points > 0) {
            return Err(bad("sweep needs 0 < eps_min <= eps_max and eps_points >= 1"));
        }
        Ok(log_grid(s.eps_min, s.eps_max, s.eps_points))
    }

    pub fn grid_axes(&self) -> Result<(GridAxis, GridAxis)> {
        match (&self.grid.x, &self.grid.y) {
            (Some(x), Some(y)) => Ok((x.clone(), y.clone())),
            _ => Err(bad("grid needs both axes: set [grid] x and y, or pass --x and --y")),
        }
    }

    /// Checks everything the given command will need before any work runs.
    pub fn validate_for(&self, command: Command) -> Result<()> {
        if command == Command::Table1 || command == Command::Table3 {
            if self.custom_model.is_some() {
                return Err(bad("table1 and table3 run the builtin models; remove [custom_model]"));
            }
        } else {
            let m = self.model_spec()?;
            self.theta_ref(&m)?;
        }
        match command {
            Command::Structural => {
                let m = self.model_spec()?;
                self.ic_mode(&m)?;
                if self.structural.trials == 0 || !(self.structural.tol > 0.0) {
                    return Err(bad("structural needs trials >= 1 and tol > 0"));
                }
                if let Some(max) = self.structural.max_degree {
                    if max < self.structural.degree {
                        return Err(bad("structural max_degree must be >= degree"));
                    }
                }
            }
            Command::Table1 => {
                if self.structural.trials == 0 || !(self.structural.tol > 0.0) {
                    return Err(bad("structural needs trials >= 1 and tol > 0"));
                }
            }
            Command::Direct | Command::Sweep => {
                let m = self.model_spec()?;
                self.scenario(&m)?;
                self.optimizer()?;
                if !(self.direct.eps >= 0.0 && self.direct.eps.is_finite()) {
                    return Err(bad("eps must be finite and >= 0"));
                }
                if command == Command::Sweep {
                    let g = self.eps_grid()?;
                    if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|e| !(*e >= 0.0)) {
                        return Err(bad("the eps grid must be non-empty, non-negative and strictly increasing"));
                    }
                }
            }
            Command::Grid => {
                let m = self.model_spec()?;
                self.scenario(&m)?;
                let (x, y) = self.grid_axes()?;
                let names = m.param_names();
                for a in [&x, &y] {
                    if !names.contains(&a.param) {
                        return Err(bad(format!(
                            "grid axis `{}` is not a parameter of {} (expected one of {})",
                            a.param,
                            m.name(),
                            names.join(", ")
                        )));
                    }
                    if a.points == 0 || !(a.min <= a.max) {
                        return Err(bad(format!("grid axis `{}` needs min <= max and points >= 1", a.param)));
                    }
                }
                if x.param == y.param {
                    return Err(bad("grid axes must be two different parameters"));
                }
            }
            Command::Table3 => {
                self.optimizer()?;
                for name in crate::models::BUILTIN_MODELS {
                    let mut c = self.clone();
                    c.model = name.into();
                    c.theta = None;
                    c.scenario(&c.model_spec()?)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Structural,
    Direct,
    Sweep,
    Grid,
    Table1,
    Table3,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("modle = \"OV\"").unwrap_err();
        assert!(err.to_string().contains("modle"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.model = "IDM".into();
        c.scenario.x0 = "equilibrium".into();
        c.grid.x = Some(GridAxis {
            param: "a".into(),
            min: 0.1,
            max: 2.0,
            points: 5,
        });
        c.sweep.eps_grid = Some(vec![1e-6, 1.0]);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn input_specs() {
        assert_eq!(parse_input("constant:31").unwrap(), InputProfile::constant(31.0));
        assert_eq!(
            parse_input("poly:30, 0.1").unwrap(),
            InputProfile::Polynomial {
                coefficients: vec![30.0, 0.1]
            }
        );
        assert_eq!(parse_input("shipped").unwrap(), InputProfile::shipped());
        assert!(parse_input("sine:3").is_err());
        assert!(parse_input("constant:fast").is_err());
    }

    #[test]
    fn equilibrium_x0_uses_reference_theta() {
        let mut c = RunConfig::default();
        c.scenario.x0 = "equilibrium".into();
        c.scenario.input = "constant:31".into();
        c.theta = Some(vec![0.0216, 0.1943, 1.2293]);
        let sc = c.scenario(&c.model_spec().unwrap()).unwrap();
        assert!((sc.x0.s - 31.0 * 1.2293).abs() < 1e-12);
        assert_eq!(sc.x0.v, 31.0);
    }

    #[test]
    fn validation_catches_bad_settings() {
        let mut c = RunConfig::default();
        c.structural.mode = "sideways".into();
        assert!(c.validate_for(Command::Structural).is_err());
        let mut c = RunConfig::default();
        assert!(c.validate_for(Command::Grid).is_err());
        c.grid.x = Some(GridAxis {
            param: "k1".into(),
            min: 0.001,
            max: 1.0,
            points: 3,
        });
        c.grid.y = Some(GridAxis {
            param: "zeta".into(),
            min: 0.0,
            max: 1.0,
            points: 3,
        });
        assert!(c.validate_for(Command::Grid).is_err());
        let mut c = RunConfig::default();
        c.model = "ftl".into();
        c.scenario.x0 = "equilibrium".into();
        assert!(c.validate_for(Command::Direct).is_err());
        c.scenario.free_gap = Some(30.0);
        c.theta = Some(vec![300.0, 2.0]);
        assert!(c.validate_for(Command::Direct).is_ok());
        let mut c = RunConfig::default();
        c.theta = Some(vec![5.0, 0.1, 1.0]);
        assert!(c.validate_for(Command::Direct).is_err());
    }
}
