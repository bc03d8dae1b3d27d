//! Command runners behind the `cfident` binary.
//!
//! Each command turns a validated [`RunConfig`] into an [`Outcome`]: a set
//! of named output files plus a short summary for the terminal. Nothing
//! here touches the file system except [`Outcome::write`], so runs are easy
//! to compare byte for byte.

pub mod config;

use std::fmt::Write as _;
use std::path::Path;

pub use config::{Command, RunConfig};

use crate::directtest::{self, DirectTestProblem, DirectTestResult, IDENTIFIABLE_BELOW, UNIDENTIFIABLE_ABOVE};
use crate::error::{Error, Result};
use crate::expr::ExprError;
use crate::models::{builtin_model, ModelSpec, BUILTIN_MODELS};
use crate::simulate::{error_grid, simulate, Scenario};
use crate::structural::{
    augment, build_oi, default_max_order, generic_rank, min_admissible_degree, render_summary, structural_summary,
    RankOptions, SUMMARY_MAX_DEGREE,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CFIDENT_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

const CAVEAT: &str = "delta is a lower bound from a local search; the verdict bands are conventions, not universal cutoffs";

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        e if e.is_domain() => EXIT_DOMAIN,
        Error::Expr(ExprError::SizeCap { .. }) => EXIT_FAILURE,
        Error::Expr(_) | Error::UnknownModel(_) | Error::InvalidModel(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: String,
    /// A direct test whose answer failed the feasibility recheck.
    pub infeasible: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.infeasible {
            EXIT_INFEASIBLE
        } else {
            EXIT_OK
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// `key = value` report lines.
#[derive(Default)]
struct Report(String);

impl Report {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.0, "{key} = {value}");
        self
    }

    fn raw(&mut self, text: &str) -> &mut Self {
        self.0.push_str(text);
        self
    }

    /// Appends the resolved configuration and returns the report text.
    fn finish(mut self, config: &RunConfig, stem: &str) -> String {
        let _ = writeln!(self.0, "config_file = {stem}.config.toml");
        self.0.push_str("\n--- config ---\n");
        self.0.push_str(&config.to_toml());
        self.0
    }
}

fn slug(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect::<String>()
        .to_ascii_lowercase()
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn with_files(stem: &str, report: String, config: &RunConfig, extra: Vec<(String, String)>) -> Vec<(String, String)> {
    let mut files = vec![
        (format!("{stem}.txt"), report),
        (format!("{stem}.config.toml"), config.to_toml()),
    ];
    files.extend(extra);
    files
}

pub fn run(command: Command, config: &RunConfig) -> Result<Outcome> {
    config.validate_for(command)?;
    match command {
        Command::Structural => cmd_structural(config),
        Command::Table1 => cmd_table1(config),
        Command::Direct => cmd_direct(config),
        Command::Sweep => cmd_sweep(config),
        Command::Grid => cmd_grid(config),
        Command::Table3 => cmd_table3(config),
    }
}

pub fn cmd_structural(config: &RunConfig) -> Result<Outcome> {
    let mut config = config.clone();
    let output = config.structural_output(false);
    config.structural.output = Some(output);
    let st = &config.structural;
    let m = config.model_spec()?;
    let top = st.max_degree.unwrap_or(st.degree);
    let sys = augment(&m, output, default_max_order(&m, top))?.with_extra_lie(st.extra_lie)?;
    let oi = build_oi(&sys)?;
    let opts = RankOptions {
        mode: config.ic_mode(&m)?,
        degree: st.degree,
        trials: st.trials,
        seed: config.seed,
        tol: st.tol,
        pins: Vec::new(),
    };
    let report = generic_rank(&sys, &oi, &opts)?;
    let stem = format!("structural_{}", slug(m.name()));
    let mut r = Report::default();
    r.raw(&report.to_key_values());
    r.kv("columns", sys.augmented_names().join(","));
    r.kv("rows", oi.n_rows());
    if let Some(max) = st.max_degree {
        let first = min_admissible_degree(&sys, &oi, &opts, max)?;
        r.kv(
            "min_admissible_degree",
            first.map_or_else(|| format!("none <= {max}"), |d| d.to_string()),
        );
    }
    let summary = report.to_key_values();
    let text = r.finish(&config, &stem);
    Ok(Outcome {
        files: with_files(&stem, text, &config, Vec::new()),
        summary,
        infeasible: false,
    })
}

pub fn cmd_table1(config: &RunConfig) -> Result<Outcome> {
    let mut config = config.clone();
    if config.structural.extra_lie != 0 {
        return Err(Error::InvalidArgument("table1 uses the standard row count; unset extra_lie".into()));
    }
    let output = config.structural_output(true);
    config.structural.output = Some(output);
    let st = &config.structural;
    let rows = structural_summary(output, st.trials, config.seed, st.tol)?;
    let table = render_summary(&rows);

    let mut csv = String::from("model,parameters,generic,equilibrium\n");
    let cell = |d: Option<usize>| d.map_or_else(|| "N/A".to_string(), |n| format!("n>={n}"));
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.model,
            row.params.join(" "),
            cell(row.generic),
            cell(row.equilibrium)
        );
    }

    let mut r = Report::default();
    r.kv("output", output.label())
        .kv("max_degree", SUMMARY_MAX_DEGREE)
        .kv("trials", st.trials)
        .kv("tolerance", format!("{:e}", st.tol))
        .kv("seed", config.seed);
    r.raw("\n").raw(&table);
    for row in &rows {
        for rep in &row.reports {
            r.raw("\n").raw(&rep.to_key_values());
        }
    }
    r.raw("\n");
    let text = r.finish(&config, "table1");
    Ok(Outcome {
        files: with_files("table1", text, &config, vec![("table1.csv".into(), csv)]),
        summary: table,
        infeasible: false,
    })
}

fn problem(config: &RunConfig, m: ModelSpec) -> Result<DirectTestProblem> {
    let sc = config.scenario(&m)?;
    DirectTestProblem::new(m, sc, config.direct.eps, config.optimizer()?)
}

fn result_lines(r: &mut Report, m: &ModelSpec, res: &DirectTestResult) {
    r.kv("params", m.param_names().join(","))
        .kv("theta1", list(&res.theta1))
        .kv("theta2", list(&res.theta2))
        .kv("delta", res.delta)
        .kv("error", res.error)
        .kv("feasible", res.feasible)
        .kv("verdict", res.verdict().label())
        .kv(
            "verdict_bands",
            format!("delta > {UNIDENTIFIABLE_ABOVE} unidentifiable, delta < {IDENTIFIABLE_BELOW} identifiable"),
        )
        .kv("caveat", CAVEAT)
        .kv("evaluations", res.evaluations)
        .kv("best_start", res.best_start);
}

/// `t,u,s_1,v_1,s_2,v_2` for the two optimal parameter vectors.
fn overlay_csv(m: &ModelSpec, sc: &Scenario, res: &DirectTestResult) -> Result<String> {
    let a = simulate(m, sc, &res.theta1)?;
    let b = simulate(m, sc, &res.theta2)?;
    let mut out = String::from("t,u,s_1,v_1,s_2,v_2\n");
    for k in 0..a.len() {
        let t = a.times[k];
        let _ = writeln!(
            out,
            "{t},{},{},{},{},{}",
            sc.input.value(t),
            a.s[k],
            a.v[k],
            b.s[k],
            b.v[k]
        );
    }
    Ok(out)
}

pub fn cmd_direct(config: &RunConfig) -> Result<Outcome> {
    let m = config.model_spec()?;
    let p = problem(config, m.clone())?;
    let res = directtest::solve(&p)?;
    let stem = format!("direct_{}", slug(m.name()));
    let mut r = Report::default();
    r.kv("model", m.name())
        .kv("eps", p.eps)
        .kv("output", p.scenario.output.label())
        .kv("x0", list(&[p.scenario.x0.s, p.scenario.x0.v]))
        .kv("seed", config.seed);
    result_lines(&mut r, &m, &res);
    let summary = r.0.clone();
    let overlay = overlay_csv(&m, &p.scenario, &res)?;
    let text = r.finish(config, &stem);
    Ok(Outcome {
        files: with_files(&stem, text, config, vec![(format!("{stem}.csv"), overlay)]),
        summary,
        infeasible: !res.feasible,
    })
}

pub fn cmd_sweep(config: &RunConfig) -> Result<Outcome> {
    let m = config.model_spec()?;
    let p = problem(config, m.clone())?;
    let grid = config.eps_grid()?;
    let curve = directtest::sweep(&p, &grid)?;
    let stem = format!("sweep_{}", slug(m.name()));
    let mut r = Report::default();
    r.kv("model", m.name())
        .kv("output", p.scenario.output.label())
        .kv("x0", list(&[p.scenario.x0.s, p.scenario.x0.v]))
        .kv("seed", config.seed)
        .kv("eps_grid", list(&grid))
        .kv("delta", list(&curve.points.iter().map(|pt| pt.delta).collect::<Vec<_>>()))
        .kv(
            "monotone",
            curve.points.windows(2).all(|w| !(w[1].delta < w[0].delta)),
        )
        .kv("caveat", CAVEAT);
    for pt in &curve.points {
        if let Some(f) = &pt.failure {
            r.kv(&format!("failure_at_{:e}", pt.eps), f);
        }
    }
    let summary = r.0.clone();
    let all_failed = curve.points.iter().all(|pt| pt.failure.is_some());
    let text = r.finish(config, &stem);
    Ok(Outcome {
        files: with_files(&stem, text, config, vec![(format!("{stem}.csv"), curve.to_csv())]),
        summary,
        infeasible: all_failed,
    })
}

pub fn cmd_grid(config: &RunConfig) -> Result<Outcome> {
    let m = config.model_spec()?;
    let sc = config.scenario(&m)?;
    let theta = config.theta_ref(&m)?;
    let (x, y) = config.grid_axes()?;
    let grid = error_grid(&m, &sc, &theta, &x, &y)?;
    let stem = format!("grid_{}_{}_{}", slug(m.name()), slug(&x.param), slug(&y.param));

    let mut min: Option<(f64, f64, f64)> = None;
    let mut max = f64::NEG_INFINITY;
    let mut failed = 0usize;
    for (i, xv) in grid.xs.iter().enumerate() {
        for (j, yv) in grid.ys.iter().enumerate() {
            match grid.values[i][j] {
                Some(e) => {
                    if min.is_none_or(|(best, _, _)| e < best) {
                        min = Some((e, *xv, *yv));
                    }
                    max = max.max(e);
                }
                None => failed += 1,
            }
        }
    }
    let mut r = Report::default();
    r.kv("model", m.name())
        .kv("theta_true", list(&theta))
        .kv("x0", list(&[sc.x0.s, sc.x0.v]))
        .kv("output", sc.output.label())
        .kv("x_axis", format!("{} [{}, {}] x {}", x.param, x.min, x.max, x.points))
        .kv("y_axis", format!("{} [{}, {}] x {}", y.param, y.min, y.max, y.points))
        .kv("failed_cells", failed);
    if let Some((e, xv, yv)) = min {
        r.kv("min", e).kv("argmin", list(&[xv, yv])).kv("max", max);
    }
    let summary = r.0.clone();
    let text = r.finish(config, &stem);
    Ok(Outcome {
        files: with_files(&stem, text, config, vec![(format!("{stem}.csv"), grid.to_csv())]),
        summary,
        infeasible: false,
    })
}

pub fn cmd_table3(config: &RunConfig) -> Result<Outcome> {
    let mut csv = String::from("model,delta,error,feasible,verdict,params,theta1,theta2\n");
    let mut r = Report::default();
    r.kv("eps", config.direct.eps).kv("seed", config.seed).kv("caveat", CAVEAT);
    let mut table = format!("{:<8} {:>10} {:>12}  {}\n", "Model", "delta", "error", "verdict");
    let mut infeasible = false;
    for name in BUILTIN_MODELS {
        let m = builtin_model(name)?;
        let mut c = config.clone();
        c.model = name.into();
        c.theta = None;
        let p = problem(&c, m.clone())?;
        let res = directtest::solve(&p)?;
        infeasible |= !res.feasible;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            m.name(),
            res.delta,
            res.error,
            res.feasible,
            res.verdict().label(),
            m.param_names().join(" "),
            res.theta1.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
            res.theta2.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        );
        let _ = writeln!(
            table,
            "{:<8} {:>10.4} {:>12.3e}  {}",
            m.name(),
            res.delta,
            res.error,
            res.verdict().label()
        );
        r.raw("\n").kv("model", m.name());
        result_lines(&mut r, &m, &res);
    }
    r.raw("\n");
    let text = r.finish(config, "table3");
    Ok(Outcome {
        files: with_files("table3", text, config, vec![("table3.csv".into(), csv)]),
        summary: table,
        infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::UnknownModel("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::NoValidSample { attempts: 3 }), EXIT_DOMAIN);
    }

    #[test]
    fn structural_report_embeds_config() {
        let mut c = RunConfig::default();
        c.structural.mode = "equilibrium".into();
        c.structural.trials = 3;
        let out = run(Command::Structural, &c).unwrap();
        let (name, text) = &out.files[0];
        assert_eq!(name, "structural_cthrv.txt");
        assert!(text.contains("rank = 3\n"), "{text}");
        assert!(text.contains("unidentifiable = k1,k2\n"));
        let embedded = text.split("--- config ---\n").nth(1).unwrap();
        let back = RunConfig::from_toml_str(embedded).unwrap();
        assert_eq!(back.structural.mode, "equilibrium");
        assert_eq!(out.files[1].1, embedded);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("CTH-RV"), "cthrv");
        assert_eq!(slug("h_m"), "h_m");
    }
}
