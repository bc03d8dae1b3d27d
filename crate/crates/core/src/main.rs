use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carfollow_ident::cli::{self, config::parse_list, Command, RunConfig, OUT_DIR_ENV};
use carfollow_ident::simulate::GridAxis;
use carfollow_ident::structural::OutputMode;
use carfollow_ident::Error;

/// Identifiability analysis for car-following models.
#[derive(Parser, Debug)]
#[command(name = "cfident", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "cfident-out")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Builtin model: cthrv, ov, ftl or idm.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Initial state `s,v` or `equilibrium`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Lead speed: shipped, constant:U, poly:c0,c1,... or csv:PATH.
    #[arg(long, global = true)]
    input: Option<String>,
    /// Reference parameters, comma-separated in model order.
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Equilibrium gap for models with a free equilibrium gap.
    #[arg(long, global = true)]
    free_gap: Option<f64>,
    /// Simulation horizon in seconds.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Euler step in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Seed for rank sampling and optimizer starts.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Generic rank of the observability-identifiability matrix.
    Structural(StructuralArgs),
    /// Search for the farthest indistinguishable parameter pair.
    Direct(DirectArgs),
    /// Direct test over a grid of error caps.
    Sweep(SweepArgs),
    /// Output error over a two-parameter slice.
    Grid(GridArgs),
    /// Structural summary of all builtin models.
    Table1(RankArgs),
    /// Direct test for all builtin models.
    Table3(DirectArgs),
}

#[derive(Args, Debug)]
struct RankArgs {
    /// gap-only or gap-and-speed.
    #[arg(long)]
    output: Option<OutputMode>,
    /// Random points per rank estimate.
    #[arg(long)]
    trials: Option<usize>,
    /// Relative singular-value tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct StructuralArgs {
    /// generic, equilibrium, fixed-ic or fixed-point.
    #[arg(long)]
    mode: Option<String>,
    /// Input polynomial degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Also report the first full-rank degree up to this one.
    #[arg(long)]
    max_degree: Option<usize>,
    /// Extra Lie-derivative rows per output.
    #[arg(long)]
    extra_lie: Option<usize>,
    /// Run the summary table instead of a single model.
    #[arg(long)]
    table1: bool,
    #[command(flatten)]
    rank: RankArgs,
}

#[derive(Args, Debug)]
struct DirectArgs {
    /// Output error cap (m^2 for gap-only output).
    #[arg(long)]
    eps: Option<f64>,
    /// Optimizer starts.
    #[arg(long)]
    starts: Option<usize>,
    /// Simulation budget per start.
    #[arg(long)]
    max_evals: Option<usize>,
    /// gap-only or gap-and-speed.
    #[arg(long)]
    output: Option<OutputMode>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    direct: DirectArgs,
    /// Explicit caps, comma-separated and increasing.
    #[arg(long)]
    eps_grid: Option<String>,
    /// Smallest cap of a log-spaced grid.
    #[arg(long)]
    eps_min: Option<f64>,
    /// Largest cap of a log-spaced grid.
    #[arg(long)]
    eps_max: Option<f64>,
    /// Number of caps in a log-spaced grid.
    #[arg(long)]
    eps_points: Option<usize>,
    /// Fresh starts per cap after the first.
    #[arg(long)]
    sweep_starts: Option<usize>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// First axis `param:min:max:points`.
    #[arg(long)]
    x: Option<String>,
    /// Second axis `param:min:max:points`.
    #[arg(long)]
    y: Option<String>,
    /// gap-only or gap-and-speed.
    #[arg(long)]
    output: Option<OutputMode>,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_axis(text: &str) -> Result<GridAxis, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    let [param, min, max, points] = parts.as_slice() else {
        return Err(config_error(format!("grid axis `{text}` must be param:min:max:points")));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| config_error(format!("grid axis `{text}`: `{s}` is not a number")));
    Ok(GridAxis {
        param: param.to_string(),
        min: num(min)?,
        max: num(max)?,
        points: points
            .parse()
            .map_err(|_| config_error(format!("grid axis `{text}`: `{points}` is not a count")))?,
    })
}

fn apply_common(c: &mut RunConfig, a: &Common) -> Result<(), Error> {
    if let Some(m) = &a.model {
        c.model = m.clone();
        c.custom_model = None;
    }
    if let Some(x) = &a.x0 {
        c.scenario.x0 = x.clone();
    }
    if let Some(i) = &a.input {
        c.scenario.input = i.clone();
    }
    if let Some(t) = &a.theta {
        c.theta = Some(parse_list(t, "theta")?);
    }
    if a.free_gap.is_some() {
        c.scenario.free_gap = a.free_gap;
    }
    if let Some(h) = a.horizon {
        c.scenario.horizon = h;
    }
    if let Some(dt) = a.dt {
        c.scenario.dt = dt;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    Ok(())
}

fn apply_rank(c: &mut RunConfig, a: &RankArgs) {
    if a.output.is_some() {
        c.structural.output = a.output;
    }
    if let Some(t) = a.trials {
        c.structural.trials = t;
    }
    if let Some(t) = a.tol {
        c.structural.tol = t;
    }
}

fn apply_direct(c: &mut RunConfig, a: &DirectArgs) {
    if let Some(e) = a.eps {
        c.direct.eps = e;
    }
    if let Some(s) = a.starts {
        c.direct.starts = s;
    }
    if let Some(n) = a.max_evals {
        c.direct.max_evals = n;
    }
    if let Some(o) = a.output {
        c.scenario.output = o;
    }
}

fn resolve(cli: &Cli) -> Result<(Command, RunConfig), Error> {
    let mut c = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_common(&mut c, &cli.common)?;
    let command = match &cli.command {
        Sub::Structural(a) => {
            if let Some(m) = &a.mode {
                c.structural.mode = m.clone();
            }
            if let Some(d) = a.degree {
                c.structural.degree = d;
            }
            if a.max_degree.is_some() {
                c.structural.max_degree = a.max_degree;
            }
            if let Some(e) = a.extra_lie {
                c.structural.extra_lie = e;
            }
            apply_rank(&mut c, &a.rank);
            if a.table1 {
                Command::Table1
            } else {
                Command::Structural
            }
        }
        Sub::Table1(a) => {
            apply_rank(&mut c, a);
            Command::Table1
        }
        Sub::Direct(a) => {
            apply_direct(&mut c, a);
            Command::Direct
        }
        Sub::Table3(a) => {
            apply_direct(&mut c, a);
            Command::Table3
        }
        Sub::Sweep(a) => {
            apply_direct(&mut c, &a.direct);
            if let Some(g) = &a.eps_grid {
                c.sweep.eps_grid = Some(parse_list(g, "eps grid")?);
            }
            if let Some(v) = a.eps_min {
                c.sweep.eps_min = v;
            }
            if let Some(v) = a.eps_max {
                c.sweep.eps_max = v;
            }
            if let Some(v) = a.eps_points {
                c.sweep.eps_points = v;
            }
            if let Some(v) = a.sweep_starts {
                c.direct.sweep_starts = v;
            }
            Command::Sweep
        }
        Sub::Grid(a) => {
            if let Some(x) = &a.x {
                c.grid.x = Some(parse_axis(x)?);
            }
            if let Some(y) = &a.y {
                c.grid.y = Some(parse_axis(y)?);
            }
            if let Some(o) = a.output {
                c.scenario.output = o;
            }
            Command::Grid
        }
    };
    c.output_dir = Some(cli.common.out_dir.clone());
    Ok((command, c))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.common.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.jobs)
            .build_global()
        {
            eprintln!("error: cannot start {} workers: {e}", cli.common.jobs);
            return ExitCode::from(cli::EXIT_FAILURE as u8);
        }
    }
    let (command, config) = match resolve(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::exit_code(&e) as u8);
        }
    };
    let outcome = match cli::run(command, &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::exit_code(&e) as u8);
        }
    };
    let dir = config.output_dir.clone().unwrap_or_default();
    if let Err(e) = outcome.write(&dir) {
        eprintln!("error: cannot write outputs to {}: {e}", dir.display());
        return ExitCode::from(cli::EXIT_FAILURE as u8);
    }
    print!("{}", outcome.summary);
    for (name, _) in &outcome.files {
        println!("wrote {}", dir.join(name).display());
    }
    if outcome.infeasible {
        eprintln!("error: no feasible parameter pair passed the recheck");
    }
    ExitCode::from(outcome.exit_code() as u8)
}
