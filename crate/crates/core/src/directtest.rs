//! Numerical direct test for practical identifiability.
//!
//! Finds two parameter vectors that are as far apart as possible (normalized
//! Euclidean distance) while their simulated outputs stay within an MSE cap:
//!
//! ```text
//! maximize d(theta1, theta2)  subject to  e(theta1, theta2) <= eps
//! ```
//!
//! The optimizer is a multistart generalized pattern search with a hard
//! barrier. It works in normalized mean/half-difference coordinates
//! `m = (x1 + x2) / 2`, `h = (x1 - x2) / 2` where `x = (theta - lower) / width`:
//! polls along `h` change the distance, polls along `m` move both vectors
//! together at constant distance. A poll is accepted if it is feasible and
//! either increases the distance or keeps it and lowers the output error,
//! which lets the search slide along the constraint boundary.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::simulate::{output_error, Scenario, Simulator};

/// Distances closer than this are treated as equal by the acceptance rule.
const DISTANCE_TIE: f64 = 1e-12;
/// A poll at equal distance must lower the error by this fraction of eps.
const LEVEL_DECREASE: f64 = 1e-2;

/// `d = sqrt(mean(((theta1_i - theta2_i) / width_i)^2))`, in `[0, 1]` for
/// vectors inside the box.
pub fn distance(theta1: &[f64], theta2: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let n = theta1.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let z = (theta1[i] - theta2[i]) / (upper[i] - lower[i]);
            z * z
        })
        .sum();
    (sum / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Initial poll step in normalized coordinates.
    pub initial_mesh: f64,
    pub contraction: f64,
    pub expansion: f64,
    /// Stop once the step falls to this fraction of the box width.
    pub mesh_tol: f64,
    /// Simulation budget per start.
    pub max_evals: usize,
    pub starts: usize,
    /// Fresh random starts for every sweep cap after the first; the
    /// previous optimum is always added as a warm start.
    pub sweep_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            initial_mesh: 0.1,
            contraction: 0.5,
            expansion: 2.0,
            mesh_tol: 1e-6,
            max_evals: 20_000,
            starts: 16,
            sweep_starts: 4,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.initial_mesh > 0.0 && self.initial_mesh <= 1.0) {
            return bad("initial mesh must lie in (0, 1]");
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return bad("mesh contraction factor must lie in (0, 1)");
        }
        if !(self.expansion >= 1.0) {
            return bad("mesh expansion factor must be at least 1");
        }
        if !(self.mesh_tol > 0.0) {
            return bad("mesh tolerance must be positive");
        }
        if self.max_evals == 0 || self.starts == 0 {
            return bad("evaluation budget and start count must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DirectTestProblem {
    pub model: ModelSpec,
    pub scenario: Scenario,
    pub eps: f64,
    pub settings: OptimizerSettings,
}

impl DirectTestProblem {
    pub fn new(model: ModelSpec, scenario: Scenario, eps: f64, settings: OptimizerSettings) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("error cap eps = {eps} must be finite and >= 0")));
        }
        settings.validate()?;
        scenario.validate()?;
        Ok(DirectTestProblem {
            model,
            scenario,
            eps,
            settings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectTestResult {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub delta: f64,
    pub error: f64,
    pub evaluations: usize,
    pub best_start: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Unidentifiable,
    Inconclusive,
    Identifiable,
}

pub const UNIDENTIFIABLE_ABOVE: f64 = 0.3;
pub const IDENTIFIABLE_BELOW: f64 = 0.1;

impl Verdict {
    pub fn from_delta(delta: f64) -> Verdict {
        if delta > UNIDENTIFIABLE_ABOVE {
            Verdict::Unidentifiable
        } else if delta < IDENTIFIABLE_BELOW {
            Verdict::Identifiable
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Unidentifiable => "practically unidentifiable",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Identifiable => "practically identifiable",
        }
    }
}

impl DirectTestResult {
    pub fn verdict(&self) -> Verdict {
        Verdict::from_delta(self.delta)
    }
}

struct Search<'a> {
    sim: &'a mut Simulator,
    lower: &'a [f64],
    width: Vec<f64>,
    cap: f64,
    samples: f64,
    eps: f64,
    evals: usize,
}

#[derive(Debug, Clone)]
struct Point {
    m: Vec<f64>,
    h: Vec<f64>,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    d: f64,
    e: f64,
}

impl Search<'_> {
    fn thetas(&self, m: &[f64], h: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = m.len();
        let mut t1 = Vec::with_capacity(n);
        let mut t2 = Vec::with_capacity(n);
        for i in 0..n {
            let (x1, x2) = (m[i] + h[i], m[i] - h[i]);
            if !(0.0..=1.0).contains(&x1) || !(0.0..=1.0).contains(&x2) {
                return None;
            }
            t1.push(self.lower[i] + x1 * self.width[i]);
            t2.push(self.lower[i] + x2 * self.width[i]);
        }
        Some((t1, t2))
    }

    fn distance(&self, t1: &[f64], t2: &[f64]) -> f64 {
        let n = t1.len();
        let sum: f64 = (0..n)
            .map(|i| {
                let z = (t1[i] - t2[i]) / self.width[i];
                z * z
            })
            .sum();
        (sum / n as f64).sqrt()
    }

    /// Output error, or `None` when infeasible or not simulable.
    fn error(&mut self, t1: &[f64], t2: &[f64]) -> Option<f64> {
        self.evals += 1;
        let sum = self.sim.pair_sq_error(t1, t2, self.cap).ok()?;
        let e = sum / self.samples;
        (sum <= self.cap && e <= self.eps).then_some(e)
    }

    fn point(&mut self, m: Vec<f64>, h: Vec<f64>) -> Option<Point> {
        let (theta1, theta2) = self.thetas(&m, &h)?;
        let e = self.error(&theta1, &theta2)?;
        let d = self.distance(&theta1, &theta2);
        Some(Point {
            m,
            h,
            theta1,
            theta2,
            d,
            e,
        })
    }

    fn run(&mut self, start: Point, s: &OptimizerSettings) -> Point {
        let n = start.m.len();
        let mut order: Vec<Move> = Vec::with_capacity(4 * n + n * n + 1);
        order.push(Move::Radial);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                order.push(Move::Separate(i, sign));
                order.push(Move::Shift(i, sign));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                order.push(Move::Rotate(i, j, 1.0));
                order.push(Move::Rotate(i, j, -1.0));
            }
        }
        let mut best = start;
        let mut mesh = s.initial_mesh;
        while mesh > s.mesh_tol && self.evals < s.max_evals {
            if let Some(p) = self.search(&best, mesh) {
                best = p;
                mesh = (mesh * s.expansion).min(1.0);
                continue;
            }
            let mut accepted = None;
            for (slot, mv) in order.iter().enumerate() {
                if self.evals >= s.max_evals {
                    break;
                }
                let Some((m, h)) = mv.apply(&best.m, &best.h, mesh) else { continue };
                let Some((t1, t2)) = self.thetas(&m, &h) else { continue };
                let d = self.distance(&t1, &t2);
                let farther = d > best.d + DISTANCE_TIE;
                let level = (d - best.d).abs() <= DISTANCE_TIE;
                if !farther && !(level && best.e > 0.0) {
                    continue;
                }
                let Some(e) = self.error(&t1, &t2) else { continue };
                if farther || e < best.e - LEVEL_DECREASE * self.eps {
                    best = Point {
                        m,
                        h,
                        theta1: t1,
                        theta2: t2,
                        d,
                        e,
                    };
                    accepted = Some((slot, farther));
                    break;
                }
            }
            match accepted {
                Some((slot, farther)) => {
                    let mv = order.remove(slot);
                    order.insert(0, mv);
                    if farther {
                        mesh = (mesh * s.expansion).min(1.0);
                    }
                }
                None => mesh *= s.contraction,
            }
        }
        best
    }
}

impl Search<'_> {
    fn outputs(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let theta: Vec<f64> = (0..x.len()).map(|i| self.lower[i] + x[i] * self.width[i]).collect();
        self.evals += 1;
        let mut y = Vec::new();
        self.sim.run_outputs(&theta, &mut y).ok()?;
        Some(y)
    }

    /// Forward-difference Jacobian of the outputs in normalized coordinates.
    fn jacobian(&mut self, x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut jac = DMatrix::zeros(y.len(), n);
        for i in 0..n {
            let step = if x[i] + FD_STEP <= 1.0 { FD_STEP } else { -FD_STEP };
            let mut xp = x.to_vec();
            xp[i] += step;
            let yp = self.outputs(&xp)?;
            for (k, (a, b)) in yp.iter().zip(y).enumerate() {
                jac[(k, i)] = (a - b) / step;
            }
        }
        Some(jac)
    }

    /// Search step: push the pair `mesh` further apart, then pull it back
    /// toward equal outputs with projected Levenberg-Marquardt iterations
    /// on the output residual plus a soft row holding the target distance.
    fn search(&mut self, best: &Point, mesh: f64) -> Option<Point> {
        let n = best.m.len();
        if best.d == 0.0 {
            return None;
        }
        let mut x1 = add(&best.m, &best.h, 1.0);
        let mut x2 = add(&best.m, &best.h, -1.0);
        let hn = norm(&best.h);
        for i in 0..n {
            let dir = best.h[i] / hn;
            x1[i] = (x1[i] + mesh * dir).clamp(0.0, 1.0);
            x2[i] = (x2[i] - mesh * dir).clamp(0.0, 1.0);
        }
        let target = self.normalized_distance(&x1, &x2);
        if target <= best.d + DISTANCE_TIE {
            return None;
        }
        // Weight of the distance row relative to the output residual.
        let weight = (self.samples * self.eps).sqrt().max(1e-6) * 1e3 / mesh.max(1e-9);
        let residual = |y1: &[f64], y2: &[f64], d: f64| -> f64 {
            let out: f64 = y1.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum();
            let gap = weight * (d - target);
            out + gap * gap
        };
        let mut y1 = self.outputs(&x1)?;
        let mut y2 = self.outputs(&x2)?;
        let mut cost = residual(&y1, &y2, self.normalized_distance(&x1, &x2));
        let mut lambda = 1e-3;
        for _ in 0..RESTORE_ITERS {
            let e = y1.iter().zip(&y2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / self.samples;
            let d = self.normalized_distance(&x1, &x2);
            if e <= self.eps && d > best.d + DISTANCE_TIE && (target - d) <= 0.1 * mesh {
                break;
            }
            let j1 = self.jacobian(&x1, &y1)?;
            let j2 = self.jacobian(&x2, &y2)?;
            let rows = y1.len() + 1;
            let mut jac = DMatrix::zeros(rows, 2 * n);
            jac.view_mut((0, 0), (rows - 1, n)).copy_from(&j1);
            jac.view_mut((0, n), (rows - 1, n)).copy_from(&(-&j2));
            let mut r = DVector::zeros(rows);
            for k in 0..rows - 1 {
                r[k] = y1[k] - y2[k];
            }
            r[rows - 1] = weight * (d - target);
            if d > 0.0 {
                for i in 0..n {
                    let g = (x1[i] - x2[i]) / (n as f64 * d);
                    jac[(rows - 1, i)] = weight * g;
                    jac[(rows - 1, n + i)] = -weight * g;
                }
            }
            let x: Vec<f64> = x1.iter().chain(&x2).cloned().collect();
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &r;
            let mut improved = false;
            for _ in 0..6 {
                let Some(step) = projected_step(&jtj, &grad, &x, lambda) else {
                    lambda *= 10.0;
                    continue;
                };
                let xn: Vec<f64> = (0..2 * n).map(|k| (x[k] + step[k]).clamp(0.0, 1.0)).collect();
                let (n1, n2) = xn.split_at(n);
                if let (Some(t1), Some(t2)) = (self.outputs(n1), self.outputs(n2)) {
                    let c = residual(&t1, &t2, self.normalized_distance(n1, n2));
                    if c < cost {
                        x1 = n1.to_vec();
                        x2 = n2.to_vec();
                        y1 = t1;
                        y2 = t2;
                        cost = c;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = true;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        let m: Vec<f64> = (0..n).map(|i| 0.5 * (x1[i] + x2[i])).collect();
        let h: Vec<f64> = (0..n).map(|i| 0.5 * (x1[i] - x2[i])).collect();
        let (t1, t2) = self.thetas(&m, &h)?;
        let d = self.distance(&t1, &t2);
        if d <= best.d + DISTANCE_TIE {
            return None;
        }
        let e = self.error(&t1, &t2)?;
        Some(Point {
            m,
            h,
            theta1: t1,
            theta2: t2,
            d,
            e,
        })
    }

    fn normalized_distance(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let n = x1.len();
        let sum: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
        (sum / n as f64).sqrt()
    }
}

const FD_STEP: f64 = 1e-7;
const RESTORE_ITERS: usize = 8;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn add(m: &[f64], h: &[f64], sign: f64) -> Vec<f64> {
    m.iter().zip(h).map(|(a, b)| a + sign * b).collect()
}

/// Damped Gauss-Newton step on the unit box: variables sitting on a bound
/// whose step would leave the box are frozen and the step is re-solved.
fn projected_step(jtj: &DMatrix<f64>, grad: &DVector<f64>, x: &[f64], lambda: f64) -> Option<DVector<f64>> {
    let n = x.len();
    let mut free = vec![true; n];
    loop {
        let idx: Vec<usize> = (0..n).filter(|&k| free[k]).collect();
        if idx.is_empty() {
            return None;
        }
        let mut a = DMatrix::zeros(idx.len(), idx.len());
        let mut b = DVector::zeros(idx.len());
        for (p, &i) in idx.iter().enumerate() {
            b[p] = -grad[i];
            for (q, &j) in idx.iter().enumerate() {
                a[(p, q)] = jtj[(i, j)];
            }
            a[(p, p)] += lambda * (1.0 + jtj[(i, i)]);
        }
        let sol = a.cholesky()?.solve(&b);
        let mut step = DVector::zeros(n);
        let mut changed = false;
        for (p, &i) in idx.iter().enumerate() {
            step[i] = sol[p];
            if (x[i] <= 0.0 && sol[p] < 0.0) || (x[i] >= 1.0 && sol[p] > 0.0) {
                free[i] = false;
                changed = true;
            }
        }
        if !changed {
            return Some(step);
        }
    }
}

/// Poll directions in `(m, h)` space, each of length `mesh`.
#[derive(Debug, Clone, Copy)]
enum Move {
    /// `h_i += sign * mesh`.
    Separate(usize, f64),
    /// `m_i += sign * mesh`: both vectors move together.
    Shift(usize, f64),
    /// Stretch `h` along itself.
    Radial,
    /// Rotate `h` in the `(i, j)` plane, keeping the distance.
    Rotate(usize, usize, f64),
}

impl Move {
    fn apply(self, m: &[f64], h: &[f64], mesh: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut m, mut h) = (m.to_vec(), h.to_vec());
        match self {
            Move::Separate(i, sign) => h[i] += sign * mesh,
            Move::Shift(i, sign) => m[i] += sign * mesh,
            Move::Radial => {
                let r = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r == 0.0 {
                    return None;
                }
                let scale = 1.0 + mesh / r;
                h.iter_mut().for_each(|x| *x *= scale);
            }
            Move::Rotate(i, j, sign) => {
                let r = h[i].hypot(h[j]);
                if r == 0.0 {
                    return None;
                }
                let angle = sign * (mesh / r).min(std::f64::consts::FRAC_PI_4);
                let (sin, cos) = angle.sin_cos();
                let (a, b) = (h[i], h[j]);
                h[i] = a * cos - b * sin;
                h[j] = a * sin + b * cos;
            }
        }
        Some((m, h))
    }
}

#[derive(Debug, Clone)]
struct StartOutcome {
    index: usize,
    point: Option<Point>,
    evals: usize,
}

fn start_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Normalized start `(m, h)`; fresh starts have `h = 0` (identical vectors).
fn normalize(theta1: &[f64], theta2: &[f64], lower: &[f64], width: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = theta1.len();
    let x1: Vec<f64> = (0..n).map(|i| (theta1[i] - lower[i]) / width[i]).collect();
    let x2: Vec<f64> = (0..n).map(|i| (theta2[i] - lower[i]) / width[i]).collect();
    let m = (0..n).map(|i| 0.5 * (x1[i] + x2[i])).collect();
    let h = (0..n).map(|i| 0.5 * (x1[i] - x2[i])).collect();
    (m, h)
}

fn solve_from(
    p: &DirectTestProblem,
    warm: &[(Vec<f64>, Vec<f64>)],
    fresh: usize,
    stream_base: u64,
) -> Result<DirectTestResult> {
    let m = &p.model;
    let lower = m.lower_bounds();
    let width: Vec<f64> = m.params().iter().map(|q| q.width()).collect();
    let n = m.n_params();
    let base = Simulator::new(m, &p.scenario)?;
    let samples = (base.steps() + 1) as f64;
    let settings = &p.settings;

    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = warm
        .iter()
        .map(|(t1, t2)| normalize(t1, t2, &lower, &width))
        .collect();
    for k in 0..fresh {
        let mut rng = start_rng(settings.seed, stream_base + k as u64);
        let m0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        starts.push((m0, vec![0.0; n]));
    }

    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map_init(
            || base.clone(),
            |sim, (index, (m0, h0))| {
                let mut search = Search {
                    sim,
                    lower: &lower,
                    width: width.clone(),
                    cap: p.eps * samples,
                    samples,
                    eps: p.eps,
                    evals: 0,
                };
                let point = search.point(m0, h0).map(|start| search.run(start, settings));
                StartOutcome {
                    index,
                    point,
                    evals: search.evals,
                }
            },
        )
        .collect();

    let evaluations = outcomes.iter().map(|o| o.evals).sum();
    let best = outcomes
        .iter()
        .filter_map(|o| o.point.as_ref().map(|pt| (o.index, pt)))
        .fold(None::<(usize, &Point)>, |acc, (i, pt)| match acc {
            Some((_, b)) if b.d >= pt.d => acc,
            _ => Some((i, pt)),
        });
    let Some((best_start, pt)) = best else {
        // Report a domain failure of the experiment itself as such.
        let mid: Vec<f64> = m.params().iter().map(|q| 0.5 * (q.lower + q.upper)).collect();
        if let Err(e) = crate::simulate::simulate(m, &p.scenario, &mid) {
            if e.is_domain() {
                return Err(e);
            }
        }
        return Err(Error::Infeasible(format!(
            "no start of the {} direct test could be simulated",
            m.name()
        )));
    };
    let error = output_error(m, &p.scenario, &pt.theta1, &pt.theta2)?;
    Ok(DirectTestResult {
        delta: distance(&pt.theta1, &pt.theta2, &lower, &m.upper_bounds()),
        theta1: pt.theta1.clone(),
        theta2: pt.theta2.clone(),
        error,
        evaluations,
        best_start,
        feasible: error <= p.eps,
    })
}

/// Multistart pattern search; every start begins at `theta1 = theta2`.
pub fn solve(p: &DirectTestProblem) -> Result<DirectTestResult> {
    solve_from(p, &[], p.settings.starts, 0)
}

/// Like [`solve`] with additional starts at the given parameter pairs.
pub fn solve_warm(p: &DirectTestProblem, warm: &[(Vec<f64>, Vec<f64>)]) -> Result<DirectTestResult> {
    for (t1, t2) in warm {
        p.model.check_theta(t1)?;
        p.model.check_theta(t2)?;
    }
    solve_from(p, warm, p.settings.starts, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub eps: f64,
    pub delta: f64,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub error: f64,
    /// The pair was inherited from a smaller cap because it beat this
    /// cap's own search.
    pub carried: bool,
    /// Set when the search at this cap failed outright.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub model: String,
    pub params: Vec<String>,
    pub points: Vec<SensitivityPoint>,
}

/// `n` caps equally spaced in log space between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// The default cap grid: 13 points from 1e-6 to 1.
pub fn default_eps_grid() -> Vec<f64> {
    log_grid(1e-6, 1.0, 13)
}

/// Solves at each cap in increasing order, warm-starting from the previous
/// optimum. A pair feasible at a smaller cap stays feasible at a larger
/// one, so the reported curve carries the best pair forward and is
/// non-decreasing.
pub fn sweep(p: &DirectTestProblem, eps_grid: &[f64]) -> Result<SensitivityCurve> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidArgument("the eps grid is empty".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] <= w[0]) || eps_grid.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidArgument("the eps grid must be non-negative and strictly increasing".into()));
    }
    let mut points: Vec<SensitivityPoint> = Vec::with_capacity(eps_grid.len());
    let mut incumbent: Option<(Vec<f64>, Vec<f64>, f64, f64)> = None;
    for (k, &eps) in eps_grid.iter().enumerate() {
        let problem = DirectTestProblem { eps, ..p.clone() };
        let warm: Vec<(Vec<f64>, Vec<f64>)> = incumbent
            .iter()
            .map(|(t1, t2, _, _)| (t1.clone(), t2.clone()))
            .collect();
        let (fresh, stream_base) = if k == 0 {
            (p.settings.starts, 0)
        } else {
            (p.settings.sweep_starts, (p.settings.starts + (k - 1) * p.settings.sweep_starts) as u64)
        };
        match solve_from(&problem, &warm, fresh, stream_base) {
            Ok(r) if r.feasible => {
                let carried = matches!(&incumbent, Some((_, _, d, _)) if *d > r.delta);
                if !carried {
                    incumbent = Some((r.theta1, r.theta2, r.delta, r.error));
                }
                let (t1, t2, d, e) = incumbent.clone().expect("incumbent set");
                points.push(SensitivityPoint {
                    eps,
                    delta: d,
                    theta1: t1,
                    theta2: t2,
                    error: e,
                    carried,
                    failure: None,
                });
            }
            outcome => {
                let failure = match outcome {
                    Ok(_) => "result failed the feasibility recheck".to_string(),
                    Err(e) => e.to_string(),
                };
                let (t1, t2, d, e) = incumbent
                    .clone()
                    .unwrap_or((Vec::new(), Vec::new(), f64::NAN, f64::NAN));
                points.push(SensitivityPoint {
                    eps,
                    delta: d,
                    theta1: t1,
                    theta2: t2,
                    error: e,
                    carried: incumbent.is_some(),
                    failure: Some(failure),
                });
            }
        }
    }
    Ok(SensitivityCurve {
        model: p.model.name().to_string(),
        params: p.model.param_names(),
        points,
    })
}

impl SensitivityCurve {
    /// Header `eps,delta,error,<p>_1...,<p>_2...`, one row per cap.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,delta,error");
        for suffix in ["1", "2"] {
            for p in &self.params {
                let _ = write!(out, ",{p}_{suffix}");
            }
        }
        out.push('\n');
        for pt in &self.points {
            let _ = write!(out, "{},{},{}", pt.eps, pt.delta, pt.error);
            for theta in [&pt.theta1, &pt.theta2] {
                if theta.is_empty() {
                    for _ in &self.params {
                        out.push(',');
                    }
                } else {
                    for x in theta {
                        let _ = write!(out, ",{x}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
