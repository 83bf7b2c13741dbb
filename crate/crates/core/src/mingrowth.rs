//! Positive solutions of minimal growth.
//!
//! `u^K` is the increasing limit of the solutions `u_N` of `Q'_V(u) = 0` on
//! `Omega_N \ K` with the given trace on `dK` and zero data on `dOmega_N`.
//! Point-singularity solutions are the analogous limits with the compact set
//! replaced by shrinking balls around `x0` and a load concentrated next to
//! them, normalized at a second point `x1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{
    bump, CompactSetSpec, ExhaustionSchedule, Field, Grid, GridSpec, Interval, RadialProblem,
};
use crate::error::{arg, Error, Result};
use crate::solver::{potential_on, solve_dirichlet, Checked, NodalSystem, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinGrowthOptions {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    /// Cauchy criterion on the window between the last two levels.
    pub cauchy_tol: f64,
    /// Window for the Cauchy criterion; defaults to the first level.
    pub window: Option<Interval>,
}

impl Default for MinGrowthOptions {
    fn default() -> Self {
        MinGrowthOptions {
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            cauchy_tol: 1e-5,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalGrowthRun {
    pub k: CompactSetSpec,
    pub trace: (f64, f64),
    pub levels: Vec<Interval>,
    #[serde(skip)]
    pub solutions: Vec<Field>,
    #[serde(skip)]
    pub limit: Field,
    /// `max (u_N - u_{N+1})` over the nodes of `u_N`.
    pub monotonicity: Vec<f64>,
    /// `max |u_{N+1} - u_N|` on the window.
    pub cauchy: Vec<f64>,
    pub window: Interval,
    pub converged: bool,
    pub failure: Option<(usize, String)>,
}

/// One piece of `Omega_N` minus the excised set, with its Dirichlet data.
struct Piece {
    interval: Interval,
    boundary: (f64, f64),
}

fn solve_pieces(
    problem: &RadialProblem,
    pieces: &[Piece],
    load: Option<&dyn Fn(f64) -> f64>,
    opts: &MinGrowthOptions,
) -> Result<Field> {
    let mut nodes: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut free = false;
    for (k, piece) in pieces.iter().enumerate() {
        let grid = Arc::new(opts.grid.level_grid(problem, &piece.interval)?);
        if k == 0 {
            free = grid.free_inner();
        }
        let f = load.map(|f| Field::from_fn(grid.clone(), f));
        let rep = solve_dirichlet(
            problem,
            &grid,
            piece.boundary,
            f.as_ref(),
            &opts.solver,
            Checked::Yes,
        )?;
        if !rep.converged {
            return Err(Error::NonConvergence(format!(
                "solve on ({}, {}) stopped at residual {:.3e}",
                piece.interval.lo, piece.interval.hi, rep.final_residual_norm
            )));
        }
        for (&r, &v) in grid.nodes().iter().zip(rep.solution.values()) {
            if nodes.last().is_some_and(|&l| r <= l) {
                continue;
            }
            nodes.push(r);
            values.push(v);
        }
    }
    let grid = Arc::new(Grid::from_nodes(nodes, problem.d, free)?);
    Field::new(grid, values)
}

fn k_pieces(problem: &RadialProblem, k: &CompactSetSpec, level: &Interval) -> Result<Vec<Piece>> {
    k.check_inside(problem, level)?;
    let (t_lo, t_hi) = k
        .trace
        .ok_or_else(|| Error::Argument("K needs a boundary trace".into()))?;
    if !(t_lo > 0.0 && t_hi > 0.0) {
        return arg("trace values must be positive");
    }
    let mut pieces = Vec::new();
    let ball = k.lo == 0.0 && problem.free_inner(level.lo);
    if !ball {
        pieces.push(Piece {
            interval: Interval {
                lo: level.lo,
                hi: k.lo,
            },
            boundary: (0.0, t_lo),
        });
    }
    pieces.push(Piece {
        interval: Interval {
            lo: k.hi,
            hi: level.hi,
        },
        boundary: (t_hi, 0.0),
    });
    Ok(pieces)
}

/// Monotone limit `u^K` along the exhaustion.
pub fn uk_limit(
    problem: &RadialProblem,
    k: &CompactSetSpec,
    exhaustion: &ExhaustionSchedule,
    opts: &MinGrowthOptions,
) -> Result<MinimalGrowthRun> {
    let trace = k
        .trace
        .ok_or_else(|| Error::Argument("K needs a boundary trace".into()))?;
    for level in exhaustion.levels.iter().skip(1) {
        k.check_inside(problem, level)?;
    }
    let window = opts.window.unwrap_or(exhaustion.levels[0]);
    let mut solutions: Vec<Field> = Vec::new();
    let mut levels = Vec::new();
    let mut failure = None;
    for (n, level) in exhaustion.levels.iter().enumerate() {
        if k.check_inside(problem, level).is_err() {
            continue;
        }
        match k_pieces(problem, k, level).and_then(|pc| solve_pieces(problem, &pc, None, opts)) {
            Ok(u) => {
                solutions.push(u);
                levels.push(*level);
            }
            Err(e @ Error::Precondition(_)) if solutions.is_empty() => return Err(e),
            Err(e) => {
                failure = Some((n, e.to_string()));
                break;
            }
        }
    }
    if solutions.is_empty() {
        return Err(Error::NonConvergence(
            failure
                .map(|f| f.1)
                .unwrap_or_else(|| "no level contains K".into()),
        ));
    }
    let mut monotonicity = Vec::new();
    let mut cauchy = Vec::new();
    for w in solutions.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let drop = a
            .grid()
            .nodes()
            .iter()
            .zip(a.values())
            .map(|(&r, &x)| x - b.sample(r))
            .fold(f64::NEG_INFINITY, f64::max);
        monotonicity.push(drop);
        cauchy.push(b.window_sup_diff(a, &window));
    }
    let converged = cauchy.last().is_some_and(|&c| c <= opts.cauchy_tol);
    Ok(MinimalGrowthRun {
        k: *k,
        trace,
        levels,
        limit: solutions.last().unwrap().clone(),
        solutions,
        monotonicity,
        cauchy,
        window,
        converged,
        failure,
    })
}

#[derive(Debug, Clone)]
pub struct PointSingularityRun {
    pub x0: f64,
    pub x1: f64,
    /// Excised radius per level.
    pub radii: Vec<f64>,
    pub levels: Vec<Interval>,
    pub solutions: Vec<Field>,
    /// Last level's solution, `u(x1) = 1`.
    pub solution: Field,
    /// `max |u_{N+1} - u_N|` on the window between `x1 / 2` and `2 x1`.
    pub cauchy: Vec<f64>,
    pub failure: Option<(usize, String)>,
}

impl PointSingularityRun {
    /// The last solution restricted to `|r - x0| >= 4 rho`, where it solves
    /// the homogeneous equation.
    pub fn punctured(&self) -> Result<Field> {
        let rho = *self.radii.last().expect("run has at least one level");
        let u = &self.solution;
        let (nodes, values): (Vec<f64>, Vec<f64>) = u
            .grid()
            .nodes()
            .iter()
            .zip(u.values())
            .filter(|(&r, _)| (r - self.x0).abs() >= 4.0 * rho * (1.0 - 1e-12))
            .map(|(&r, &v)| (r, v))
            .unzip();
        let grid = Arc::new(Grid::from_nodes(nodes, u.grid().dimension(), false)?);
        Field::new(grid, values)
    }
}

/// Positive solution on `Omega \ {x0}` as the limit of solves of
/// `Q'(u_N) = c_N f_N` on `Omega_N \ ball(x0, rho_N)`. `f_N` is a unit bump
/// on `rho_N < |r - x0| < 2 rho_N`, `rho_N` halves with every level, and
/// `c_N` is fixed by `u_N(x1) = 1`.
pub fn point_singularity_solution(
    problem: &RadialProblem,
    x0: f64,
    x1: f64,
    exhaustion: &ExhaustionSchedule,
    opts: &MinGrowthOptions,
) -> Result<PointSingularityRun> {
    let first = exhaustion.levels[0];
    if x0 != 0.0 && problem.d != 1.0 {
        return arg("a point singularity off the center is only radial for d = 1");
    }
    if x0 == 0.0 && !problem.free_inner(first.lo) {
        return arg("x0 = 0 needs levels around the center");
    }
    if x0 != 0.0 && !(x0 > first.lo && x0 < first.hi) {
        return arg("x0 must lie inside the first level");
    }
    let gap = (x1 - x0).abs();
    if !(gap > 0.0) || !(x1 > first.lo && x1 < first.hi) {
        return arg("x1 must differ from x0 and lie inside the first level");
    }
    let mut rho = 0.25 * gap;
    if x0 != 0.0 {
        rho = rho.min(0.25 * (x0 - first.lo));
    }
    let mut radii = Vec::new();
    let mut solutions: Vec<Field> = Vec::new();
    let mut levels = Vec::new();
    let mut failure = None;
    for (n, level) in exhaustion.levels.iter().enumerate() {
        let mut pieces = Vec::new();
        if x0 != 0.0 {
            pieces.push(Piece {
                interval: Interval {
                    lo: level.lo,
                    hi: x0 - rho,
                },
                boundary: (0.0, 0.0),
            });
        }
        pieces.push(Piece {
            interval: Interval {
                lo: x0 + rho,
                hi: level.hi,
            },
            boundary: (0.0, 0.0),
        });
        let load = |r: f64| bump((r - x0).abs(), 1.5 * rho, 0.5 * rho);
        let step = solve_pieces(problem, &pieces, Some(&load), opts).and_then(|u| {
            let at = u.sample(x1);
            if !(at > 0.0) {
                return Err(Error::NonConvergence("solution vanishes at x1".into()));
            }
            Ok(u.scaled(1.0 / at))
        });
        match step {
            Ok(u) => {
                solutions.push(u);
                levels.push(*level);
                radii.push(rho);
            }
            Err(e @ Error::Precondition(_)) if solutions.is_empty() => return Err(e),
            Err(e) => {
                failure = Some((n, e.to_string()));
                break;
            }
        }
        rho *= 0.5;
    }
    if solutions.is_empty() {
        return Err(Error::NonConvergence(
            failure.map(|f| f.1).unwrap_or_else(|| "no levels".into()),
        ));
    }
    let window = Interval {
        lo: x0 + 0.5 * (x1 - x0),
        hi: x0 + 2.0 * (x1 - x0),
    };
    let window = Interval {
        lo: window.lo.min(window.hi),
        hi: window.lo.max(window.hi),
    };
    let cauchy = solutions
        .windows(2)
        .map(|w| w[1].window_sup_diff(&w[0], &window))
        .collect();
    Ok(PointSingularityRun {
        x0,
        x1,
        radii,
        levels,
        solution: solutions.last().unwrap().clone(),
        solutions,
        cauchy,
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentMode {
    /// Slope of `log u` against `log |r - x0|`.
    Power,
    /// Slope of `log u` against `log(-log |r - x0|)`, for `p = d`.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope of `log u` over the nodes in `window`, where the
/// window is given in distances from `x0`.
pub fn singularity_exponent(
    u: &Field,
    x0: f64,
    window: &Interval,
    mode: ExponentMode,
) -> Result<ExponentFit> {
    let g = u.grid();
    let iv = g.interval();
    let dist_lo = (iv.lo - x0).abs();
    let inside_lo = window.lo > dist_lo || (x0 < iv.lo && window.lo > iv.lo - x0);
    if !(window.lo > 0.0) || !inside_lo || !(x0 + window.hi < iv.hi) {
        return arg("fit window must lie strictly inside the grid");
    }
    if mode == ExponentMode::Log && !(window.hi < 1.0) {
        return arg("log mode needs distances below 1");
    }
    let mut pts = Vec::new();
    for (&r, &v) in g.nodes().iter().zip(u.values()) {
        let s = (r - x0).abs();
        if s < window.lo || s > window.hi {
            continue;
        }
        if !(v > 0.0) {
            return arg(format!("u = {v} is not positive at r = {r}"));
        }
        let x = match mode {
            ExponentMode::Power => s.ln(),
            ExponentMode::Log => (-s.ln()).ln(),
        };
        pts.push((x, v.ln()));
    }
    if pts.len() < 3 {
        return arg("fit window holds fewer than 3 nodes");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    Ok(ExponentFit {
        slope,
        residual: (ss / n).sqrt(),
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Removability {
    /// `residual` is the pairing of `Q'_V(u)` with the hat at `x0`,
    /// `relative` the same divided by the local flux scale.
    Removable {
        residual: f64,
        relative: f64,
    },
    NonremovableBlowup {
        growth: f64,
    },
    NonremovableFlux {
        residual: f64,
        relative: f64,
    },
    Undetermined,
}

/// Decides whether the singularity of a positive solution at `x0` is
/// removable. Growth toward `x0` over the innermost decades counts as
/// blowup; otherwise `u` is extended continuously to `x0` and the weak
/// residual against the hat function at `x0` is compared with `10 tol`.
pub fn removability_test(
    problem: &RadialProblem,
    u: &Field,
    x0: f64,
    tol: f64,
) -> Result<Removability> {
    let g = u.grid();
    let nodes = g.nodes();
    let vals = u.values();
    if vals.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return arg("u must be finite and nonnegative");
    }
    let at_node = g.find(x0);
    let delta = nodes
        .iter()
        .map(|&r| (r - x0).abs())
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    // solution away from x0, relative to the largest flux scale there
    {
        let pot = potential_on(problem, g)?;
        let sys = NodalSystem::new(g, problem.p, pot);
        let res = sys.residual(vals, 0.0, 0.0);
        let away: Vec<usize> = (0..g.len())
            .filter(|&i| !g.is_dirichlet(i) && (nodes[i] - x0).abs() > 2.0 * delta)
            .collect();
        let smax = away.iter().map(|&i| res.local_scale[i]).fold(0.0, f64::max);
        let allowed = |i: usize| 1e3 * tol.max(1e-12) * smax + res.noise[i];
        if let Some(&i) = away.iter().find(|&&i| res.r[i].abs() > allowed(i)) {
            return Err(Error::Precondition(format!(
                "u is not a solution away from x0: relative residual {:.3e} at r = {}",
                res.r[i].abs() / smax,
                nodes[i]
            )));
        }
    }
    // samples at distances delta * 10^k on the side holding the closest node
    let side = if nodes
        .iter()
        .any(|&r| r < x0 && x0 - r <= delta * (1.0 + 1e-9))
    {
        -1.0
    } else {
        1.0
    };
    let samples: Vec<f64> = (0..4)
        .map(|k| x0 + side * delta * 10f64.powi(k))
        .take_while(|&r| r >= nodes[0] && r <= nodes[nodes.len() - 1])
        .map(|r| u.sample(r))
        .collect();
    if samples.len() >= 3 {
        let inc: Vec<f64> = samples.windows(2).map(|w| w[0] - w[1]).collect();
        let growing = inc.iter().all(|&d| d > 0.0);
        let sustained = inc.windows(2).all(|w| w[0] >= 0.5 * w[1]);
        let scale = samples.iter().cloned().fold(0.0, f64::max);
        if growing && sustained && inc[0] > 1e-6 * scale {
            return Ok(Removability::NonremovableBlowup {
                growth: samples[0] / samples[samples.len() - 1],
            });
        }
        let shrinking = inc
            .windows(2)
            .all(|w| w[0].abs() <= 0.5 * w[1].abs() + 1e-12 * scale);
        if !shrinking && inc.iter().any(|&d| d < 0.0) && inc.iter().any(|&d| d > 0.0) {
            return Ok(Removability::Undetermined);
        }
    }
    // continuous extension to x0 and the residual of the hat at x0
    let (grid, values, idx) = match at_node {
        Some(i) => (g.clone(), vals.to_vec(), i),
        None => {
            let j = nodes.partition_point(|&r| r < x0);
            let mut nn = nodes.to_vec();
            let mut vv = vals.to_vec();
            let ext = if j == 0 {
                extrapolate(nodes[0], nodes[1], vals[0], vals[1], x0)
            } else if j == nodes.len() {
                let n = nodes.len();
                extrapolate(nodes[n - 1], nodes[n - 2], vals[n - 1], vals[n - 2], x0)
            } else {
                vals[j - 1]
                    + (vals[j] - vals[j - 1]) * (x0 - nodes[j - 1]) / (nodes[j] - nodes[j - 1])
            };
            nn.insert(j, x0);
            vv.insert(j, ext.max(0.0));
            let free = x0 == 0.0 && problem.free_inner(0.0);
            (Arc::new(Grid::from_nodes(nn, problem.d, free)?), vv, j)
        }
    };
    let pot = potential_on(problem, &grid)?;
    let sys = NodalSystem::new(&grid, problem.p, pot);
    let res = sys.residual(&values, 0.0, 0.0);
    if grid.is_dirichlet(idx) {
        return arg("x0 sits on the outer boundary of the grid");
    }
    let residual = res.r[idx];
    let relative = residual.abs() / res.local_scale[idx].max(f64::MIN_POSITIVE);
    Ok(if residual.abs() > 10.0 * tol + res.noise[idx] {
        Removability::NonremovableFlux { residual, relative }
    } else {
        Removability::Removable { residual, relative }
    })
}

fn extrapolate(r0: f64, r1: f64, v0: f64, v1: f64, x: f64) -> f64 {
    v0 + (v1 - v0) * (x - r0) / (r1 - r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{InnerEnd, PotentialSpec};

    fn field(nodes: Vec<f64>, d: f64, free: bool, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(Arc::new(Grid::from_nodes(nodes, d, free).unwrap()), f)
    }

    fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| a * (b / a).powf(k as f64 / n as f64))
            .collect()
    }

    #[test]
    fn exponent_of_exact_profiles() {
        let u = field(geometric(1e-4, 1.0, 400), 3.0, false, |r| 1.0 / r);
        let w = Interval { lo: 1e-3, hi: 1e-1 };
        let f = singularity_exponent(&u, 0.0, &w, ExponentMode::Power).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-6);
        let c = field(geometric(1e-4, 1.0, 400), 3.0, false, |_| 2.0);
        assert!(
            singularity_exponent(&c, 0.0, &w, ExponentMode::Power)
                .unwrap()
                .slope
                .abs()
                < 1e-8
        );
        let l = field(geometric(1e-6, 1.0, 400), 2.0, false, |r| -r.ln());
        let f = singularity_exponent(&l, 0.0, &w, ExponentMode::Log).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-10);
        let z = field(geometric(1e-4, 1.0, 40), 3.0, false, |r| r - 0.01);
        assert!(singularity_exponent(&z, 0.0, &w, ExponentMode::Power).is_err());
        assert!(singularity_exponent(
            &u,
            0.0,
            &Interval { lo: 1e-5, hi: 0.1 },
            ExponentMode::Power
        )
        .is_err());
    }

    #[test]
    fn removability_examples() {
        let zero = |d: f64, lo: f64| {
            RadialProblem::new(
                2.0,
                d,
                Interval::new(lo, f64::INFINITY).unwrap(),
                PotentialSpec::Zero,
            )
            .unwrap()
        };
        // 1/r in three dimensions blows up
        let u = field(geometric(1e-4, 10.0, 500), 3.0, false, |r| 1.0 / r);
        assert!(matches!(
            removability_test(&zero(3.0, 0.0), &u, 0.0, 1e-10).unwrap(),
            Removability::NonremovableBlowup { .. }
        ));
        // min(x, 1) on the half line: kink at 1
        let pr = RadialProblem::with_inner(
            2.0,
            1.0,
            Interval::new(0.0, f64::INFINITY).unwrap(),
            InnerEnd::Boundary,
            PotentialSpec::Zero,
        )
        .unwrap();
        let nodes: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let k = field(nodes, 1.0, false, |r| r.min(1.0));
        match removability_test(&pr, &k, 1.0, 1e-10).unwrap() {
            // slope jump of the kink
            Removability::NonremovableFlux { residual, .. } => {
                assert!((residual - 1.0).abs() < 1e-9, "{residual}")
            }
            other => panic!("{other:?}"),
        }
        // constant in the critical case, punctured at the center
        let c = field(geometric(1e-3, 10.0, 200), 1.0, false, |_| 1.0);
        assert!(matches!(
            removability_test(&zero(1.0, 0.0), &c, 0.0, 1e-10).unwrap(),
            Removability::Removable { .. }
        ));
    }
}
