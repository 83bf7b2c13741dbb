//! Weak residuals, Dirichlet solves, sign classification and the weak
//! comparison harness.
//!
//! The discrete operator is the gradient of the discrete energy
//!
//! ```text
//! Q_h(u) = (1/p) [ sum_c m_c |s_c|^p + sum_i M_i V_i |u_i|^p ],
//! ```
//!
//! where `s_c` is the slope on cell `c`, `m_c` the exact radial measure of
//! the cell and `M_i` the lumped node mass. Solves use damped Newton on the
//! regularized flux `(s^2 + eps^2)^((p-2)/2) s` with geometric continuation
//! of `eps` down to zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Field, Grid, Interval, RadialProblem};
use crate::error::{arg, Error, Result};
use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative residual tolerance; `None` picks 1e-10 for p = 2, 1e-8 otherwise.
    pub tol: Option<f64>,
    pub max_newton: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: None,
            max_newton: 200,
            eps_start: 1e-1,
            eps_end: 1e-8,
            eps_factor: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn tol_for(&self, p: f64) -> f64 {
        self.tol.unwrap_or(if p == 2.0 { 1e-10 } else { 1e-8 })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Field,
    pub iterations: usize,
    /// `max |R_i| / (local_scale_i + noise_i / tol)` with the unregularized
    /// operator; at most `tol` when converged.
    pub final_residual_norm: f64,
    /// Smallest regularization reached before the unregularized polish (0 for p = 2).
    pub regularization_eps_final: f64,
    pub converged: bool,
}

/// Relative perturbation of `u` whose flux change bounds the rounding noise of the residual.
const NOISE_REL: f64 = 64.0 * f64::EPSILON;
const JACOBIAN_FLOOR: f64 = 1e-150;

#[inline]
pub(crate) fn flux(s: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        s
    } else if eps == 0.0 {
        if s == 0.0 {
            0.0
        } else {
            s.abs().powf(p - 2.0) * s
        }
    } else {
        (s * s + eps * eps).powf(0.5 * (p - 2.0)) * s
    }
}

#[inline]
fn dflux(s: f64, p: f64, eps: f64, floor: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if eps == 0.0 {
        (p - 1.0) * s.abs().max(floor).powf(p - 2.0)
    } else {
        let q = s * s + eps * eps;
        q.powf(0.5 * (p - 4.0)) * ((p - 1.0) * s * s + eps * eps)
    }
}

/// Discrete system `Q'(u) = F` with some nodes held fixed.
#[derive(Debug, Clone)]
pub(crate) struct NodalSystem<'a> {
    pub grid: &'a Grid,
    pub p: f64,
    pub pot: Vec<f64>,
    pub fixed: Vec<Option<f64>>,
    /// Integrated load `F_i = M_i f_i`.
    pub load: Vec<f64>,
}

pub(crate) struct Residual {
    pub r: Vec<f64>,
    /// Per-node sum of absolute flux, potential and load contributions.
    pub local_scale: Vec<f64>,
    /// Rounding noise of `r`: the flux change under a perturbation of `u`
    /// by a few ulps, which dominates near degenerate slopes.
    pub noise: Vec<f64>,
}

impl Residual {
    /// Allowed `|R_i|` at relative tolerance `tol`.
    pub fn slack(&self, i: usize, tol: f64) -> f64 {
        tol * self.local_scale[i] + self.noise[i]
    }

    /// Effective per-node scale `local_scale + noise / tol` and its maximum
    /// over free nodes.
    fn scales(&self, fixed: &[Option<f64>], tol: f64) -> (Vec<f64>, f64) {
        let sc: Vec<f64> = (0..self.r.len())
            .map(|i| self.local_scale[i] + self.noise[i] / tol)
            .collect();
        let smax = sc
            .iter()
            .zip(fixed)
            .filter(|(_, f)| f.is_none())
            .fold(0.0f64, |a, (s, _)| a.max(*s));
        (sc, smax)
    }

    /// `max_i |R_i| / (local_scale_i + noise_i / tol)` over free nodes, so
    /// that a value `<= tol` means `|R_i| <= tol * local_scale_i + noise_i`.
    pub fn relative(&self, fixed: &[Option<f64>], tol: f64) -> f64 {
        let (sc, _) = self.scales(fixed, tol);
        let mut worst: f64 = 0.0;
        for i in 0..self.r.len() {
            if fixed[i].is_none() {
                let s = sc[i];
                worst = worst.max(if s > 0.0 {
                    self.r[i].abs() / s
                } else {
                    self.r[i].abs()
                });
            }
        }
        worst
    }

    /// Inverse effective scales on free nodes (floored at `rel_floor` of
    /// the maximum), 0 on fixed ones.
    fn weights(&self, fixed: &[Option<f64>], tol: f64, rel_floor: f64) -> Vec<f64> {
        let (sc, smax) = self.scales(fixed, tol);
        let floor = (rel_floor * smax).max(f64::MIN_POSITIVE);
        sc.iter()
            .zip(fixed)
            .map(|(s, f)| if f.is_some() { 0.0 } else { 1.0 / s.max(floor) })
            .collect()
    }

    fn weighted_sq_norm(&self, weights: &[f64]) -> f64 {
        self.r
            .iter()
            .zip(weights)
            .map(|(r, w)| (r * w).powi(2))
            .sum()
    }
}

impl<'a> NodalSystem<'a> {
    pub fn new(grid: &'a Grid, p: f64, pot: Vec<f64>) -> Self {
        let n = grid.len();
        let mut fixed = vec![None; n];
        if !grid.free_inner() {
            fixed[0] = Some(0.0);
        }
        fixed[n - 1] = Some(0.0);
        NodalSystem {
            grid,
            p,
            pot,
            fixed,
            load: vec![0.0; n],
        }
    }

    pub fn residual(&self, u: &[f64], eps: f64, eps_u: f64) -> Residual {
        let g = self.grid;
        let n = g.len();
        let p = self.p;
        let mut r = vec![0.0; n];
        let mut sc = vec![0.0; n];
        let mut noise = vec![0.0; n];
        for c in 0..g.cells() {
            let h = g.cell_width(c);
            let s = (u[c + 1] - u[c]) / h;
            let fl = g.cell_measure(c) / h * flux(s, p, eps);
            r[c] -= fl;
            r[c + 1] += fl;
            let ds = NOISE_REL * (u[c].abs() + u[c + 1].abs()) / h;
            let round =
                g.cell_measure(c) / h * (flux(s.abs() + ds, p, eps) - flux(s.abs(), p, eps));
            sc[c] += fl.abs();
            sc[c + 1] += fl.abs();
            noise[c] += round;
            noise[c + 1] += round;
        }
        for i in 0..n {
            let m = g.node_mass(i);
            let v = self.pot[i];
            if v != 0.0 {
                let t = m * v * flux(u[i], p, eps_u);
                r[i] += t;
                sc[i] += t.abs();
            }
            r[i] -= self.load[i];
            sc[i] += self.load[i].abs();
            noise[i] += NOISE_REL * sc[i];
        }
        Residual {
            r,
            local_scale: sc,
            noise,
        }
    }

    fn jacobian(
        &self,
        u: &[f64],
        eps: f64,
        eps_u: f64,
        sfloor: f64,
        ufloor: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let n = g.len();
        let p = self.p;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for c in 0..g.cells() {
            let h = g.cell_width(c);
            let s = (u[c + 1] - u[c]) / h;
            let k = g.cell_measure(c) / (h * h) * dflux(s, p, eps, sfloor);
            diag[c] += k;
            diag[c + 1] += k;
            upper[c] -= k;
            lower[c + 1] -= k;
        }
        for i in 0..n {
            let v = self.pot[i];
            if v != 0.0 {
                diag[i] += g.node_mass(i) * v * dflux(u[i], p, eps_u, ufloor);
            }
        }
        for i in 0..n {
            if self.fixed[i].is_some() {
                diag[i] = 1.0;
                lower[i] = 0.0;
                upper[i] = 0.0;
                if i > 0 {
                    upper[i - 1] = 0.0;
                }
                if i + 1 < n {
                    lower[i + 1] = 0.0;
                }
            }
        }
        (lower, diag, upper)
    }

    /// `sum m |s|^p + sum M V |u|^p`
    fn energy_density_sum(&self, u: &[f64]) -> f64 {
        let g = self.grid;
        let mut e = 0.0;
        for c in 0..g.cells() {
            let s = (u[c + 1] - u[c]) / g.cell_width(c);
            e += g.cell_measure(c) * s.abs().powf(self.p);
        }
        for i in 0..g.len() {
            e += g.node_mass(i) * self.pot[i] * u[i].abs().powf(self.p);
        }
        e
    }

    fn apply_fixed(&self, u: &mut [f64]) {
        for (x, f) in u.iter_mut().zip(&self.fixed) {
            if let Some(v) = f {
                *x = *v;
            }
        }
    }

    fn slope_scale(&self, u: &[f64]) -> f64 {
        let g = self.grid;
        let mut s: f64 = 0.0;
        for c in 0..g.cells() {
            s = s.max(((u[c + 1] - u[c]) / g.cell_width(c)).abs());
        }
        s
    }

    /// Lower decile of the nonzero cell slopes.
    fn low_slope(&self, u: &[f64]) -> f64 {
        let g = self.grid;
        let mut v: Vec<f64> = (0..g.cells())
            .map(|c| ((u[c + 1] - u[c]) / g.cell_width(c)).abs())
            .filter(|&s| s > 0.0)
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 10]
    }

    /// Damped Newton with eps-continuation. `warm` skips the coarse
    /// regularization stages.
    pub fn solve(&self, init: Vec<f64>, cfg: &SolverConfig, warm: bool) -> NewtonOutcome {
        let out = self.solve_from(init.clone(), cfg, warm);
        if out.converged || !warm || self.p == 2.0 {
            return out;
        }
        // a warm start may sit where the operator degenerates; retry with
        // the full continuation
        let cold = self.solve_from(init, cfg, false);
        NewtonOutcome {
            iterations: out.iterations + cold.iterations,
            ..cold
        }
    }

    fn solve_from(&self, init: Vec<f64>, cfg: &SolverConfig, warm: bool) -> NewtonOutcome {
        let tol = cfg.tol_for(self.p);
        let mut u = init;
        self.apply_fixed(&mut u);
        let mut iterations = 0;
        let mut eps_used = 0.0;
        let mut erel = if self.p == 2.0 {
            0.0
        } else if warm {
            cfg.eps_start.min(1e-5)
        } else {
            cfg.eps_start
        };
        loop {
            let last = erel == 0.0;
            let stage_tol = if last { tol } else { tol.max(1e-6) };
            let sscale = self.slope_scale(&u).max(1e-300);
            let uscale = u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
            let (eps, eps_u) = (erel * sscale, erel * uscale);
            // the unregularized polish uses the exact Jacobian; the floor only
            // keeps |s|^(p-2) finite
            let (sfloor, ufloor) = if last {
                (JACOBIAN_FLOOR, JACOBIAN_FLOOR)
            } else {
                (1e-14 * sscale, 1e-14 * uscale)
            };
            let start = u.clone();
            let (it, ok) = self.newton_stage(
                &mut u,
                eps,
                eps_u,
                stage_tol,
                cfg.max_newton,
                sfloor,
                ufloor,
            );
            iterations += it;
            if last {
                if !ok && self.p != 2.0 {
                    // exact Newton overshoots in cells where |s|^(p-2) nearly
                    // vanishes; retry with a floored Jacobian (the residual
                    // stays exact) and keep the best iterate
                    let mut best = (
                        self.residual(&u, 0.0, 0.0).relative(&self.fixed, tol),
                        u.clone(),
                    );
                    let r0 = self.residual(&start, 0.0, 0.0).relative(&self.fixed, tol);
                    if r0 < best.0 {
                        best = (r0, start.clone());
                    }
                    for f in [1e-2, 1e-4, 1e-6, 1e-8] {
                        let mut trial = start.clone();
                        let (it, ok) = self.newton_stage(
                            &mut trial,
                            0.0,
                            0.0,
                            tol,
                            cfg.max_newton,
                            f * sscale,
                            f * uscale,
                        );
                        iterations += it;
                        let r = self.residual(&trial, 0.0, 0.0).relative(&self.fixed, tol);
                        if r < best.0 {
                            best = (r, trial);
                        }
                        if ok {
                            break;
                        }
                    }
                    u = best.1;
                }
                break;
            }
            if ok {
                eps_used = eps;
            }
            erel /= cfg.eps_factor;
            // past eps_end, continue while eps is not small against the
            // typical slope (slopes can span many decades)
            if erel < cfg.eps_end * (1.0 - 1e-9)
                && (erel * sscale <= 1e-4 * self.low_slope(&u) || erel < 1e-40)
            {
                erel = 0.0;
            }
        }
        let res = self.residual(&u, 0.0, 0.0).relative(&self.fixed, tol);
        NewtonOutcome {
            values: u,
            iterations,
            residual: res,
            eps_final: eps_used,
            converged: res <= tol,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn newton_stage(
        &self,
        u: &mut Vec<f64>,
        eps: f64,
        eps_u: f64,
        tol: f64,
        max_it: usize,
        sfloor: f64,
        ufloor: f64,
    ) -> (usize, bool) {
        let mut res = self.residual(u, eps, eps_u);
        for it in 0..max_it {
            if res.relative(&self.fixed, tol) <= tol {
                return (it, true);
            }
            let (lo, di, up) = self.jacobian(u, eps, eps_u, sfloor, ufloor);
            let rhs: Vec<f64> = res
                .r
                .iter()
                .zip(&self.fixed)
                .map(|(r, f)| if f.is_some() { 0.0 } else { -r })
                .collect();
            let Some(step) = solve_tridiagonal(&lo, &di, &up, &rhs) else {
                return (it, false);
            };
            // merits in turn: residuals as displacements (scaled by the
            // Jacobian diagonal), then relative to the floored and the exact
            // local scales
            let mut accepted = false;
            let jacobi: Vec<f64> = di
                .iter()
                .zip(&self.fixed)
                .map(|(d, f)| {
                    if f.is_some() || !(*d > 0.0) {
                        0.0
                    } else {
                        1.0 / d
                    }
                })
                .collect();
            let coarse = res.weights(&self.fixed, tol, 1e-10);
            let coarse_done = res.r.iter().zip(&coarse).all(|(r, w)| (r * w).abs() <= tol);
            let mut merits = vec![jacobi];
            if !coarse_done {
                merits.push(coarse);
            }
            merits.push(res.weights(&self.fixed, tol, 0.0));
            for weights in merits {
                let phi0 = res.weighted_sq_norm(&weights);
                let mut alpha = 1.0;
                while alpha > 1e-10 {
                    let trial: Vec<f64> = u.iter().zip(&step).map(|(x, d)| x + alpha * d).collect();
                    let r_trial = self.residual(&trial, eps, eps_u);
                    let phi = r_trial.weighted_sq_norm(&weights);
                    if phi.is_finite() && phi <= (1.0 - 2e-4 * alpha) * phi0 {
                        *u = trial;
                        res = r_trial;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if accepted {
                    break;
                }
            }
            if !accepted {
                return (it + 1, res.relative(&self.fixed, tol) <= tol);
            }
        }
        (max_it, res.relative(&self.fixed, tol) <= tol)
    }
}

pub(crate) struct NewtonOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub eps_final: f64,
    pub converged: bool,
}

/// Dirichlet nodes of the grid (both ends, or only the outer end for a
/// ball around the center).
fn dirichlet_nodes(grid: &Grid) -> Vec<usize> {
    let n = grid.len();
    if grid.free_inner() {
        vec![n - 1]
    } else {
        vec![0, n - 1]
    }
}

pub(crate) fn potential_on(problem: &RadialProblem, grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut skip = vec![false; n];
    for i in dirichlet_nodes(grid) {
        skip[i] = true;
    }
    let mut pot = problem.potential.sample(grid, &skip)?;
    // Dirichlet nodes never see the potential; evaluate when finite anyway
    // so residuals of non-vanishing fields there stay meaningful.
    for i in dirichlet_nodes(grid) {
        let v = problem.potential.eval(grid.node(i));
        pot[i] = if v.is_finite() { v } else { 0.0 };
    }
    Ok(pot)
}

/// Weak residual `int |u'|^(p-2) u' phi_i' + V |u|^(p-2) u phi_i - f phi_i`
/// against every nodal hat function. Dirichlet nodes report 0; the free
/// center node of a ball is an interior node.
pub fn weak_residual(u: &Field, f: Option<&Field>, problem: &RadialProblem) -> Result<Field> {
    let grid = u.grid();
    let pot = potential_on(problem, grid)?;
    let mut sys = NodalSystem::new(grid, problem.p, pot);
    if let Some(f) = f {
        check_same_grid(u, f)?;
        sys.load = f
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| grid.node_mass(i) * v)
            .collect();
    }
    let mut r = sys.residual(u.values(), 0.0, 0.0).r;
    for i in dirichlet_nodes(grid) {
        r[i] = 0.0;
    }
    Field::new(grid.clone(), r)
}

pub(crate) fn check_same_grid(a: &Field, b: &Field) -> Result<()> {
    if !Arc::ptr_eq(a.grid(), b.grid()) && a.grid().nodes() != b.grid().nodes() {
        return arg("fields live on different grids");
    }
    Ok(())
}

/// Solves `Q'(u) = f` on `grid` with Dirichlet values `boundary = (inner, outer)`
/// (the inner value is ignored for a ball around the center).
pub fn solve_on_grid(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    boundary: (f64, f64),
    f: Option<&Field>,
    init: Option<&Field>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if !boundary.0.is_finite() || !boundary.1.is_finite() {
        return arg("boundary values must be finite");
    }
    let pot = potential_on(problem, grid)?;
    let mut sys = NodalSystem::new(grid, problem.p, pot);
    let n = grid.len();
    if !grid.free_inner() {
        sys.fixed[0] = Some(boundary.0);
    }
    sys.fixed[n - 1] = Some(boundary.1);
    if let Some(f) = f {
        if f.len() != n {
            return arg("load field does not match the grid");
        }
        sys.load = (0..n).map(|i| grid.node_mass(i) * f.values()[i]).collect();
    }
    let (start, warm) = match init {
        Some(u0) => (u0.values().to_vec(), true),
        None => (initial_guess(&sys, boundary, cfg), false),
    };
    let out = sys.solve(start, cfg, warm);
    Ok(SolveReport {
        solution: Field::new(grid.clone(), out.values)?,
        iterations: out.iterations,
        final_residual_norm: out.residual,
        regularization_eps_final: out.eps_final,
        converged: out.converged,
    })
}

/// Linear interpolation of the boundary data, improved by one p = 2 solve
/// when the problem carries a load.
fn initial_guess(sys: &NodalSystem, boundary: (f64, f64), cfg: &SolverConfig) -> Vec<f64> {
    let g = sys.grid;
    let iv = g.interval();
    let lin: Vec<f64> = g
        .nodes()
        .iter()
        .map(|&r| {
            if g.free_inner() {
                boundary.1
            } else {
                boundary.0 + (boundary.1 - boundary.0) * (r - iv.lo) / iv.length()
            }
        })
        .collect();
    if sys.p == 2.0 || sys.load.iter().all(|&x| x == 0.0) {
        return lin;
    }
    let mut lin_sys = sys.clone();
    lin_sys.p = 2.0;
    let out = lin_sys.solve(lin.clone(), cfg, false);
    if !out.values.iter().all(|x| x.is_finite()) {
        return lin;
    }
    let mut u = out.values;
    if boundary == (0.0, 0.0) {
        // best multiple along the ray: minimizes c^p A / p - c F
        let a = sys.energy_density_sum(&u);
        let f: f64 = sys.load.iter().zip(&u).map(|(l, x)| l * x).sum();
        if a > 0.0 && f > 0.0 {
            let c = (f / a).powf(1.0 / (sys.p - 1.0));
            u.iter_mut().for_each(|x| *x *= c);
        }
    }
    u
}

/// How [`solve_dirichlet`] treats the principal-eigenvalue precondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checked {
    /// Compute lambda_1 of the level first and refuse when it is not positive.
    Yes,
    /// The caller guarantees lambda_1 > 0.
    No,
}

/// Dirichlet solve on `level` with boundary values and a nonnegative load.
pub fn solve_dirichlet(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    boundary: (f64, f64),
    f: Option<&Field>,
    cfg: &SolverConfig,
    checked: Checked,
) -> Result<SolveReport> {
    if boundary.0 < 0.0 || boundary.1 < 0.0 {
        return arg("boundary values must be nonnegative");
    }
    if let Some(f) = f {
        if f.values().iter().any(|&x| x < 0.0) {
            return arg("load must be nonnegative");
        }
    }
    if checked == Checked::Yes {
        let pot = potential_on(problem, grid)?;
        if pot.iter().any(|&v| v < 0.0) {
            let eig = crate::eigen::principal_eigenpair_on(problem, grid, cfg)?;
            if !(eig.lambda > 0.0) {
                return Err(Error::Precondition(format!(
                    "principal eigenvalue of the level is {} <= 0",
                    eig.lambda
                )));
            }
        }
    }
    solve_on_grid(problem, grid, boundary, f, None, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignClass {
    Solution,
    Supersolution,
    Subsolution,
    Neither,
}

/// Classifies a positive field by the sign of its weak residual. A node
/// passes with slack `tol * (sum of absolute flux, potential and rounding
/// contributions at the node)`, so `tol` is relative.
pub fn classify_sign(u: &Field, problem: &RadialProblem, tol: f64) -> Result<SignClass> {
    classify_sign_in(u, problem, tol, None)
}

/// As [`classify_sign`], restricted to interior nodes inside `window`.
pub fn classify_sign_in(
    u: &Field,
    problem: &RadialProblem,
    tol: f64,
    window: Option<&Interval>,
) -> Result<SignClass> {
    classify_sign_where(u, problem, tol, |r| window.is_none_or(|w| w.contains(r)))
}

/// As [`classify_sign`], restricted to interior nodes `r` with `keep(r)`.
pub fn classify_sign_where(
    u: &Field,
    problem: &RadialProblem,
    tol: f64,
    keep: impl Fn(f64) -> bool,
) -> Result<SignClass> {
    let grid = u.grid();
    let pot = potential_on(problem, grid)?;
    let sys = NodalSystem::new(grid, problem.p, pot);
    let res = sys.residual(u.values(), 0.0, 0.0);
    let mut sup = true;
    let mut sub = true;
    for i in 0..grid.len() {
        if grid.is_dirichlet(i) || !keep(grid.node(i)) {
            continue;
        }
        let slack = res.slack(i, tol);
        if res.r[i] < -slack {
            sup = false;
        }
        if res.r[i] > slack {
            sub = false;
        }
    }
    Ok(match (sup, sub) {
        (true, true) => SignClass::Solution,
        (true, false) => SignClass::Supersolution,
        (false, true) => SignClass::Subsolution,
        (false, false) => SignClass::Neither,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub holds: bool,
    pub max_violation: f64,
}

/// Weak comparison harness: checks the hypotheses on `(u1, u2)` and then
/// whether `u1 <= u2 + 1e-8` at every node.
pub fn wcp_check(
    u1: &Field,
    u2: &Field,
    problem: &RadialProblem,
    cfg: &SolverConfig,
) -> Result<ComparisonOutcome> {
    check_same_grid(u1, u2)?;
    let grid = u1.grid();
    let pot = potential_on(problem, grid)?;
    let sys = NodalSystem::new(grid, problem.p, pot.clone());
    let r1 = sys.residual(u1.values(), 0.0, 0.0);
    let r2 = sys.residual(u2.values(), 0.0, 0.0);
    let rel = cfg.tol_for(problem.p).max(1e-9) * 10.0;
    let mut failed = Vec::new();
    let mut ordered = true;
    let mut super2 = true;
    for i in 0..grid.len() {
        if grid.is_dirichlet(i) {
            continue;
        }
        let slack = r1.slack(i, rel) + r2.slack(i, rel);
        if r1.r[i] > r2.r[i] + slack {
            ordered = false;
        }
        if r2.r[i] < -r2.slack(i, rel) {
            super2 = false;
        }
    }
    if !ordered {
        failed.push("Q'(u1) <= Q'(u2)");
    }
    if !super2 {
        failed.push("Q'(u2) >= 0");
    }
    for i in dirichlet_nodes(grid) {
        if u1.values()[i] > u2.values()[i] {
            failed.push("u1 <= u2 on the boundary");
        }
        if u2.values()[i] < 0.0 {
            failed.push("u2 >= 0 on the boundary");
        }
    }
    if pot.iter().any(|&v| v < 0.0) {
        let eig = crate::eigen::principal_eigenpair_on(problem, grid, cfg)?;
        if !(eig.lambda > 0.0) {
            failed.push("lambda_1 > 0");
        }
    }
    if !failed.is_empty() {
        failed.dedup();
        return Err(Error::Precondition(format!(
            "comparison hypotheses fail: {}",
            failed.join(", ")
        )));
    }
    let max_violation = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(a, b)| (a - b).max(0.0))
        .fold(0.0, f64::max);
    Ok(ComparisonOutcome {
        holds: max_violation <= 1e-8,
        max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, PotentialSpec, Spacing};

    fn setup(
        p: f64,
        d: f64,
        lo: f64,
        hi: f64,
        n: usize,
        law: Spacing,
    ) -> (RadialProblem, Arc<Grid>) {
        let pr = RadialProblem::with_inner(
            p,
            d,
            Interval::new(lo, hi).unwrap(),
            crate::domain::InnerEnd::Boundary,
            PotentialSpec::Zero,
        )
        .unwrap();
        let g = Arc::new(build_grid(&pr, &pr.domain, n, law).unwrap());
        (pr, g)
    }

    #[test]
    fn residual_of_linear_and_constant() {
        let (pr, g) = setup(2.0, 1.0, 0.0, 1.0, 21, Spacing::Uniform);
        let u = Field::from_fn(g.clone(), |r| 3.0 * r - 1.0);
        let r = weak_residual(&u, None, &pr).unwrap();
        assert!(r.max_abs() < 1e-12);
        for p in [1.3, 2.0, 4.5] {
            let pr = RadialProblem {
                p,
                d: 3.0,
                ..pr.clone()
            };
            let c = Field::from_fn(g.clone(), |_| 2.5);
            assert_eq!(weak_residual(&c, None, &pr).unwrap().max_abs(), 0.0);
        }
        let pr3 = RadialProblem { p: 3.0, ..pr };
        let lin = Field::from_fn(g, |r| r);
        assert!(weak_residual(&lin, None, &pr3).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn textbook_poisson() {
        let (pr, g) = setup(2.0, 1.0, 0.0, 1.0, 201, Spacing::Uniform);
        let f = Field::from_fn(g.clone(), |_| 2.0);
        let rep = solve_dirichlet(
            &pr,
            &g,
            (0.0, 0.0),
            Some(&f),
            &SolverConfig::default(),
            Checked::No,
        )
        .unwrap();
        assert!(rep.converged);
        let u = &rep.solution;
        let mid = u.sample(0.5);
        assert!((mid - 0.25).abs() < 1e-4, "{mid}");
        for (&r, &v) in g.nodes().iter().zip(u.values()) {
            assert!((v - r * (1.0 - r)).abs() < 1e-4);
        }
    }

    #[test]
    fn radial_harmonic_3d() {
        let (pr, g) = setup(2.0, 3.0, 1.0, 2.0, 401, Spacing::Geometric);
        let rep = solve_dirichlet(
            &pr,
            &g,
            (1.0, 0.0),
            None,
            &SolverConfig::default(),
            Checked::No,
        )
        .unwrap();
        // geometric nodes make the discrete radial harmonic exact
        let u = rep.solution.sample(1.5);
        assert!((u - 1.0 / 3.0).abs() < 1e-5, "{u}");
    }

    #[test]
    fn p_harmonic_is_linear_in_1d() {
        for p in [1.5, 3.0, 5.0] {
            let (pr, g) = setup(p, 1.0, 0.0, 1.0, 41, Spacing::Uniform);
            let rep = solve_dirichlet(
                &pr,
                &g,
                (0.0, 1.0),
                None,
                &SolverConfig::default(),
                Checked::No,
            )
            .unwrap();
            assert!(rep.converged, "p = {p}: {}", rep.final_residual_norm);
            for (&r, &v) in g.nodes().iter().zip(rep.solution.values()) {
                assert!((v - r).abs() < 1e-8, "p = {p}");
            }
        }
    }

    #[test]
    fn classify_examples() {
        let (pr, g) = setup(2.0, 3.0, 1.0, 10.0, 200, Spacing::Geometric);
        let u = Field::from_fn(g.clone(), |r| 1.0 / r);
        assert_eq!(classify_sign(&u, &pr, 1e-9).unwrap(), SignClass::Solution);
        let one = Field::from_fn(g.clone(), |_| 1.0);
        for p in [1.5, 2.0, 3.0] {
            let pr = RadialProblem { p, ..pr.clone() };
            assert_eq!(classify_sign(&one, &pr, 0.0).unwrap(), SignClass::Solution);
        }
        let (pr1, g1) = setup(2.0, 1.0, 1.0, 10.0, 200, Spacing::Geometric);
        let cap = Field::from_fn(g1, |r| 2.0 - (r - 5.5).powi(2) / 25.0);
        assert_eq!(
            classify_sign(&cap, &pr1, 1e-9).unwrap(),
            SignClass::Supersolution
        );
        assert_eq!(
            classify_sign(&cap.scaled(-1.0), &pr1, 1e-9).unwrap(),
            SignClass::Subsolution
        );
    }

    #[test]
    fn wcp_rejects_bad_hypotheses() {
        let (pr, g) = setup(2.0, 1.0, 0.0, 1.0, 51, Spacing::Uniform);
        let lo = Field::from_fn(g.clone(), |r| r);
        let hi = Field::from_fn(g.clone(), |r| 0.5 * r);
        let e = wcp_check(&lo, &hi, &pr, &SolverConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Precondition(ref m) if m.contains("boundary")));
        let ok = wcp_check(&hi, &lo, &pr, &SolverConfig::default()).unwrap();
        assert!(ok.holds);
    }
}
