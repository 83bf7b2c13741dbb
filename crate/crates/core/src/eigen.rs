//! Principal eigenpairs by inverse power iteration.
//!
//! Each step solves `Q'_{V+c}(u_{k+1}) = w |u_k|^(p-2) u_k` with the Dirichlet
//! solver, normalizes in the weighted `L^p` norm and reads the eigenvalue
//! off the Rayleigh quotient. The weight `w` is 1 for the ordinary problem;
//! a compactly supported `w` gives the threshold problem used by the
//! criticality module.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{Field, Grid, RadialProblem};
use crate::error::{Error, Result};
use crate::solver::{potential_on, NodalSystem, SolverConfig};

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    /// Positive in the interior, zero on Dirichlet nodes, `sum M |phi|^p w = 1`.
    pub eigenfunction: Field,
    pub iterations: usize,
    pub converged: bool,
    /// Constant added to the potential during the iteration (already subtracted from `lambda`).
    pub shift: f64,
    /// Rayleigh quotients of the iterates.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            rel_tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Discrete Rayleigh quotient `(sum m|s|^p + sum M V |u|^p) / sum M w |u|^p`.
pub(crate) fn rayleigh(
    grid: &Grid,
    p: f64,
    pot: &[f64],
    weight: &[f64],
    u: &[f64],
) -> (f64, f64, f64) {
    let mut grad = 0.0;
    for c in 0..grid.cells() {
        let s = (u[c + 1] - u[c]) / grid.cell_width(c);
        grad += grid.cell_measure(c) * s.abs().powf(p);
    }
    let mut potl = 0.0;
    let mut mass = 0.0;
    for i in 0..grid.len() {
        let a = u[i].abs().powf(p) * grid.node_mass(i);
        if pot[i] != 0.0 {
            potl += pot[i] * a;
        }
        mass += weight[i] * a;
    }
    ((grad + potl) / mass, grad + potl, mass)
}

fn start_vector(grid: &Grid, weight: &[f64]) -> Vec<f64> {
    let iv = grid.interval();
    let n = grid.len();
    let mut u: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| {
            let x = (r - iv.lo) / iv.length();
            if grid.free_inner() {
                (0.5 * std::f64::consts::PI * x).cos()
            } else {
                (std::f64::consts::PI * x).sin()
            }
        })
        .collect();
    // concentrate near the weight when it is not uniform
    if weight.contains(&0.0) {
        let wmax = weight.iter().cloned().fold(0.0, f64::max);
        for i in 0..n {
            u[i] *= 0.1 + weight[i] / wmax;
        }
    }
    u[n - 1] = 0.0;
    if !grid.free_inner() {
        u[0] = 0.0;
    }
    u
}

/// Inverse iteration for `Q'_{V+shift}(u) = mu w |u|^(p-2) u`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn inverse_iteration(
    grid: &Arc<Grid>,
    p: f64,
    pot: &[f64],
    weight: &[f64],
    shift: f64,
    init: Option<&[f64]>,
    cfg: &SolverConfig,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = grid.len();
    let shifted: Vec<f64> = pot.iter().map(|v| v + shift).collect();
    let mut sys = NodalSystem::new(grid, p, shifted.clone());
    let mut u = match init {
        Some(u0) => {
            // a warm start may vanish on part of the grid, where the p > 2
            // operator degenerates; lift it by a small positive profile
            let base = start_vector(grid, weight);
            let top = u0.iter().fold(0.0f64, |m, x| m.max(*x));
            let bmax = base.iter().fold(0.0f64, |m, x| m.max(*x));
            u0.iter()
                .zip(&base)
                .map(|(a, b)| a.max(0.0) + 1e-3 * top / bmax * b)
                .collect()
        }
        None => start_vector(grid, weight),
    };
    let normalize = |u: &mut Vec<f64>| -> f64 {
        let (_, _, mass) = rayleigh(grid, p, &shifted, weight, u);
        let s = mass.powf(-1.0 / p);
        u.iter_mut().for_each(|x| *x *= s);
        s
    };
    normalize(&mut u);
    let (mut lam_s, _, _) = rayleigh(grid, p, &shifted, weight, &u);
    let mut history = vec![lam_s - shift];
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        sys.load = (0..n)
            .map(|i| grid.node_mass(i) * weight[i] * u[i].abs().powf(p - 2.0) * u[i])
            .collect();
        if p < 2.0 {
            // |u|^(p-2) u at zero nodes
            for i in 0..n {
                if u[i] == 0.0 {
                    sys.load[i] = 0.0;
                }
            }
        }
        let warm_scale = if lam_s > 0.0 {
            lam_s.powf(-1.0 / (p - 1.0))
        } else {
            1.0
        };
        let warm: Vec<f64> = u.iter().map(|x| x * warm_scale).collect();
        let out = sys.solve(warm, cfg, true);
        if !out.converged || !out.values.iter().all(|x| x.is_finite()) {
            return Err(Error::NonConvergence(format!(
                "inverse iteration step {iterations} stopped at residual {:.3e}",
                out.residual
            )));
        }
        let mut next = out.values;
        let umax = next.iter().cloned().fold(0.0, f64::max);
        if !(umax > 0.0) || next.iter().any(|&x| x < -1e-9 * umax) {
            return Err(Error::NonConvergence(
                "inverse iteration produced a sign-changing iterate".into(),
            ));
        }
        normalize(&mut next);
        let (lam_next, _, _) = rayleigh(grid, p, &shifted, weight, &next);
        u = next;
        let change = (lam_next - lam_s).abs();
        lam_s = lam_next;
        history.push(lam_s - shift);
        if change <= opts.rel_tol * lam_s.abs() {
            converged = true;
            break;
        }
    }
    for x in u.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(EigenResult {
        lambda: lam_s - shift,
        eigenfunction: Field::new(grid.clone(), u)?,
        iterations,
        converged,
        shift,
        history,
    })
}

/// Principal eigenpair of `Q'_V(u) = lambda |u|^(p-2) u` on `grid`.
pub fn principal_eigenpair(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let pot = potential_on(problem, grid)?;
    let ones = vec![1.0; grid.len()];
    let vmin = free_min(grid, &pot);
    if vmin >= 0.0 {
        return inverse_iteration(grid, problem.p, &pot, &ones, 0.0, None, cfg, opts);
    }
    // Try without shift (works whenever lambda_1 > 0), then shift V above zero.
    if let Ok(r) = inverse_iteration(grid, problem.p, &pot, &ones, 0.0, None, cfg, opts) {
        if r.converged && r.lambda > 0.0 {
            return Ok(r);
        }
    }
    let shift = -vmin * 1.05 + 1e-12;
    inverse_iteration(grid, problem.p, &pot, &ones, shift, None, cfg, opts)
}

pub(crate) fn principal_eigenpair_on(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<EigenResult> {
    principal_eigenpair(problem, grid, cfg, &EigenOptions::default())
}

fn free_min(grid: &Grid, pot: &[f64]) -> f64 {
    (0..grid.len())
        .filter(|&i| !grid.is_dirichlet(i))
        .map(|i| pot[i])
        .fold(f64::INFINITY, f64::min)
}
