//! Variational minimal-growth certificates and the comparison principle
//! they unlock.
//!
//! For a positive solution `u` outside `Omega_2` the level-`N` certificate is
//!
//! ```text
//! mu_N = inf { int_{Omega_N \ Omega_2} L(w, u) : w >= 0, w = 0 on dOmega_N, int_B w^p = 1 },
//! L(w, u) = |w'|^p + (p-1) (w/u)^p |u'|^p - p (w/u)^(p-1) |u'|^(p-2) u' w',
//! ```
//!
//! and `mu_N -> 0` certifies that `u` has minimal growth at infinity. For
//! `p = 2`, `L(w, u) = u^2 |(w/u)'|^2` and `mu_N` is the smallest
//! generalized eigenvalue of that form against the mass on `B`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{
    CompactSetSpec, ExhaustionSchedule, Field, Grid, GridSpec, Interval, RadialProblem,
};
use crate::error::{arg, Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::solver::{classify_sign_where, ComparisonOutcome, SignClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    pub grid: GridSpec,
    /// Relative slack when checking that `u` solves the equation.
    pub solution_tol: f64,
    pub eig_rel_tol: f64,
    pub max_iter: usize,
    /// Projected-descent iterations for `p != 2`.
    pub descent_iter: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            grid: GridSpec::default(),
            solution_tol: 1e-6,
            eig_rel_tol: 1e-12,
            max_iter: 2000,
            descent_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    DecayingToZero,
    BoundedAway,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateRun {
    pub omega2: CompactSetSpec,
    pub b: Interval,
    pub levels: Vec<Interval>,
    /// Certificate infima (upper bounds from descent when `p != 2`).
    pub mu: Vec<f64>,
    /// `|int_B w_N^p - 1|` per level.
    pub normalization_errors: Vec<f64>,
    #[serde(skip)]
    pub minimizers: Vec<Field>,
    pub verdict: Trend,
}

/// The part of `level \ Omega_2` that contains `B`, with flags telling
/// which of its ends are free (on `dOmega_2` or at a free center).
fn region(
    problem: &RadialProblem,
    level: &Interval,
    omega2: &CompactSetSpec,
    b: &Interval,
) -> Result<(Interval, bool, bool)> {
    if b.lo > omega2.hi {
        if !(b.hi < level.hi) {
            return arg("B must lie inside every level");
        }
        Ok((
            Interval {
                lo: omega2.hi,
                hi: level.hi,
            },
            true,
            false,
        ))
    } else if b.hi < omega2.lo {
        if !(b.lo > level.lo || (b.lo == 0.0 && problem.free_inner(level.lo))) {
            return arg("B must lie inside every level");
        }
        Ok((
            Interval {
                lo: level.lo,
                hi: omega2.lo,
            },
            problem.free_inner(level.lo),
            true,
        ))
    } else {
        arg("B must lie outside the closure of Omega_2")
    }
}

fn region_grid(
    problem: &RadialProblem,
    iv: &Interval,
    b: &Interval,
    spec: &GridSpec,
) -> Result<Arc<Grid>> {
    let base = spec.level_grid(problem, iv)?;
    let mut nodes = base.nodes().to_vec();
    for x in [b.lo, b.hi] {
        if base.find(x).is_none() {
            nodes.push(x);
        }
    }
    nodes.sort_by(|a, c| a.partial_cmp(c).unwrap());
    nodes.dedup();
    Ok(Arc::new(Grid::from_nodes(
        nodes,
        problem.d,
        base.free_inner(),
    )?))
}

/// Mass of `B` lumped to the nodes.
fn b_mass(grid: &Grid, b: &Interval) -> Vec<f64> {
    let mut m = vec![0.0; grid.len()];
    for c in 0..grid.cells() {
        let (x0, x1) = (grid.node(c), grid.node(c + 1));
        if x0 >= b.lo * (1.0 - 1e-12) && x1 <= b.hi * (1.0 + 1e-12) {
            m[c] += 0.5 * grid.cell_measure(c);
            m[c + 1] += 0.5 * grid.cell_measure(c);
        }
    }
    m
}

struct Level {
    grid: Arc<Grid>,
    u: Vec<f64>,
    mass_b: Vec<f64>,
    fixed: Vec<bool>,
}

fn check_solution(
    problem: &RadialProblem,
    u: &Field,
    omega2: &CompactSetSpec,
    tol: f64,
) -> Result<()> {
    let g = u.grid();
    let outside = |r: f64| r < omega2.lo || r > omega2.hi;
    for i in 0..g.len() {
        if !g.is_dirichlet(i) && outside(g.node(i)) && !(u.values()[i] > 0.0) {
            return Err(Error::Precondition(
                "u must be positive outside Omega_2".into(),
            ));
        }
    }
    let sign = classify_sign_where(u, problem, tol, outside)?;
    if sign != SignClass::Solution {
        return Err(Error::Precondition(format!(
            "u is not a solution outside Omega_2 ({sign:?})"
        )));
    }
    Ok(())
}

/// Certificate infima `mu_N` along the exhaustion.
pub fn minimal_growth_certificate(
    problem: &RadialProblem,
    u: &Field,
    omega2: &CompactSetSpec,
    b: &Interval,
    exhaustion: &ExhaustionSchedule,
    opts: &CertificateOptions,
) -> Result<CertificateRun> {
    check_solution(problem, u, omega2, opts.solution_tol)?;
    let p = problem.p;
    let mut mu = Vec::new();
    let mut errs = Vec::new();
    let mut minimizers = Vec::new();
    let mut levels = Vec::new();
    for level in &exhaustion.levels {
        let (iv, free_lo, free_hi) = region(problem, level, omega2, b)?;
        let grid = region_grid(problem, &iv, b, &opts.grid)?;
        let uv: Vec<f64> = grid.nodes().iter().map(|&r| u.sample(r)).collect();
        let n = grid.len();
        let mut fixed = vec![false; n];
        fixed[0] = !free_lo;
        fixed[n - 1] = !free_hi;
        if (0..n).any(|i| !fixed[i] && !(uv[i] > 0.0)) {
            return Err(Error::Precondition(format!(
                "u is not positive on the certificate region ({}, {})",
                iv.lo, iv.hi
            )));
        }
        let lv = Level {
            mass_b: b_mass(&grid, b),
            grid,
            u: uv,
            fixed,
        };
        let (mut value, mut w) = quadratic_certificate(&lv, opts)?;
        if p != 2.0 {
            for c in 0..lv.grid.cells() {
                if lv.u[c + 1] == lv.u[c] {
                    return Err(Error::Precondition(
                        "u' vanishes on the certificate region".into(),
                    ));
                }
            }
            let mut starts = vec![w];
            if let Some(prev) = minimizers.last() {
                starts.push(
                    lv.grid
                        .nodes()
                        .iter()
                        .map(|&r| (prev as &Field).sample(r))
                        .collect(),
                );
            }
            (value, w) = descend(&lv, p, starts, opts);
        }
        let norm: f64 = (0..n).map(|i| lv.mass_b[i] * w[i].powf(p)).sum();
        errs.push((norm - 1.0).abs());
        mu.push(value);
        minimizers.push(Field::new(lv.grid.clone(), w)?);
        levels.push(*level);
    }
    let verdict = trend(&levels, &mu);
    Ok(CertificateRun {
        omega2: *omega2,
        b: *b,
        levels,
        mu,
        normalization_errors: errs,
        minimizers,
        verdict,
    })
}

fn trend(levels: &[Interval], mu: &[f64]) -> Trend {
    let n = mu.len();
    if n < 2 {
        return Trend::BoundedAway;
    }
    if mu[n - 1] <= 1e-3 * mu[0] {
        return Trend::DecayingToZero;
    }
    if n >= 3 && mu[n - 1] < mu[n - 2] && mu[n - 2] < mu[n - 3] {
        let ext = crate::criticality::extrapolate(levels, mu);
        if ext <= 0.1 * mu[n - 1] {
            return Trend::DecayingToZero;
        }
    }
    Trend::BoundedAway
}

/// `p = 2`: smallest eigenvalue of `A z = mu M_B z` with
/// `z' A z = sum (m_c / h_c^2) u_c u_{c+1} (z_{c+1} - z_c)^2` and
/// `M_B = diag(mass_B u^2)`, by inverse iteration; returns `w = u z`.
fn quadratic_certificate(lv: &Level, opts: &CertificateOptions) -> Result<(f64, Vec<f64>)> {
    let g = &lv.grid;
    let n = g.len();
    let u = &lv.u;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut coef = vec![0.0; g.cells()];
    for c in 0..g.cells() {
        let h = g.cell_width(c);
        let k = g.cell_measure(c) / (h * h) * u[c] * u[c + 1];
        coef[c] = k;
        diag[c] += k;
        diag[c + 1] += k;
        upper[c] -= k;
        lower[c + 1] -= k;
    }
    for i in 0..n {
        if lv.fixed[i] {
            diag[i] = 1.0;
            upper[i] = 0.0;
            lower[i] = 0.0;
            if i > 0 {
                upper[i - 1] = 0.0;
            }
            if i + 1 < n {
                lower[i + 1] = 0.0;
            }
        }
    }
    let mb: Vec<f64> = (0..n).map(|i| lv.mass_b[i] * u[i] * u[i]).collect();
    let form = |z: &[f64]| -> (f64, f64) {
        let a: f64 = (0..g.cells())
            .map(|c| coef[c] * (z[c + 1] - z[c]).powi(2))
            .sum();
        let m: f64 = (0..n).map(|i| mb[i] * z[i] * z[i]).sum();
        (a, m)
    };
    let mut z: Vec<f64> = (0..n)
        .map(|i| if lv.fixed[i] { 0.0 } else { 1.0 })
        .collect();
    let mut mu = f64::INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let rhs: Vec<f64> = (0..n)
            .map(|i| if lv.fixed[i] { 0.0 } else { mb[i] * z[i] })
            .collect();
        let next = solve_tridiagonal(&lower, &diag, &upper, &rhs)
            .ok_or_else(|| Error::NonConvergence("singular certificate form".into()))?;
        let (a, m) = form(&next);
        if !(m > 0.0) {
            return Err(Error::NonConvergence(
                "certificate iterate lost the mass on B".into(),
            ));
        }
        let s = m.sqrt().recip();
        z = next.iter().map(|x| x * s).collect();
        let new_mu = a / m;
        let done = (mu - new_mu).abs() <= opts.eig_rel_tol * new_mu.abs();
        mu = new_mu;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(
            "certificate inverse iteration did not converge".into(),
        ));
    }
    let w: Vec<f64> = z.iter().zip(u).map(|(z, u)| (z * u).max(0.0)).collect();
    Ok((mu, w))
}

/// `sum_c m_c L_c(w, u)` with its gradient and tridiagonal Hessian in `w`.
struct Lagrangian {
    value: f64,
    grad: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

fn lagrangian(lv: &Level, p: f64, w: &[f64]) -> Lagrangian {
    let g = &lv.grid;
    let u = &lv.u;
    let n = w.len();
    let mut out = Lagrangian {
        value: 0.0,
        grad: vec![0.0; n],
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    let pw = |x: f64, e: f64| if x > 0.0 { x.powf(e) } else { 0.0 };
    for c in 0..g.cells() {
        let h = g.cell_width(c);
        let m = g.cell_measure(c);
        let a = (w[c + 1] - w[c]) / h;
        let b = (u[c + 1] - u[c]) / h;
        let um = 0.5 * (u[c] + u[c + 1]);
        let t = 0.5 * (w[c] + w[c + 1]) / um;
        let bp = b.abs().powf(p);
        let gb = b.abs().powf(p - 2.0) * b;
        let aa = a.abs();
        // floors keep the Hessian finite where w or w' vanish
        let tf = t.max(1e-12 * (w[c].abs() + w[c + 1].abs()).max(1e-300) / um);
        let af = aa.max(1e-12 * t * b.abs()).max(1e-300);
        out.value += m * (aa.powf(p) + (p - 1.0) * pw(t, p) * bp - p * pw(t, p - 1.0) * a * gb);
        let l_a = p * aa.powf(p - 1.0) * a.signum() - p * pw(t, p - 1.0) * gb;
        let l_t = p * (p - 1.0) * (pw(t, p - 1.0) * bp - pw(t, p - 2.0) * a * gb);
        let l_aa = p * (p - 1.0) * af.powf(p - 2.0);
        let l_at = -p * (p - 1.0) * tf.powf(p - 2.0) * gb;
        let l_tt = p
            * (p - 1.0)
            * ((p - 1.0) * tf.powf(p - 2.0) * bp - (p - 2.0) * tf.powf(p - 3.0) * a * gb);
        let (da, dt) = ([-1.0 / h, 1.0 / h], [0.5 / um, 0.5 / um]);
        for j in 0..2 {
            out.grad[c + j] += m * (l_a * da[j] + l_t * dt[j]);
        }
        let hess = |i: usize, j: usize| {
            m * (l_aa * da[i] * da[j]
                + l_at * (da[i] * dt[j] + dt[i] * da[j])
                + l_tt * dt[i] * dt[j])
        };
        out.diag[c] += hess(0, 0);
        out.diag[c + 1] += hess(1, 1);
        out.upper[c] += hess(0, 1);
        out.lower[c + 1] += hess(1, 0);
    }
    out
}

/// Minimizes `sum L / int_B w^p` over `w >= 0` by projected damped Newton
/// steps on `L - mu int_B w^p`, starting from the best of `starts`.
fn descend(
    lv: &Level,
    p: f64,
    starts: Vec<Vec<f64>>,
    opts: &CertificateOptions,
) -> (f64, Vec<f64>) {
    let n = lv.u.len();
    let mass = |w: &[f64]| -> f64 { (0..n).map(|i| lv.mass_b[i] * w[i].max(0.0).powf(p)).sum() };
    let normalize = |w: &mut Vec<f64>| {
        let s = mass(w).powf(-1.0 / p);
        w.iter_mut().for_each(|x| *x *= s);
    };
    let ratio = |w: &[f64]| lagrangian(lv, p, w).value / mass(w);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mut w in starts {
        for i in 0..n {
            if lv.fixed[i] {
                w[i] = 0.0;
            }
            w[i] = w[i].max(0.0);
        }
        if !(mass(&w) > 0.0) {
            continue;
        }
        normalize(&mut w);
        let v = ratio(&w);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, w));
        }
    }
    let Some((mut value, mut w)) = best else {
        return (f64::INFINITY, vec![0.0; n]);
    };
    let mut shift = 1e-8;
    let mut stall = 0;
    for _ in 0..opts.descent_iter {
        let mut lg = lagrangian(lv, p, &w);
        let mu = value;
        let scale = lg.diag.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..n {
            let mw = lv.mass_b[i] * w[i].max(0.0).powf(p - 2.0);
            lg.grad[i] -= mu * p * mw * w[i];
            lg.diag[i] -= mu * p * (p - 1.0) * mw;
            if lv.fixed[i] {
                lg.grad[i] = 0.0;
                lg.diag[i] = 1.0;
                lg.upper[i] = 0.0;
                lg.lower[i] = 0.0;
                if i > 0 {
                    lg.upper[i - 1] = 0.0;
                }
                if i + 1 < n {
                    lg.lower[i + 1] = 0.0;
                }
            }
        }
        let mut improved = false;
        while shift < 1e6 {
            let diag: Vec<f64> = (0..n).map(|i| lg.diag[i] + shift * scale).collect();
            let rhs: Vec<f64> = lg.grad.iter().map(|g| -g).collect();
            let Some(step) = solve_tridiagonal(&lg.lower, &diag, &lg.upper, &rhs) else {
                shift *= 10.0;
                continue;
            };
            let mut alpha = 1.0;
            while alpha > 1e-6 {
                let mut trial: Vec<f64> =
                    (0..n).map(|i| (w[i] + alpha * step[i]).max(0.0)).collect();
                if mass(&trial) > 0.0 {
                    normalize(&mut trial);
                    let v = ratio(&trial);
                    if v < value {
                        let gain = value - v;
                        w = trial;
                        value = v;
                        improved = gain > 1e-13 * value.abs();
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if alpha > 1e-6 {
                shift = (shift * 0.1).max(1e-14);
                break;
            }
            shift *= 10.0;
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= 3 || shift >= 1e6 {
                break;
            }
        }
    }
    (value, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOptions {
    /// Relative slack for the sign classification of the two fields.
    pub sign_tol: f64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions { sign_tol: 1e-6 }
    }
}

/// Checks `u_sub <= v_super + 1e-8` outside `Omega_2` after verifying the
/// hypotheses of the comparison principle.
pub fn comparison_check(
    problem: &RadialProblem,
    u_sub: &Field,
    v_super: &Field,
    omega2: &CompactSetSpec,
    certificate: &CertificateRun,
    opts: &ComparisonOptions,
) -> Result<ComparisonOutcome> {
    if certificate.verdict != Trend::DecayingToZero {
        return Err(Error::Precondition(
            "the certificate of u_sub does not decay to zero".into(),
        ));
    }
    if certificate.omega2 != *omega2 {
        return arg("certificate was computed for a different Omega_2");
    }
    let outside = |r: f64| r < omega2.lo || r > omega2.hi;
    let mut failures = Vec::new();
    for (name, f, ok) in [
        (
            "u_sub",
            u_sub,
            [SignClass::Subsolution, SignClass::Solution],
        ),
        (
            "v_super",
            v_super,
            [SignClass::Supersolution, SignClass::Solution],
        ),
    ] {
        let g = f.grid();
        if (0..g.len()).any(|i| !g.is_dirichlet(i) && outside(g.node(i)) && !(f.values()[i] > 0.0))
        {
            failures.push(format!("{name} is not positive outside Omega_2"));
        }
        let s = classify_sign_where(f, problem, opts.sign_tol, outside)?;
        if !ok.contains(&s) {
            failures.push(format!("{name} is classified {s:?}"));
        }
    }
    for x in [omega2.lo, omega2.hi] {
        let on_boundary = x > problem.domain.lo || (x == 0.0 && !problem.free_inner(0.0));
        if on_boundary
            && !(x == 0.0 && problem.free_inner(0.0))
            && u_sub.sample(x) > v_super.sample(x) + 1e-8
        {
            failures.push(format!("u_sub > v_super on the boundary point {x}"));
        }
    }
    if !failures.is_empty() {
        return Err(Error::Precondition(failures.join("; ")));
    }
    let vi = v_super.grid().interval();
    let g = u_sub.grid();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..g.len() {
        let r = g.node(i);
        if !outside(r) || r < vi.lo || r > vi.hi {
            continue;
        }
        worst = worst.max(u_sub.values()[i] - v_super.sample(r));
    }
    let max_violation = worst.max(0.0);
    Ok(ComparisonOutcome {
        holds: max_violation <= 1e-8,
        max_violation,
    })
}
