//! Energy functional, Picone Lagrangian, simplified energy, the vector
//! inequality ratio and the Poincare-type residual.
//!
//! Gradient terms are integrated cellwise: slopes of piecewise-linear
//! fields are constant on a cell, and the radial weight is integrated
//! exactly. Potential terms use the lumped trapezoid rule. The Picone
//! density is evaluated with cell-midpoint values of `u` and `v`, which
//! keeps it nonnegative cell by cell.

use serde::Serialize;

use crate::domain::{Field, PotentialSpec, RadialProblem};
use crate::error::{arg, Error, Result};
use crate::solver::check_same_grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `int |u'|^p r^(d-1)`
    pub gradient_term: f64,
    /// `int V |u|^p r^(d-1)`
    pub potential_term: f64,
    /// `(gradient_term + potential_term) / p`
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `u` must vanish at the Dirichlet ends of its grid.
    Compact,
    /// Any boundary values.
    Free,
}

pub fn energy_q(u: &Field, problem: &RadialProblem, support: Support) -> Result<EnergyBreakdown> {
    if support == Support::Compact && !u.is_compactly_supported() {
        return arg("field is not compactly supported; use Support::Free");
    }
    let g = u.grid();
    let p = problem.p;
    let x = u.values();
    let mut grad = 0.0;
    for c in 0..g.cells() {
        let s = (x[c + 1] - x[c]) / g.cell_width(c);
        grad += g.cell_measure(c) * s.abs().powf(p);
    }
    let mut pot = 0.0;
    if !problem.potential.is_zero() {
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let r = g.node(i);
            let v = problem.potential.eval(r);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "potential is not finite at r = {r}"
                )));
            }
            pot += g.node_mass(i) * v * xi.abs().powf(p);
        }
    }
    Ok(EnergyBreakdown {
        gradient_term: grad,
        potential_term: pot,
        total: (grad + pot) / p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianField {
    /// Density per cell.
    pub cells: Vec<f64>,
    /// `sum_c m_c * density_c`
    pub total: f64,
}

/// Picone density for one cell from midpoint values `(u, v)` and slopes `(a, b)`.
#[inline]
pub fn picone_cell(u: f64, v: f64, a: f64, b: f64, p: f64) -> f64 {
    let t = u / v;
    let bb = b.abs();
    let tp1 = if t == 0.0 { 0.0 } else { t.powf(p - 1.0) };
    let gb = if b == 0.0 { 0.0 } else { bb.powf(p - 2.0) * b };
    (a.abs().powf(p) + (p - 1.0) * tp1 * t * bb.powf(p) - p * tp1 * a * gb) / p
}

fn check_positive_pair(u: &Field, v: &Field) -> Result<()> {
    check_same_grid(u, v)?;
    if v.values().iter().any(|&x| !(x > 0.0)) {
        return arg("v must be strictly positive at every node");
    }
    if u.values().iter().any(|&x| x < 0.0) {
        return arg("u must be nonnegative");
    }
    Ok(())
}

pub fn picone_density(u: &Field, v: &Field, p: f64) -> Result<LagrangianField> {
    check_positive_pair(u, v)?;
    let g = u.grid();
    let (x, y) = (u.values(), v.values());
    let mut cells = Vec::with_capacity(g.cells());
    let mut total = 0.0;
    for c in 0..g.cells() {
        let h = g.cell_width(c);
        let l = picone_cell(
            0.5 * (x[c] + x[c + 1]),
            0.5 * (y[c] + y[c + 1]),
            (x[c + 1] - x[c]) / h,
            (y[c + 1] - y[c]) / h,
            p,
        );
        total += g.cell_measure(c) * l;
        cells.push(l);
    }
    Ok(LagrangianField { cells, total })
}

/// `Q(u) - int L(u, v)`; vanishes under refinement when `v` solves
/// `Q'(v) = 0` and is asymptotically nonpositive for subsolutions.
pub fn picone_gap(u: &Field, v: &Field, problem: &RadialProblem) -> Result<f64> {
    let l = picone_density(u, v, problem.p)?;
    let q = energy_q(u, problem, Support::Compact)?;
    Ok(q.total - l.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplifiedEnergy {
    /// `int v^2 |w'|^2 (w|v'| + v|w'|)^(p-2)`
    pub universal: f64,
    /// `int (v^p |w'|^p + v^2 |v'|^(p-2) w^(p-2) |w'|^2)`, only for `p >= 2`.
    pub split: Option<f64>,
}

pub fn simplified_energy(
    v: &Field,
    w: &Field,
    problem: &RadialProblem,
) -> Result<SimplifiedEnergy> {
    check_positive_pair(w, v)?;
    let g = v.grid();
    let p = problem.p;
    let (x, y) = (w.values(), v.values());
    let mut uni = 0.0;
    let mut split = 0.0;
    for c in 0..g.cells() {
        let h = g.cell_width(c);
        let wm = 0.5 * (x[c] + x[c + 1]);
        let vm = 0.5 * (y[c] + y[c + 1]);
        let dw = ((x[c + 1] - x[c]) / h).abs();
        let dv = ((y[c + 1] - y[c]) / h).abs();
        let m = g.cell_measure(c);
        if dw > 0.0 {
            uni += m * vm * vm * dw * dw * (wm * dv + vm * dw).powf(p - 2.0);
        }
        if p >= 2.0 {
            let cross = if dw > 0.0 {
                vm * vm * dv.powf(p - 2.0) * wm.powf(p - 2.0) * dw * dw
            } else {
                0.0
            };
            split += m * (vm.powf(p) * dw.powf(p) + cross);
        }
    }
    Ok(SimplifiedEnergy {
        universal: uni,
        split: (p >= 2.0).then_some(split),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VectorRatio {
    pub ratio: f64,
    /// Set when `b = 0`; the ratio is then 1 by convention.
    pub degenerate: bool,
}

/// `(|a+b|^p - |a|^p - p|a|^(p-2) a.b) / (|b|^2 (|a|+|b|)^(p-2))`.
pub fn vector_inequality_ratio(a: &[f64], b: &[f64], p: f64) -> Result<VectorRatio> {
    if a.len() != b.len() {
        return arg("vectors must have the same length");
    }
    if !(p > 1.0) {
        return arg("p must exceed 1");
    }
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 == 0.0 && nb2 == 0.0 {
        return arg("a and b cannot both vanish");
    }
    if nb2 == 0.0 {
        return Ok(VectorRatio {
            ratio: 1.0,
            degenerate: true,
        });
    }
    let (na, nb) = (na2.sqrt(), nb2.sqrt());
    let denom = nb2 * (na + nb).powf(p - 2.0);
    if na2 == 0.0 {
        return Ok(VectorRatio {
            ratio: nb.powf(p) / denom,
            degenerate: false,
        });
    }
    // |a|^p [ (1+y)^q - 1 - q y + q |b|^2/|a|^2 ],  y = (2 a.b + |b|^2)/|a|^2,  q = p/2
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let q = 0.5 * p;
    let y = (2.0 * ab + nb2) / na2;
    let num = na.powf(p) * (pow_remainder(y, q) + q * nb2 / na2);
    Ok(VectorRatio {
        ratio: num / denom,
        degenerate: false,
    })
}

/// `(1+y)^q - 1 - q y` without cancellation for small `y`.
fn pow_remainder(y: f64, q: f64) -> f64 {
    if y.abs() < 1e-2 {
        let mut term = q * (q - 1.0) / 2.0 * y * y;
        let mut sum = term;
        for k in 3..40 {
            term *= (q - (k - 1) as f64) / k as f64 * y;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        ((q * (y).ln_1p()).exp_m1()) - q * y
    }
}

/// Empirical envelope `[min, max]` of the ratio over a sample of pairs.
pub fn ratio_envelope<'a>(
    pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
    p: f64,
) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in pairs {
        let r = vector_inequality_ratio(a, b, p)?.ratio;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// `Q(u) + C |int psi u|^p - C^{-1} int W |u|^p`.
pub fn poincare_residual(
    u: &Field,
    v_ground: &Field,
    weight: &PotentialSpec,
    psi: &Field,
    c: f64,
    problem: &RadialProblem,
) -> Result<f64> {
    check_same_grid(u, v_ground)?;
    check_same_grid(u, psi)?;
    if !(c > 0.0) {
        return arg("constant C must be positive");
    }
    let g = u.grid();
    let pairing = |f: &Field| -> f64 {
        (0..g.len())
            .map(|i| g.node_mass(i) * psi.values()[i] * f.values()[i])
            .sum()
    };
    let pv = pairing(v_ground);
    if pv.abs() <= 1e-14 * (psi.max_abs() * v_ground.max_abs()).max(1e-300) {
        return arg("psi is orthogonal to the ground state");
    }
    let q = energy_q(u, problem, Support::Compact)?.total;
    let pu = pairing(u).abs().powf(problem.p);
    let wu: f64 = (0..g.len())
        .map(|i| g.node_mass(i) * weight.eval(g.node(i)) * u.values()[i].abs().powf(problem.p))
        .sum();
    Ok(q + c * pu - wu / c)
}
