//! Q-capacity of a compact set relative to a level,
//!
//! ```text
//! Cap_Q(K, Omega_N) = inf { Q_V(u) : u in C_c(Omega_N), u >= 1 on K }.
//! ```
//!
//! The obstacle constraint is handled by an active set: nodes of `K` start
//! pinned at 1, the rest is solved for `Q'_V(u) = 0`, and pinned nodes whose
//! multiplier `Q'_V(u)_i` is negative are released until the KKT conditions
//! hold.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{
    CompactSetSpec, ExhaustionSchedule, Field, Grid, GridSpec, Interval, RadialProblem,
};
use crate::eigen::principal_eigenpair_on;
use crate::energy::{energy_q, Support};
use crate::error::{arg, Error, Result};
use crate::solver::{potential_on, NodalSystem, SolverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub level: Interval,
    pub value: f64,
    #[serde(skip)]
    pub minimizer: Field,
    /// Nodes of `K` pinned at 1 in the final active set.
    pub active_nodes: usize,
    /// Nodes of `K` inside the grid.
    pub set_nodes: usize,
    /// Smallest multiplier over the active set, relative to the local scale.
    pub min_multiplier: f64,
    /// Final relative residual on the free nodes.
    pub residual: f64,
    pub converged: bool,
}

const KKT_TOL: f64 = 1e-8;

/// Level grid with the endpoints of `K` inserted as nodes.
fn grid_with_set(
    problem: &RadialProblem,
    level: &Interval,
    k: &CompactSetSpec,
    spec: &GridSpec,
) -> Result<Arc<Grid>> {
    let grid = spec.level_grid(problem, level)?;
    let mut nodes = grid.nodes().to_vec();
    let mut changed = false;
    for x in [k.lo, k.hi] {
        if grid.find(x).is_none() {
            nodes.push(x);
            changed = true;
        }
    }
    if !changed {
        return Ok(Arc::new(grid));
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();
    Ok(Arc::new(Grid::from_nodes(
        nodes,
        problem.d,
        grid.free_inner(),
    )?))
}

/// Capacity of `K` relative to one level.
pub fn q_capacity(
    problem: &RadialProblem,
    k: &CompactSetSpec,
    level: &Interval,
    spec: &GridSpec,
    cfg: &SolverConfig,
) -> Result<CapacityReport> {
    k.check_inside(problem, level)?;
    let grid = grid_with_set(problem, level, k, spec)?;
    let pot = potential_on(problem, &grid)?;
    if pot.iter().any(|&v| v < 0.0) {
        let eig = principal_eigenpair_on(problem, &grid, cfg)?;
        if eig.lambda <= 0.0 {
            return Err(Error::Precondition(format!(
                "Q_V is not positive on the level: lambda_1 = {}",
                eig.lambda
            )));
        }
    }
    let set = k.as_interval();
    let in_set: Vec<usize> = grid.indices_in(&set).collect();
    if in_set.is_empty() {
        return arg("compact set contains no grid node");
    }
    let mut sys = NodalSystem::new(&grid, problem.p, pot);
    for &i in &in_set {
        sys.fixed[i] = Some(1.0);
    }
    // start: 1 on K, linear decay to the level boundary
    let init: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| {
            if r < set.lo {
                if grid.free_inner() {
                    1.0
                } else {
                    (r - level.lo) / (set.lo - level.lo)
                }
            } else if r > set.hi {
                (level.hi - r) / (level.hi - set.hi)
            } else {
                1.0
            }
        })
        .collect();
    let mut u = init;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut min_mult = f64::INFINITY;
    for _ in 0..=in_set.len() {
        let out = sys.solve(u.clone(), cfg, false);
        u = out.values;
        residual = out.residual;
        let res = sys.residual(&u, 0.0, 0.0);
        min_mult = f64::INFINITY;
        let mut release = Vec::new();
        for &i in &in_set {
            if sys.fixed[i].is_some() {
                let m =
                    res.r[i] / (res.local_scale[i] + res.noise[i] / KKT_TOL).max(f64::MIN_POSITIVE);
                min_mult = min_mult.min(m);
                if m < -KKT_TOL {
                    release.push(i);
                }
            }
        }
        let mut repin = Vec::new();
        for &i in &in_set {
            if sys.fixed[i].is_none() && u[i] < 1.0 - KKT_TOL {
                repin.push(i);
            }
        }
        if release.is_empty() && repin.is_empty() {
            converged = out.converged;
            break;
        }
        for i in release {
            sys.fixed[i] = None;
        }
        for i in repin {
            sys.fixed[i] = Some(1.0);
            u[i] = 1.0;
        }
    }
    let active_nodes = in_set.iter().filter(|&&i| sys.fixed[i].is_some()).count();
    let minimizer = Field::new(grid.clone(), u)?;
    let value = energy_q(&minimizer, problem, Support::Compact)?.total;
    Ok(CapacityReport {
        level: *level,
        value,
        minimizer,
        active_nodes,
        set_nodes: in_set.len(),
        min_multiplier: if min_mult.is_finite() { min_mult } else { 0.0 },
        residual,
        converged,
    })
}

/// Capacities along an exhaustion, skipping levels that do not contain `K`
/// strictly inside.
pub fn capacity_sequence(
    problem: &RadialProblem,
    k: &CompactSetSpec,
    exhaustion: &ExhaustionSchedule,
    spec: &GridSpec,
    cfg: &SolverConfig,
) -> Result<Vec<CapacityReport>> {
    let mut out = Vec::new();
    for level in &exhaustion.levels {
        if k.check_inside(problem, level).is_err() {
            continue;
        }
        out.push(q_capacity(problem, k, level, spec, cfg)?);
    }
    if out.is_empty() {
        return arg("no level contains the compact set");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PotentialSpec;

    #[test]
    fn unit_ball_in_three_dimensions() {
        let pr = RadialProblem::new(
            2.0,
            3.0,
            Interval::new(0.0, f64::INFINITY).unwrap(),
            PotentialSpec::Zero,
        )
        .unwrap();
        let k = CompactSetSpec::new(0.0, 1.0).unwrap();
        for r in [2.0, 8.0, 64.0] {
            let c = q_capacity(
                &pr,
                &k,
                &Interval::new(0.0, r).unwrap(),
                &GridSpec::default(),
                &SolverConfig::default(),
            )
            .unwrap();
            // (1/2) int_1^R |u'|^2 r^2 dr with u = (1/r - 1/R) / (1 - 1/R)
            let exact = 0.5 / (1.0 - 1.0 / r);
            assert!(
                (c.value - exact).abs() < 1e-3 * exact,
                "R = {r}: {} vs {exact}",
                c.value
            );
            assert!(c.converged && c.min_multiplier >= -KKT_TOL);
        }
    }

    #[test]
    fn negative_potential_inside_set_releases_nodes() {
        // V < 0 on K pushes the minimizer above 1 there
        let pr = RadialProblem::new(
            2.0,
            1.0,
            Interval::new(0.0, f64::INFINITY).unwrap(),
            PotentialSpec::Bump {
                center: 0.5,
                radius: 0.4,
                height: -0.3,
            },
        )
        .unwrap();
        let k = CompactSetSpec::new(0.0, 1.0).unwrap();
        let c = q_capacity(
            &pr,
            &k,
            &Interval::new(0.0, 2.0).unwrap(),
            &GridSpec::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(c.converged);
        assert!(c.active_nodes < c.set_nodes);
        assert!(c.min_multiplier >= -KKT_TOL);
        let u = c.minimizer.values();
        assert!(u
            .iter()
            .zip(c.minimizer.grid().nodes())
            .all(|(&x, &r)| r > 1.0 || x >= 1.0 - 1e-9));
    }
}
