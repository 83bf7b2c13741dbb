//! Criticality verdicts from exhaustions.
//!
//! On each level `Omega_N` the threshold `t_N` is the largest `t` with
//! `Q_{V - tW} >= 0`, equivalently the principal eigenvalue of the weighted
//! problem `Q'_V(v) = t W |v|^(p-2) v`, which is what the inverse iteration
//! computes. The corresponding eigenfunction `v_N`, normalized by
//! `v_N(x0) = 1`, is a ground state of `Q_{V - t_N W}` on `Omega_N`, and the
//! sequence `(v_N)` is a null sequence when `t_N -> 0`.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{
    embed, ExhaustionSchedule, Field, Grid, GridSpec, Interval, PotentialSpec, RadialProblem,
};
use crate::eigen::{inverse_iteration, principal_eigenpair, rayleigh, EigenOptions};
use crate::energy::{energy_q, Support};
use crate::error::{arg, Error, Result};
use crate::solver::{classify_sign_where, potential_on, SignClass, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalityOptions {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub eigen: EigenOptions,
    /// Absolute threshold below which `t_N` counts as zero.
    pub eps_crit: f64,
    /// Relative change over the last three levels that counts as a plateau.
    pub plateau_rel: f64,
    /// Critical when the extrapolated limit is below this fraction of `t_N`.
    pub extrapolation_rel: f64,
}

impl Default for CriticalityOptions {
    fn default() -> Self {
        CriticalityOptions {
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            eigen: EigenOptions {
                rel_tol: 1e-10,
                max_iter: 500,
            },
            eps_crit: 1e-4,
            plateau_rel: 0.01,
            extrapolation_rel: 0.1,
        }
    }
}

/// Smooth bump of height 1 on the middle third of the first level.
pub fn default_probe(exhaustion: &ExhaustionSchedule) -> PotentialSpec {
    let l = exhaustion.levels[0];
    PotentialSpec::Bump {
        center: 0.5 * (l.lo + l.hi),
        radius: l.length() / 6.0,
        height: 1.0,
    }
}

#[derive(Debug, Clone)]
pub struct Threshold {
    pub t: f64,
    /// Ground state of `Q_{V - tW}` on the level, `v(x0) = 1`.
    pub ground_state: Field,
    pub iterations: usize,
    pub converged: bool,
}

fn nonnegative_form_check(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<()> {
    let pot = potential_on(problem, grid)?;
    if pot.iter().all(|&v| v >= 0.0) {
        return Ok(());
    }
    // lambda_1 of a critical level is zero up to rounding; when the
    // eigensolver itself struggles (lambda_1 close to zero on a large level)
    // the sign of the weighted threshold decides instead
    if let Ok(eig) = principal_eigenpair(problem, grid, cfg, &EigenOptions::default()) {
        let scale = pot.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if eig.converged && eig.lambda < -1e-10 * scale {
            return Err(Error::Precondition(format!(
                "Q_V is not nonnegative on the level: lambda_1 = {}",
                eig.lambda
            )));
        }
    }
    Ok(())
}

fn probe_weights(probe: &PotentialSpec, grid: &Grid) -> Result<Vec<f64>> {
    let w: Vec<f64> = grid.nodes().iter().map(|&r| probe.eval(r)).collect();
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return arg("probe must be finite and nonnegative");
    }
    if (0..grid.len()).all(|i| grid.is_dirichlet(i) || w[i] == 0.0) {
        return arg("probe vanishes on the level");
    }
    Ok(w)
}

/// Threshold `t_N` on one level grid.
pub fn threshold_tn(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    probe: &PotentialSpec,
    x0: f64,
    init: Option<&Field>,
    opts: &CriticalityOptions,
) -> Result<Threshold> {
    nonnegative_form_check(problem, grid, &opts.solver)?;
    let w = probe_weights(probe, grid)?;
    let pot = potential_on(problem, grid)?;
    let start = init.map(|f| embed_or_sample(f, grid));
    let res = inverse_iteration(
        grid,
        problem.p,
        &pot,
        &w,
        0.0,
        start.as_deref(),
        &opts.solver,
        &opts.eigen,
    )?;
    let mut v = res.eigenfunction.into_values();
    let (t, _, _) = rayleigh(grid, problem.p, &pot, &w, &v);
    if t < 0.0 {
        return Err(Error::Precondition(format!(
            "Q_V is not nonnegative on the level: t = {t}"
        )));
    }
    let k = grid.nearest(x0);
    let s = v[k];
    if !(s > 0.0) {
        return Err(Error::NonConvergence("ground state vanishes at x0".into()));
    }
    v.iter_mut().for_each(|x| *x /= s);
    Ok(Threshold {
        t,
        ground_state: Field::new(grid.clone(), v)?,
        iterations: res.iterations,
        converged: res.converged,
    })
}

fn embed_or_sample(f: &Field, grid: &Arc<Grid>) -> Vec<f64> {
    match embed(f, grid) {
        Ok(e) => e.into_values(),
        Err(_) => grid.nodes().iter().map(|&r| f.sample(r)).collect(),
    }
}

/// Threshold by bisection on the sign of `lambda_1(V - tW)`; slower, used to
/// cross-check [`threshold_tn`].
pub fn threshold_bisection(
    problem: &RadialProblem,
    grid: &Arc<Grid>,
    probe: &PotentialSpec,
    abs_tol: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let lambda = |t: f64| -> Result<f64> {
        let pr = problem.with_potential(problem.potential.minus(t, probe));
        Ok(principal_eigenpair(&pr, grid, cfg, &EigenOptions::default())?.lambda)
    };
    if lambda(0.0)? < 0.0 {
        return Err(Error::Precondition(
            "Q_V is not nonnegative on the level".into(),
        ));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while lambda(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NonConvergence("no sign change of lambda_1".into()));
        }
    }
    while hi - lo > abs_tol {
        let mid = 0.5 * (lo + hi);
        if lambda(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone)]
pub struct NullSequenceEntry {
    pub level: Interval,
    pub t: f64,
    pub v: Field,
    /// `Q_V(v_N)`
    pub energy: f64,
    /// `(t_N/p) int W |v_N|^p`
    pub weighted: f64,
    /// `int_B |v_N|^p` over the first level.
    pub window_mass: f64,
}

#[derive(Debug, Clone)]
pub struct NullSequence {
    pub entries: Vec<NullSequenceEntry>,
    /// Level index and message of the first failing level, if any.
    pub failure: Option<(usize, String)>,
}

pub fn null_sequence(
    problem: &RadialProblem,
    exhaustion: &ExhaustionSchedule,
    probe: &PotentialSpec,
    opts: &CriticalityOptions,
) -> Result<NullSequence> {
    let window = exhaustion.levels[0];
    let mut entries: Vec<NullSequenceEntry> = Vec::new();
    let mut failure = None;
    for (n, level) in exhaustion.levels.iter().enumerate() {
        let step = (|| -> Result<NullSequenceEntry> {
            let grid = Arc::new(opts.grid.level_grid(problem, level)?);
            let prev = entries.last().map(|e| &e.v);
            let th = threshold_tn(problem, &grid, probe, exhaustion.x0, prev, opts)?;
            if !th.converged {
                return Err(Error::NonConvergence(format!(
                    "threshold iteration on level {n}"
                )));
            }
            let v = th.ground_state;
            let energy = energy_q(&v, problem, Support::Compact)?.total;
            let g = v.grid();
            let p = problem.p;
            let wint: f64 = (0..g.len())
                .map(|i| g.node_mass(i) * probe.eval(g.node(i)) * v.values()[i].abs().powf(p))
                .sum();
            let window_mass = g
                .indices_in(&window)
                .map(|i| g.node_mass(i) * v.values()[i].abs().powf(p))
                .sum();
            Ok(NullSequenceEntry {
                level: *level,
                t: th.t,
                weighted: th.t / p * wint,
                energy,
                v,
                window_mass,
            })
        })();
        match step {
            Ok(e) => entries.push(e),
            Err(Error::Precondition(m)) if entries.is_empty() => {
                return Err(Error::Precondition(m))
            }
            Err(e) => {
                failure = Some((n, e.to_string()));
                break;
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::NonConvergence(
            failure.map(|f| f.1).unwrap_or_else(|| "no levels".into()),
        ));
    }
    Ok(NullSequence { entries, failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Critical,
    Subcritical,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityWeight {
    /// `t* W / 2`
    pub weight: PotentialSpec,
    pub t_star: f64,
    /// `inf Q_{V - weight}(u) / ((1/p) int probe |u|^p)` per level.
    pub level_margins: Vec<f64>,
    /// Smallest of `level_margins`.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalityReport {
    /// `(N, t_N)`, `N` starting at 1.
    pub thresholds: Vec<(usize, f64)>,
    pub verdict: Verdict,
    pub t_star_estimate: f64,
    /// Limit of `t_N` extrapolated linearly in `1/log(level size)`.
    pub t_extrapolated: f64,
    #[serde(skip)]
    pub ground_state: Option<Field>,
    pub positivity_weight: Option<PositivityWeight>,
    /// `Q_V(v_N)` per level.
    pub energies: Vec<f64>,
    /// `|Q_V(v_N) - (t_N/p) int W |v_N|^p| / Q_V(v_N)` per level.
    pub identity_errors: Vec<f64>,
    pub levels: Vec<Interval>,
    pub failure: Option<(usize, String)>,
}

fn level_size(first: &Interval, level: &Interval) -> f64 {
    (level.length() / first.length()).ln() + 1.0
}

/// Linear fit of `t` against `x = 1/size` through the last three levels,
/// evaluated at `x = 0`.
pub(crate) fn extrapolate(levels: &[Interval], t: &[f64]) -> f64 {
    let n = t.len();
    if n < 3 {
        return *t.last().unwrap_or(&0.0);
    }
    let pts: Vec<(f64, f64)> = (n - 3..n)
        .map(|k| (1.0 / level_size(&levels[0], &levels[k]), t[k]))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - sxy / sxx * mx
}

pub(crate) fn classify_thresholds(
    levels: &[Interval],
    t: &[f64],
    opts: &CriticalityOptions,
) -> (Verdict, f64, f64) {
    let n = t.len();
    let t_ext = extrapolate(levels, t);
    if n < 3 {
        return (Verdict::Undetermined, t_ext.max(0.0), t_ext);
    }
    let last = t[n - 1];
    let slack = 1e-9 * t[n - 3].abs().max(1e-300);
    let decreasing =
        t[n - 1] < t[n - 2] + slack && t[n - 2] < t[n - 3] + slack && t[n - 1] < t[n - 3];
    let plateau = (t[n - 3] - last).abs() < opts.plateau_rel * last.abs();
    if decreasing && (last <= opts.eps_crit || t_ext <= opts.extrapolation_rel * last) {
        return (Verdict::Critical, 0.0, t_ext);
    }
    if plateau && last > 10.0 * opts.eps_crit && t_ext >= 0.5 * last {
        return (Verdict::Subcritical, t_ext.min(last), t_ext);
    }
    (
        Verdict::Undetermined,
        t_ext.clamp(0.0, last.max(0.0)),
        t_ext,
    )
}

/// Runs the exhaustion and classifies `Q_V` as critical or subcritical.
/// The critical case carries the ground state, the subcritical case a
/// certified positivity weight.
pub fn criticality_verdict(
    problem: &RadialProblem,
    exhaustion: &ExhaustionSchedule,
    probe: &PotentialSpec,
    opts: &CriticalityOptions,
) -> Result<CriticalityReport> {
    let seq = null_sequence(problem, exhaustion, probe, opts)?;
    let t: Vec<f64> = seq.entries.iter().map(|e| e.t).collect();
    let levels: Vec<Interval> = seq.entries.iter().map(|e| e.level).collect();
    let (verdict, t_star, t_ext) = classify_thresholds(&levels, &t, opts);
    let identity_errors = seq
        .entries
        .iter()
        .map(|e| (e.energy - e.weighted).abs() / e.energy.abs().max(1e-300))
        .collect();
    let mut report = CriticalityReport {
        thresholds: t.iter().enumerate().map(|(k, &x)| (k + 1, x)).collect(),
        verdict,
        t_star_estimate: t_star,
        t_extrapolated: t_ext,
        ground_state: None,
        positivity_weight: None,
        energies: seq.entries.iter().map(|e| e.energy).collect(),
        identity_errors,
        levels: levels.clone(),
        failure: seq.failure.clone(),
    };
    match verdict {
        Verdict::Critical => {
            report.ground_state = seq.entries.last().map(|e| e.v.clone());
        }
        Verdict::Subcritical => {
            let pw = weight_from(
                problem,
                &exhaustion.truncated(levels.len()),
                probe,
                t_star,
                opts,
            )?;
            report.positivity_weight = Some(pw);
        }
        Verdict::Undetermined => {}
    }
    Ok(report)
}

fn weight_from(
    problem: &RadialProblem,
    exhaustion: &ExhaustionSchedule,
    probe: &PotentialSpec,
    t_star: f64,
    opts: &CriticalityOptions,
) -> Result<PositivityWeight> {
    if !(t_star > 0.0) {
        return Err(Error::State("no positive threshold limit".into()));
    }
    let weight = probe.scaled(0.5 * t_star);
    let shifted = problem.with_potential(problem.potential.minus(1.0, &weight));
    let mut level_margins = Vec::with_capacity(exhaustion.len());
    let mut prev: Option<Field> = None;
    for level in &exhaustion.levels {
        let grid = Arc::new(opts.grid.level_grid(problem, level)?);
        let th = threshold_tn(&shifted, &grid, probe, exhaustion.x0, prev.as_ref(), opts)?;
        level_margins.push(th.t);
        prev = Some(th.ground_state);
    }
    let margin = level_margins.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PositivityWeight {
        weight,
        t_star,
        level_margins,
        margin,
    })
}

#[derive(Debug, Clone)]
pub struct GroundState {
    /// Normalized by `v(x0) = 1`.
    pub field: Field,
    /// Sup difference on the first level against the same level solved on
    /// a refined grid.
    pub refinement_diff: f64,
    /// Sign class of the field for `Q'_V` away from the probe support.
    pub sign: SignClass,
    pub report: CriticalityReport,
}

pub fn ground_state(
    problem: &RadialProblem,
    exhaustion: &ExhaustionSchedule,
    probe: &PotentialSpec,
    opts: &CriticalityOptions,
) -> Result<GroundState> {
    let report = criticality_verdict(problem, exhaustion, probe, opts)?;
    if report.verdict != Verdict::Critical {
        return Err(Error::State(format!(
            "verdict is {:?}, not critical",
            report.verdict
        )));
    }
    let field = report
        .ground_state
        .clone()
        .expect("critical report carries a ground state");
    let last = *report.levels.last().unwrap();
    let fine_opts = CriticalityOptions {
        grid: opts.grid.refined(),
        ..*opts
    };
    let fine_grid = Arc::new(fine_opts.grid.level_grid(problem, &last)?);
    let fine = threshold_tn(
        problem,
        &fine_grid,
        probe,
        exhaustion.x0,
        Some(&field),
        &fine_opts,
    )?;
    let refinement_diff = field.window_sup_diff(&fine.ground_state, &exhaustion.levels[0]);
    let support = probe.support();
    let tol = 10.0 * opts.solver.tol_for(problem.p).max(1e-9);
    let sign = classify_sign_where(&field, problem, tol, |r| {
        support.is_none_or(|s| r < s.lo || r > s.hi)
    })?;
    Ok(GroundState {
        field,
        refinement_diff,
        sign,
        report,
    })
}

pub fn positivity_weight(
    problem: &RadialProblem,
    exhaustion: &ExhaustionSchedule,
    probe: &PotentialSpec,
    opts: &CriticalityOptions,
) -> Result<PositivityWeight> {
    let report = criticality_verdict(problem, exhaustion, probe, opts)?;
    match report.verdict {
        Verdict::Subcritical => Ok(report
            .positivity_weight
            .expect("subcritical report carries a weight")),
        v => Err(Error::State(format!("verdict is {v:?}, not subcritical"))),
    }
}

/// `int (|u'|^p + V|u|^p) - int W |u|^p` (the un-normalized gap; `p Q(u)` minus the weighted mass).
pub fn gap_residual(u: &Field, problem: &RadialProblem, weight: &PotentialSpec) -> Result<f64> {
    let e = energy_q(u, problem, Support::Compact)?;
    let g = u.grid();
    let w: f64 = (0..g.len())
        .map(|i| g.node_mass(i) * weight.eval(g.node(i)) * u.values()[i].abs().powf(problem.p))
        .sum();
    Ok(e.gradient_term + e.potential_term - w)
}

/// `int (|u'|^p + V|u|^p) - int W (|u'|^p + |u|^p)`, reported by the
/// validation suites only.
pub fn gradient_gap_residual(
    u: &Field,
    problem: &RadialProblem,
    weight: &PotentialSpec,
) -> Result<f64> {
    let e = energy_q(u, problem, Support::Compact)?;
    let g = u.grid();
    let x = u.values();
    let p = problem.p;
    let mut w = 0.0;
    for c in 0..g.cells() {
        let s = (x[c + 1] - x[c]) / g.cell_width(c);
        let wm = weight.eval(0.5 * (g.node(c) + g.node(c + 1)));
        w += g.cell_measure(c) * wm * s.abs().powf(p);
    }
    for i in 0..g.len() {
        w += g.node_mass(i) * weight.eval(g.node(i)) * x[i].abs().powf(p);
    }
    Ok(e.gradient_term + e.potential_term - w)
}
