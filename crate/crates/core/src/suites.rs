//! Randomized property batteries behind `validate` and the acceptance
//! target. Every battery draws from its own ChaCha stream derived from the
//! run seed and the battery name, so a seed override changes the samples
//! and nothing else.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{
    comparison_check, minimal_growth_certificate, CertificateOptions, CertificateRun,
};
use crate::domain::{
    build_grid, bump, CompactSetSpec, ExhaustionSchedule, Field, Grid, GridSpec, InnerEnd,
    Interval, PotentialSpec, RadialProblem, Spacing,
};
use crate::energy::{
    energy_q, picone_density, simplified_energy, vector_inequality_ratio, Support,
};
use crate::error::{Error, Result};
use crate::mingrowth::{uk_limit, MinGrowthOptions};
use crate::solver::{solve_on_grid, wcp_check, SolverConfig};

/// Names of the batteries run by [`run_suites`], in order.
pub const SUITES: &[&str] = &[
    "energy-scaling",
    "picone-nonnegativity",
    "picone-identity",
    "picone-p2-collapse",
    "vector-inequality-p2",
    "vector-inequality-envelope",
    "simplified-two-sidedness",
    "max-principle",
    "homogeneity",
    "wcp-battery",
    "comparison-battery",
    "minimal-growth-monotonicity",
];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Worst value of the checked quantity (see `detail`).
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Quick sizes for `validate`.
    Reduced,
    /// Sizes of the acceptance criteria.
    Full,
}

/// Independent stream for one battery.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Nonnegative sum of smooth bumps supported strictly inside `support`.
#[derive(Debug, Clone)]
pub struct RandomProfile {
    bumps: Vec<(f64, f64, f64)>,
}

impl RandomProfile {
    pub fn draw(rng: &mut impl Rng, support: &Interval, count: usize) -> Self {
        let len = support.length();
        let bumps = (0..count)
            .map(|_| {
                let radius = len * rng.gen_range(0.08..0.45);
                let center = rng.gen_range(support.lo + radius..=support.hi - radius);
                (center, radius, rng.gen_range(0.1..2.0))
            })
            .collect();
        RandomProfile { bumps }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(c, rad, h)| h * bump(r, c, rad))
            .sum()
    }

    pub fn on(&self, grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid.clone(), |r| self.eval(r))
    }
}

fn outcome(
    name: &str,
    passed: bool,
    samples: usize,
    worst: f64,
    detail: impl Into<String>,
) -> SuiteOutcome {
    SuiteOutcome {
        name: name.to_string(),
        passed,
        samples,
        worst,
        detail: detail.into(),
    }
}

fn annulus(p: f64, d: f64, v: f64) -> Result<RadialProblem> {
    let pot = if v == 0.0 {
        PotentialSpec::Zero
    } else {
        PotentialSpec::Constant { c: v }
    };
    RadialProblem::with_inner(p, d, Interval::new(1.0, 2.0)?, InnerEnd::Boundary, pot)
}

/// A positive discrete solution on `(1, 2)` with random positive traces, a
/// random constant potential `V >= 0` and relative residual `<= 1e-12`.
pub struct SolutionSample {
    pub problem: RadialProblem,
    pub grid: Arc<Grid>,
    pub v: Field,
}

pub fn random_solution(rng: &mut impl Rng, p: f64, nodes: usize) -> Result<SolutionSample> {
    let d = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
    let c = if rng.gen_bool(0.5) {
        0.0
    } else {
        rng.gen_range(0.0..2.0)
    };
    let problem = annulus(p, d, c)?;
    let grid = Arc::new(build_grid(
        &problem,
        &problem.domain,
        nodes,
        Spacing::Uniform,
    )?);
    let bc = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    // identities tested against `v` need it solved to rounding level
    let cfg = SolverConfig {
        tol: Some(1e-12),
        ..SolverConfig::default()
    };
    let rep = solve_on_grid(&problem, &grid, bc, None, None, &cfg)?;
    if !rep.converged {
        return Err(Error::NonConvergence(format!(
            "reference solution p = {p}, d = {d}, V = {c}, traces {bc:?}: residual {:e}",
            rep.final_residual_norm
        )));
    }
    Ok(SolutionSample {
        problem,
        grid,
        v: rep.solution,
    })
}

/// Inner part of `(1, 2)` carrying the random test profiles.
fn inner() -> Interval {
    Interval { lo: 1.05, hi: 1.95 }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PiconeStats {
    /// Most negative cell density relative to `1 + |local terms|`.
    pub min_density: f64,
    /// Largest `|Q(u) - int L(u, v)| / (1 + |Q(u)|)`.
    pub max_identity_error: f64,
    pub pairs: usize,
}

/// Picone density and identity over `pairs` random `(u >= 0, v solution)`
/// pairs, cycling `p` over `ps`, with one solution per `per_solution` pairs.
pub fn picone_battery(
    rng: &mut impl Rng,
    ps: &[f64],
    pairs: usize,
    per_solution: usize,
    nodes: usize,
) -> Result<PiconeStats> {
    let mut min_density = f64::INFINITY;
    let mut max_err: f64 = 0.0;
    let mut done = 0;
    let mut k = 0;
    while done < pairs {
        let p = ps[k % ps.len()];
        k += 1;
        let s = random_solution(rng, p, nodes)?;
        for _ in 0..per_solution.min(pairs - done) {
            let count = rng.gen_range(1..4);
            let u = RandomProfile::draw(rng, &inner(), count).on(&s.grid);
            let l = picone_density(&u, &s.v, p)?;
            let (x, y) = (u.values(), s.v.values());
            for c in 0..s.grid.cells() {
                let h = s.grid.cell_width(c);
                let a = ((x[c + 1] - x[c]) / h).abs();
                let b = ((y[c + 1] - y[c]) / h).abs();
                let t = (x[c] + x[c + 1]) / (y[c] + y[c + 1]);
                let mag = a.powf(p) + (t * b).powf(p);
                min_density = min_density.min(l.cells[c] / (1.0 + mag));
            }
            let q = energy_q(&u, &s.problem, Support::Compact)?.total;
            max_err = max_err.max((q - l.total).abs() / (1.0 + q.abs()));
            done += 1;
        }
    }
    Ok(PiconeStats {
        min_density,
        max_identity_error: max_err,
        pairs: done,
    })
}

/// Random pair in `R^k`: Gaussian directions, log-uniform magnitude ratio.
pub fn random_vector_pair(rng: &mut impl Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
    let a = gaussian(rng, k, 1.0);
    let s = 10f64.powf(rng.gen_range(-3.0..3.0));
    // a quarter of the draws are collinear, where the extremes of the ratio sit
    if rng.gen_bool(0.25) {
        let s = if rng.gen_bool(0.5) { -s } else { s };
        let b = a.iter().map(|x| s * x).collect();
        return (a, b);
    }
    let b = gaussian(rng, k, s);
    (a, b)
}

fn gaussian(rng: &mut impl Rng, k: usize, s: f64) -> Vec<f64> {
    (0..k)
        .map(|_| {
            // Box-Muller
            let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            s * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub p: f64,
    /// `(samples, min, max)` at each checkpoint.
    pub checkpoints: Vec<(usize, f64, f64)>,
    pub all_finite_positive: bool,
    /// Largest `|ratio - 1|` seen (meaningful for `p = 2`).
    pub max_dev_from_one: f64,
}

/// Empirical envelope of the vector-inequality ratio over `samples` random
/// pairs in `R^3`, recorded at each checkpoint.
pub fn vector_envelope(
    rng: &mut impl Rng,
    p: f64,
    samples: usize,
    checkpoints: &[usize],
) -> Result<Envelope> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut ok = true;
    let mut dev: f64 = 0.0;
    let mut out = Vec::new();
    for n in 1..=samples {
        let (a, b) = random_vector_pair(rng, 3);
        let r = vector_inequality_ratio(&a, &b, p)?.ratio;
        ok &= r.is_finite() && r > 0.0;
        dev = dev.max((r - 1.0).abs());
        lo = lo.min(r);
        hi = hi.max(r);
        if checkpoints.contains(&n) {
            out.push((n, lo, hi));
        }
    }
    Ok(Envelope {
        p,
        checkpoints: out,
        all_finite_positive: ok,
        max_dev_from_one: dev,
    })
}

/// Range of `Q(vw) / simplified(v, w)` over the same random profiles `w` on
/// a grid and on its refinement: `((lo, hi), (lo_fine, hi_fine))`.
pub fn two_sided_ranges(
    rng: &mut impl Rng,
    p: f64,
    samples: usize,
    nodes: usize,
) -> Result<((f64, f64), (f64, f64))> {
    let problem = annulus(p, 2.0, 0.0)?;
    let profiles: Vec<RandomProfile> = (0..samples)
        .map(|_| {
            let count = rng.gen_range(1..4);
            RandomProfile::draw(rng, &inner(), count)
        })
        .collect();
    let bc = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    let mut ranges = Vec::new();
    for n in [nodes, 2 * nodes - 1] {
        let grid = Arc::new(build_grid(&problem, &problem.domain, n, Spacing::Uniform)?);
        let v = solve_on_grid(&problem, &grid, bc, None, None, &SolverConfig::default())?.solution;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for w in &profiles {
            let wf = w.on(&grid);
            let vw = Field::new(
                grid.clone(),
                v.values()
                    .iter()
                    .zip(wf.values())
                    .map(|(a, b)| a * b)
                    .collect(),
            )?;
            let q = energy_q(&vw, &problem, Support::Compact)?.total;
            let s = simplified_energy(&v, &wf, &problem)?.universal;
            let r = q / s;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        ranges.push((lo, hi));
    }
    Ok((ranges[0], ranges[1]))
}

/// WCP harness over random ordered data `0 <= f1 <= f2`, `0 <= b1 <= b2`;
/// returns the largest violation, or the first hypothesis failure.
pub fn wcp_battery(rng: &mut impl Rng, trials: usize, nodes: usize) -> Result<f64> {
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
        let s_problem = annulus(
            p,
            rng.gen_range(1..=3) as f64,
            if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..2.0)
            },
        )?;
        let grid = Arc::new(build_grid(
            &s_problem,
            &s_problem.domain,
            nodes,
            Spacing::Uniform,
        )?);
        let b1 = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let b2 = (
            b1.0 + rng.gen_range(0.0..1.0),
            b1.1 + rng.gen_range(0.0..1.0),
        );
        let f1 = RandomProfile::draw(rng, &inner(), 2);
        let extra = RandomProfile::draw(rng, &inner(), 2);
        let load1 = if rng.gen_bool(0.3) {
            None
        } else {
            Some(f1.on(&grid))
        };
        let load2 = Field::from_fn(grid.clone(), |r| {
            load1.as_ref().map_or(0.0, |_| f1.eval(r)) + extra.eval(r)
        });
        let u1 = solve_on_grid(&s_problem, &grid, b1, load1.as_ref(), None, &cfg)?.solution;
        let u2 = solve_on_grid(&s_problem, &grid, b2, Some(&load2), None, &cfg)?.solution;
        worst = worst.max(wcp_check(&u1, &u2, &s_problem, &cfg)?.max_violation);
    }
    Ok(worst)
}

/// Certified minimal-growth profile used by the comparison battery: `u^K`
/// for `K = [0, 2]` with trace 1 outside `Omega_2 = K`, in `d = 3`.
pub struct CertifiedProfile {
    pub problem: RadialProblem,
    pub u: Field,
    pub omega2: CompactSetSpec,
    pub certificate: CertificateRun,
}

pub fn certified_profile(p: f64, levels: usize) -> Result<CertifiedProfile> {
    let problem = RadialProblem::new(
        p,
        3.0,
        Interval::new(0.0, f64::INFINITY)?,
        PotentialSpec::Zero,
    )?;
    let k = CompactSetSpec::new(0.0, 2.0)?.with_trace(1.0, 1.0);
    let run = uk_limit(
        &problem,
        &k,
        &ExhaustionSchedule::balls(8.0, 2.0, levels + 1)?,
        &MinGrowthOptions::default(),
    )?;
    let omega2 = CompactSetSpec::new(0.0, 2.0)?;
    let b = Interval::new(3.0, 4.0)?;
    let certificate = minimal_growth_certificate(
        &problem,
        &run.limit,
        &omega2,
        &b,
        &ExhaustionSchedule::balls(8.0, 2.0, levels)?,
        &CertificateOptions::default(),
    )?;
    Ok(CertifiedProfile {
        problem,
        u: run.limit,
        omega2,
        certificate,
    })
}

/// Sub/supersolution comparison outside `Omega_2`: `u_sub = a u^K` against
/// supersolutions `v` solving `Q'(v) = f >= 0` on `(2, R)` with
/// `v(2) >= u_sub(2)`, `v(R) >= 0`. Returns the largest violation.
pub fn comparison_battery(
    rng: &mut impl Rng,
    profile: &CertifiedProfile,
    trials: usize,
) -> Result<f64> {
    let cfg = SolverConfig::default();
    let hi = profile.u.grid().interval().hi;
    let level = Interval::new(profile.omega2.hi, hi)?;
    let grid = Arc::new(GridSpec::default().level_grid(&profile.problem, &level)?);
    let at = profile.u.sample(profile.omega2.hi);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a = rng.gen_range(0.05..1.0);
        let u_sub = profile.u.scaled(a);
        let bc = (a * at * rng.gen_range(1.0..2.0), rng.gen_range(0.0..0.1));
        let load = if rng.gen_bool(0.5) {
            let lo = profile.omega2.hi;
            let width = rng.gen_range(1.0..20.0);
            let prof = RandomProfile::draw(rng, &Interval { lo, hi: lo + width }, 2);
            let s = rng.gen_range(0.0..0.1);
            Some(Field::from_fn(grid.clone(), |r| s * prof.eval(r)))
        } else {
            None
        };
        let rep = solve_on_grid(&profile.problem, &grid, bc, load.as_ref(), None, &cfg)?;
        if !rep.converged {
            return Err(Error::NonConvergence(format!(
                "supersolution solve stopped at residual {:.3e}",
                rep.final_residual_norm
            )));
        }
        let v = rep.solution;
        let out = comparison_check(
            &profile.problem,
            &u_sub,
            &v,
            &profile.omega2,
            &profile.certificate,
            &Default::default(),
        )?;
        worst = worst.max(out.max_violation);
    }
    Ok(worst)
}

struct Sizes {
    picone_pairs: usize,
    picone_nodes: usize,
    vector_samples: usize,
    two_sided: usize,
    wcp: usize,
    comparison: usize,
    comparison_levels: usize,
}

fn sizes(scale: Scale) -> Sizes {
    match scale {
        Scale::Reduced => Sizes {
            picone_pairs: 60,
            picone_nodes: 4000,
            vector_samples: 100_000,
            two_sided: 100,
            wcp: 20,
            comparison: 20,
            comparison_levels: 10,
        },
        Scale::Full => Sizes {
            picone_pairs: 1000,
            picone_nodes: 4000,
            vector_samples: 100_000,
            two_sided: 1000,
            wcp: 200,
            comparison: 200,
            comparison_levels: 14,
        },
    }
}

/// Runs every battery of [`SUITES`]; failures are reported, not raised.
pub fn run_suites(seed: u64, scale: Scale) -> Vec<SuiteOutcome> {
    SUITES
        .iter()
        .map(|&name| match run_one(name, seed, scale) {
            Ok(o) => o,
            Err(e) => outcome(name, false, 0, f64::NAN, format!("error: {e}")),
        })
        .collect()
}

fn run_one(name: &str, seed: u64, scale: Scale) -> Result<SuiteOutcome> {
    let sz = sizes(scale);
    let mut rng = stream(seed, name);
    let rng = &mut rng;
    Ok(match name {
        "energy-scaling" => {
            let mut worst: f64 = 0.0;
            let n = 100;
            for _ in 0..n {
                let p = rng.gen_range(1.1..6.0);
                let problem = annulus(p, rng.gen_range(1..=3) as f64, rng.gen_range(0.0..2.0))?;
                let grid = Arc::new(build_grid(
                    &problem,
                    &problem.domain,
                    200,
                    Spacing::Geometric,
                )?);
                let u = RandomProfile::draw(rng, &inner(), 2).on(&grid);
                let t = rng.gen_range(0.1..10.0);
                let q = energy_q(&u, &problem, Support::Compact)?.total;
                let qt = energy_q(&u.scaled(t), &problem, Support::Compact)?.total;
                worst = worst.max((qt - t.powf(p) * q).abs() / (t.powf(p) * q).abs());
            }
            outcome(
                name,
                worst <= 1e-12,
                n,
                worst,
                "max relative |Q(tu) - t^p Q(u)|",
            )
        }
        "picone-nonnegativity" | "picone-identity" => {
            let st = picone_battery(rng, &[1.5, 2.0, 3.0], sz.picone_pairs, 20, sz.picone_nodes)?;
            if name == "picone-nonnegativity" {
                outcome(
                    name,
                    st.min_density >= -1e-12,
                    st.pairs,
                    st.min_density,
                    "min relative cell density",
                )
            } else {
                outcome(
                    name,
                    st.max_identity_error <= 1e-6,
                    st.pairs,
                    st.max_identity_error,
                    "max |Q(u) - int L(u,v)| / (1 + |Q(u)|)",
                )
            }
        }
        "picone-p2-collapse" => {
            let mut worst: f64 = 0.0;
            let n = 50;
            for _ in 0..n {
                let s = random_solution(rng, 2.0, 300)?;
                let u = RandomProfile::draw(rng, &inner(), 2).on(&s.grid);
                let l = picone_density(&u, &s.v, 2.0)?;
                let (x, y) = (u.values(), s.v.values());
                for c in 0..s.grid.cells() {
                    let h = s.grid.cell_width(c);
                    let (um, vm) = (0.5 * (x[c] + x[c + 1]), 0.5 * (y[c] + y[c + 1]));
                    let (a, b) = ((x[c + 1] - x[c]) / h, (y[c + 1] - y[c]) / h);
                    // (1/2) v^2 |(u/v)'|^2 with the cell-midpoint chain rule
                    let q = (a * vm - um * b) / (vm * vm);
                    let expect = 0.5 * vm * vm * q * q;
                    worst = worst
                        .max((l.cells[c] - expect).abs() / (1.0 + a * a + (um / vm * b).powi(2)));
                }
            }
            outcome(
                name,
                worst <= 1e-12,
                n,
                worst,
                "max cell |L - v^2 |(u/v)'|^2 / 2|",
            )
        }
        "vector-inequality-p2" => {
            let env = vector_envelope(rng, 2.0, sz.vector_samples / 10, &[])?;
            outcome(
                name,
                env.max_dev_from_one <= 1e-12,
                sz.vector_samples / 10,
                env.max_dev_from_one,
                "max |ratio - 1| at p = 2",
            )
        }
        "vector-inequality-envelope" => {
            let n = sz.vector_samples;
            let mut worst: f64 = 0.0;
            let mut ok = true;
            let mut text = Vec::new();
            for p in [1.2, 1.5, 3.0, 4.0] {
                let env = vector_envelope(rng, p, n, &[n / 10, n])?;
                let (_, lo1, hi1) = env.checkpoints[0];
                let (_, lo2, hi2) = env.checkpoints[1];
                let drift = ((lo1 - lo2) / lo2).abs().max(((hi1 - hi2) / hi2).abs());
                worst = worst.max(drift);
                ok &= env.all_finite_positive && drift <= 0.05;
                text.push(format!("p={p}: [{lo2:.4}, {hi2:.4}]"));
            }
            outcome(
                name,
                ok,
                4 * n,
                worst,
                format!("envelope drift 10% -> 100% of samples; {}", text.join(", ")),
            )
        }
        "simplified-two-sidedness" => {
            let mut worst: f64 = 0.0;
            let mut text = Vec::new();
            for p in [1.5, 3.0] {
                let ((lo, hi), (lo2, hi2)) = two_sided_ranges(rng, p, sz.two_sided, 400)?;
                worst = worst
                    .max(((lo2 - lo) / lo).abs())
                    .max(((hi2 - hi) / hi).abs());
                text.push(format!("p={p}: [{lo2:.4}, {hi2:.4}]"));
            }
            outcome(
                name,
                worst < 0.1,
                2 * sz.two_sided,
                worst,
                format!("endpoint change under refinement; {}", text.join(", ")),
            )
        }
        "max-principle" => {
            let n = 50;
            let mut worst = f64::INFINITY;
            let mut strict = true;
            for _ in 0..n {
                let p = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
                let problem = annulus(p, rng.gen_range(1..=3) as f64, rng.gen_range(0.0..2.0))?;
                let grid = Arc::new(build_grid(
                    &problem,
                    &problem.domain,
                    300,
                    Spacing::Uniform,
                )?);
                let f = RandomProfile::draw(rng, &inner(), 2).on(&grid);
                let bc = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let u = solve_on_grid(
                    &problem,
                    &grid,
                    bc,
                    Some(&f),
                    None,
                    &SolverConfig::default(),
                )?
                .solution;
                let vals = u.values();
                worst = worst.min(vals.iter().copied().fold(f64::INFINITY, f64::min));
                strict &= vals[1..vals.len() - 1].iter().all(|&x| x > 0.0);
            }
            outcome(
                name,
                worst >= -1e-10 && strict,
                n,
                worst,
                "min u over solves with f >= 0, b >= 0",
            )
        }
        "homogeneity" => {
            let n = 30;
            let mut worst: f64 = 0.0;
            for _ in 0..n {
                let p = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
                let problem = annulus(p, rng.gen_range(1..=3) as f64, rng.gen_range(0.0..2.0))?;
                let grid = Arc::new(build_grid(
                    &problem,
                    &problem.domain,
                    300,
                    Spacing::Uniform,
                )?);
                let bc = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
                let t = rng.gen_range(0.1..10.0);
                let cfg = SolverConfig::default();
                let u = solve_on_grid(&problem, &grid, bc, None, None, &cfg)?.solution;
                let ut = solve_on_grid(&problem, &grid, (t * bc.0, t * bc.1), None, None, &cfg)?
                    .solution;
                let scale = u.max_abs() * t;
                for (a, b) in u.values().iter().zip(ut.values()) {
                    worst = worst.max((t * a - b).abs() / scale);
                }
            }
            outcome(name, worst <= 1e-9, n, worst, "max |t u - u_t| / max |t u|")
        }
        "wcp-battery" => {
            let w = wcp_battery(rng, sz.wcp, 200)?;
            outcome(name, w <= 1e-8, sz.wcp, w, "max violation of u1 <= u2")
        }
        "comparison-battery" => {
            let mut worst: f64 = 0.0;
            for p in [2.0, 2.5] {
                let prof = certified_profile(p, sz.comparison_levels)?;
                worst = worst.max(comparison_battery(rng, &prof, sz.comparison / 2)?);
            }
            outcome(
                name,
                worst <= 1e-8,
                sz.comparison,
                worst,
                "max violation of u_sub <= v_super outside Omega_2",
            )
        }
        "minimal-growth-monotonicity" => {
            let problem = RadialProblem::new(
                2.0,
                3.0,
                Interval::new(0.0, f64::INFINITY)?,
                PotentialSpec::Zero,
            )?;
            let k = CompactSetSpec::new(0.0, 1.0)?.with_trace(1.0, 1.0);
            let run = uk_limit(
                &problem,
                &k,
                &ExhaustionSchedule::balls(2.0, 2.0, 10)?,
                &MinGrowthOptions::default(),
            )?;
            let worst = run.monotonicity.iter().copied().fold(0.0, f64::max);
            outcome(
                name,
                worst <= 1e-8,
                run.monotonicity.len(),
                worst,
                "max (u_N - u_{N+1}) over nodes",
            )
        }
        _ => outcome(name, false, 0, f64::NAN, "unknown battery"),
    })
}

#[doc(hidden)]
pub fn run_suites_named(name: &str, seed: u64, scale: Scale) -> SuiteOutcome {
    run_one(name, seed, scale)
        .unwrap_or_else(|e| outcome(name, false, 0, f64::NAN, format!("error: {e}")))
}
