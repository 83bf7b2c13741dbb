//! Acceptance run: the eleven primary criteria at their stated sizes and
//! tolerances, one PASS/FAIL line each. Runs without the libtest harness so
//! the lines are always shown; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use plap::capacity::capacity_sequence;
use plap::certificate::{minimal_growth_certificate, CertificateOptions, Trend};
use plap::config::DEFAULT_SEED;
use plap::criticality::{criticality_verdict, default_probe, CriticalityOptions, Verdict};
use plap::eigen::{principal_eigenpair, EigenOptions};
use plap::mingrowth::{
    point_singularity_solution, singularity_exponent, uk_limit, ExponentMode, MinGrowthOptions,
};
use plap::solver::{classify_sign, SignClass, SolverConfig};
use plap::suites::{
    certified_profile, comparison_battery, picone_battery, stream, two_sided_ranges,
    vector_envelope, wcp_battery,
};
use plap::{
    build_grid, CompactSetSpec, ExhaustionSchedule, Field, GridSpec, InnerEnd, Interval,
    PotentialSpec, RadialProblem, Spacing,
};

type Check = std::result::Result<String, String>;

/// `(id, name, check, runtime budget)`
type Criterion = (usize, &'static str, fn() -> Check, Duration);

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn free(p: f64, d: f64) -> RadialProblem {
    RadialProblem::new(
        p,
        d,
        Interval::new(0.0, f64::INFINITY).unwrap(),
        PotentialSpec::Zero,
    )
    .unwrap()
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

// 1. Picone density and identity.
fn picone() -> Check {
    let mut rng = stream(DEFAULT_SEED, "acceptance-picone");
    let st =
        picone_battery(&mut rng, &[1.5, 2.0, 3.0], 1000, 20, 4000).map_err(|e| e.to_string())?;
    verdict(
        st.pairs == 1000 && st.min_density >= -1e-12 && st.max_identity_error <= 1e-6,
        format!(
            "{} pairs at 4000 nodes: min density {:.2e}, max identity error {:.2e}",
            st.pairs, st.min_density, st.max_identity_error
        ),
    )
}

// 2. Vector-inequality envelope.
fn vector_inequality() -> Check {
    let mut rng = stream(DEFAULT_SEED, "acceptance-vector");
    let mut ok = true;
    let mut text = Vec::new();
    for p in [1.2, 1.5, 2.0, 3.0, 4.0] {
        let env =
            vector_envelope(&mut rng, p, 100_000, &[10_000, 100_000]).map_err(|e| e.to_string())?;
        let (_, lo1, hi1) = env.checkpoints[0];
        let (_, lo2, hi2) = env.checkpoints[1];
        let drift = ((lo1 - lo2) / lo2).abs().max(((hi1 - hi2) / hi2).abs());
        ok &= env.all_finite_positive && drift <= 0.05;
        if p == 2.0 {
            ok &= env.max_dev_from_one <= 1e-12;
            text.push(format!("p=2 |ratio-1| {:.1e}", env.max_dev_from_one));
        } else {
            text.push(format!("p={p} [{lo2:.3}, {hi2:.3}] drift {drift:.1e}"));
        }
    }
    verdict(ok, text.join("; "))
}

// 3. Two-sidedness of the simplified energy.
fn two_sidedness() -> Check {
    let mut rng = stream(DEFAULT_SEED, "acceptance-two-sided");
    let mut ok = true;
    let mut text = Vec::new();
    for p in [1.5, 3.0] {
        let ((lo, hi), (lo2, hi2)) =
            two_sided_ranges(&mut rng, p, 1000, 400).map_err(|e| e.to_string())?;
        let change = ((lo2 - lo) / lo).abs().max(((hi2 - hi) / hi).abs());
        ok &= lo > 0.0 && hi.is_finite() && change < 0.1;
        text.push(format!("p={p} [{lo2:.4}, {hi2:.4}] change {change:.1e}"));
    }
    verdict(ok, text.join("; "))
}

/// Half-period of the first Dirichlet eigenfunction on (0, 1) by shooting:
/// integrate `u' = |phi|^(1/(p-1)) sgn phi`, `phi' = -lambda |u|^(p-2) u`
/// from `u = 0`, `phi = 1` until `phi` changes sign; by symmetry that point
/// must be `1/2`.
fn shooting_eigenvalue(p: f64) -> f64 {
    let rhs = |lambda: f64, u: f64, phi: f64| {
        (
            phi.abs().powf(1.0 / (p - 1.0)) * phi.signum(),
            -lambda * u.abs().powf(p - 2.0) * u,
        )
    };
    let peak = |lambda: f64| -> f64 {
        let h = 1e-5;
        let (mut x, mut u, mut phi) = (0.0, 0.0, 1.0);
        loop {
            let k1 = rhs(lambda, u, phi);
            let k2 = rhs(lambda, u + 0.5 * h * k1.0, phi + 0.5 * h * k1.1);
            let k3 = rhs(lambda, u + 0.5 * h * k2.0, phi + 0.5 * h * k2.1);
            let k4 = rhs(lambda, u + h * k3.0, phi + h * k3.1);
            let un = u + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            let pn = phi + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            if pn <= 0.0 {
                return x + h * phi / (phi - pn);
            }
            (x, u, phi) = (x + h, un, pn);
            if x > 10.0 {
                return x;
            }
        }
    };
    let (mut lo, mut hi) = (0.1, 1000.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if peak(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// 4. Principal eigenvalue against shooting.
fn eigenvalue() -> Check {
    let mut ok = true;
    let mut text = Vec::new();
    for (p, rel) in [(2.0, 1e-3), (3.0, 5e-3)] {
        let unit = Interval::new(0.0, 1.0).unwrap();
        let problem =
            RadialProblem::with_inner(p, 1.0, unit, InnerEnd::Boundary, PotentialSpec::Zero)
                .unwrap();
        let grid = Arc::new(build_grid(&problem, &unit, 2000, Spacing::Uniform).unwrap());
        let eig = principal_eigenpair(
            &problem,
            &grid,
            &SolverConfig::default(),
            &EigenOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let oracle = shooting_eigenvalue(p);
        let err = (eig.lambda - oracle).abs() / oracle;
        ok &= eig.converged && err <= rel;
        text.push(format!(
            "p={p} lambda {:.6} oracle {oracle:.6} rel {err:.1e}",
            eig.lambda
        ));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let oracle_check = (shooting_eigenvalue(2.0) - pi2).abs() / pi2;
    ok &= oracle_check <= 1e-6;
    text.push(format!("oracle vs pi^2 {oracle_check:.1e}"));
    verdict(ok, text.join("; "))
}

// 5 and 11. Criticality dichotomy and the null-sequence energy identity.
fn dichotomy() -> (Check, Check) {
    let opts = CriticalityOptions::default();
    let ex = ExhaustionSchedule::balls(2.0, 2.0, 16).unwrap();
    let probe = default_probe(&ex);
    let window = Interval::new(0.0, 1.0).unwrap();
    let mut ok = true;
    let mut text = Vec::new();
    let mut id_ok = true;
    let mut id_text = Vec::new();
    for (d, p) in [(1.0, 2.0), (2.0, 2.0), (3.0, 3.0)] {
        let pr = free(p, d);
        let rep = match criticality_verdict(&pr, &ex, &probe, &opts) {
            Ok(r) => r,
            Err(e) => {
                return (
                    Err(format!("(d,p)=({d},{p}): {e}")),
                    Err("no critical run".into()),
                )
            }
        };
        let dev = rep.ground_state.as_ref().map_or(f64::INFINITY, |gs| {
            let g = gs.grid();
            let vals: Vec<f64> = g.indices_in(&window).map(|i| gs.values()[i]).collect();
            let hi = max_of(vals.iter().copied());
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            (hi - lo) / hi
        });
        ok &= rep.verdict == Verdict::Critical && dev <= 0.02;
        text.push(format!("({d},{p}) {:?} gs dev {dev:.1e}", rep.verdict));
        let worst = max_of(rep.identity_errors.iter().copied());
        id_ok &= rep.identity_errors.len() == ex.len() && worst <= 1e-8;
        id_text.push(format!(
            "({d},{p}) {} levels max {worst:.1e}",
            rep.identity_errors.len()
        ));
    }
    for (d, p) in [(3.0, 2.0), (4.0, 3.0)] {
        let pr = free(p, d);
        let rep = match criticality_verdict(&pr, &ex, &probe, &opts) {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                text.push(format!("({d},{p}) error {e}"));
                continue;
            }
        };
        let margin = rep
            .positivity_weight
            .as_ref()
            .map_or(f64::NEG_INFINITY, |w| w.margin);
        let hi = ex.levels.last().unwrap().hi;
        let g = Arc::new(
            GridSpec::default()
                .level_grid(&pr, &Interval::new(0.0, hi).unwrap())
                .unwrap(),
        );
        let sup = Field::from_fn(g, |r: f64| (1.0 + r.powf(p / (p - 1.0))).powf((p - d) / p));
        let class = classify_sign(&sup, &pr, 1e-8);
        ok &= rep.verdict == Verdict::Subcritical
            && margin >= -1e-8
            && matches!(class, Ok(SignClass::Supersolution));
        text.push(format!(
            "({d},{p}) {:?} margin {margin:.2e} explicit {class:?}",
            rep.verdict
        ));
    }
    (
        verdict(ok, text.join("; ")),
        verdict(id_ok, id_text.join("; ")),
    )
}

// 6. Capacity dichotomy.
fn capacity() -> Check {
    let k = CompactSetSpec::new(0.0, 1.0).unwrap();
    let ex = ExhaustionSchedule::balls(2.0, 2.0, 14).unwrap();
    let cfg = SolverConfig::default();
    let caps3 = capacity_sequence(&free(2.0, 3.0), &k, &ex, &GridSpec::default(), &cfg)
        .map_err(|e| e.to_string())?;
    // radial closed form (1/2) / (1 - 1/R) for K = B_1 in B_R, d = 3
    let err3 = max_of(caps3.iter().map(|c| {
        let exact = 0.5 / (1.0 - 1.0 / c.level.hi);
        (c.value - exact).abs() / exact
    }));
    let last3 = caps3.last().unwrap().value;
    let caps1 = capacity_sequence(&free(2.0, 1.0), &k, &ex, &GridSpec::default(), &cfg)
        .map_err(|e| e.to_string())?;
    let monotone = caps1.windows(2).all(|w| w[1].value < w[0].value);
    let ratio1 = caps1.last().unwrap().value / caps1[0].value;
    let conv = caps3.iter().chain(&caps1).all(|c| c.converged);
    verdict(
        conv && err3 <= 0.01 && monotone && ratio1 <= 1e-3,
        format!(
            "d=3 last {last3:.5} max rel err {err3:.1e}; d=1 decreasing {monotone} {:.3e} -> {:.3e}",
            caps1[0].value,
            caps1.last().unwrap().value
        ),
    )
}

// 7. Minimal-growth limits.
fn minimal_growth() -> Check {
    let opts = MinGrowthOptions::default();
    let pr = free(2.0, 3.0);
    let k = CompactSetSpec::new(0.0, 1.0).unwrap().with_trace(1.0, 1.0);
    let window = Interval::new(1.5, 3.0).unwrap();
    let run = uk_limit(
        &pr,
        &k,
        &ExhaustionSchedule::balls(4.0, 2.0, 18).unwrap(),
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let g = run.limit.grid();
    let err = max_of(
        g.indices_in(&window)
            .map(|i| (run.limit.values()[i] * g.node(i) - 1.0).abs()),
    );
    let mono = max_of(run.monotonicity.iter().copied()).max(0.0);
    let other = uk_limit(
        &pr,
        &k,
        &ExhaustionSchedule::balls(4.0, 3.0, 12).unwrap(),
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let top = max_of(g.indices_in(&window).map(|i| run.limit.values()[i]));
    let sched = run.limit.window_sup_diff(&other.limit, &window) / top;
    verdict(
        run.failure.is_none()
            && other.failure.is_none()
            && mono <= 1e-8
            && err <= 0.01
            && sched <= 0.01,
        format!("monotonicity {mono:.1e}; |r u - 1| {err:.1e}; schedule diff {sched:.1e}"),
    )
}

// 8. Singularity exponents.
fn exponents() -> Check {
    let opts = MinGrowthOptions::default();
    let mut ok = true;
    let mut text = Vec::new();
    for (d, p) in [(3.0, 2.0), (4.0, 3.0), (5.0, 2.0)] {
        let pr = free(p, d);
        let ex = ExhaustionSchedule::balls(2.0, 2.0, 24).unwrap();
        let run =
            point_singularity_solution(&pr, 0.0, 1.0, &ex, &opts).map_err(|e| e.to_string())?;
        let rho = *run.radii.last().unwrap();
        let fit = singularity_exponent(
            &run.solution,
            0.0,
            &Interval::new(20.0 * rho, 0.05).unwrap(),
            ExponentMode::Power,
        )
        .map_err(|e| e.to_string())?;
        let alpha = (p - d) / (p - 1.0);
        let rel = (fit.slope - alpha).abs() / alpha.abs();
        ok &= run.failure.is_none() && rel <= 0.05;
        text.push(format!("({d},{p}) slope {:.4} vs {alpha:.4}", fit.slope));
    }
    let pr = RadialProblem::new(
        2.0,
        2.0,
        Interval::new(0.0, 1.0).unwrap(),
        PotentialSpec::Zero,
    )
    .unwrap();
    let ex = ExhaustionSchedule::default_for(&pr, 30).unwrap();
    let run = point_singularity_solution(&pr, 0.0, 0.25, &ex, &opts).map_err(|e| e.to_string())?;
    let w = Interval::new(20.0 * run.radii.last().unwrap(), 0.05).unwrap();
    let log = singularity_exponent(&run.solution, 0.0, &w, ExponentMode::Log)
        .map_err(|e| e.to_string())?;
    let pow = singularity_exponent(&run.solution, 0.0, &w, ExponentMode::Power)
        .map_err(|e| e.to_string())?;
    // log profile: slope 1 against log(-log r) and a better fit than any power law
    ok &= run.failure.is_none() && (log.slope - 1.0).abs() <= 0.05 && log.residual < pow.residual;
    text.push(format!(
        "p=d=2 log slope {:.4} (rms {:.1e} vs power {:.1e})",
        log.slope, log.residual, pow.residual
    ));
    verdict(ok, text.join("; "))
}

// 9. Minimal-growth certificate.
fn certificate() -> Check {
    let prof = certified_profile(2.0, 16).map_err(|e| e.to_string())?;
    let mu = &prof.certificate.mu;
    let decays = mu.last().unwrap() <= &(1e-3 * mu[0]);
    let ex = ExhaustionSchedule::balls(8.0, 2.0, 16).unwrap();
    let one = Field::from_fn(prof.u.grid().clone(), |_| 1.0);
    let c1 = minimal_growth_certificate(
        &prof.problem,
        &one,
        &prof.omega2,
        &Interval::new(3.0, 4.0).unwrap(),
        &ex,
        &CertificateOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let m1 = &c1.mu;
    let n = m1.len();
    let floor = m1.iter().copied().fold(f64::INFINITY, f64::min);
    let settled = (m1[n - 1] - m1[n - 2]).abs() / m1[n - 1] <= 0.01;
    verdict(
        decays
            && prof.certificate.verdict == Trend::DecayingToZero
            && floor >= 0.1 * m1[0]
            && settled
            && c1.verdict == Trend::BoundedAway,
        format!(
            "1/r: mu {:.3e} -> {:.3e}; u=1: mu {:.3e} -> {:.3e} (min {:.3e})",
            mu[0],
            mu.last().unwrap(),
            m1[0],
            m1[n - 1],
            floor
        ),
    )
}

// 10. Comparison batteries.
fn comparison() -> Check {
    let mut rng = stream(DEFAULT_SEED, "acceptance-wcp");
    let wcp = wcp_battery(&mut rng, 200, 200).map_err(|e| e.to_string())?;
    let mut rng = stream(DEFAULT_SEED, "acceptance-comparison");
    let mut cmp: f64 = 0.0;
    for p in [2.0, 2.5] {
        let prof = certified_profile(p, 14).map_err(|e| e.to_string())?;
        cmp = cmp.max(comparison_battery(&mut rng, &prof, 100).map_err(|e| e.to_string())?);
    }
    verdict(
        wcp <= 1e-8 && cmp <= 1e-8,
        format!(
            "WCP 200 pairs max violation {wcp:.1e}; comparison 200 pairs max violation {cmp:.1e}"
        ),
    )
}

fn timed(f: impl FnOnce() -> Check) -> (Check, Duration) {
    let t = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    (r, t.elapsed())
}

fn main() {
    let secs = Duration::from_secs;
    let plain: [Criterion; 9] = [
        (1, "picone", picone, secs(60)),
        (2, "vector-inequality", vector_inequality, secs(30)),
        (3, "two-sidedness", two_sidedness, secs(120)),
        (4, "eigenvalue", eigenvalue, secs(30)),
        (6, "capacity", capacity, secs(120)),
        (7, "minimal-growth", minimal_growth, secs(300)),
        (8, "singularity-exponents", exponents, secs(300)),
        (9, "certificate", certificate, secs(180)),
        (10, "comparison", comparison, secs(180)),
    ];
    let mut outcomes = Vec::new();
    for (id, name, f, budget) in plain {
        let (r, elapsed) = timed(f);
        outcomes.push(outcome(id, name, r, elapsed, budget));
    }
    let t = Instant::now();
    let (five, eleven) = catch_unwind(dichotomy)
        .unwrap_or_else(|_| (Err("panicked".to_string()), Err("panicked".to_string())));
    let elapsed = t.elapsed();
    outcomes.push(outcome(5, "dichotomy", five, elapsed, secs(600)));
    outcomes.push(outcome(
        11,
        "energy-identity",
        eleven,
        Duration::ZERO,
        secs(600),
    ));
    outcomes.sort_by_key(|o| o.id);

    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!o.passed);
        println!(
            "{tag} {:>2} {:<22} {:>7.1}s  {}",
            o.id,
            o.name,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn outcome(
    id: usize,
    name: &'static str,
    r: Check,
    elapsed: Duration,
    budget: Duration,
) -> Outcome {
    let (mut passed, mut detail) = match r {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > budget {
        passed = false;
        detail.push_str(&format!(" [over the {}s budget]", budget.as_secs()));
    }
    Outcome {
        id,
        name,
        passed,
        detail,
        elapsed,
    }
}
