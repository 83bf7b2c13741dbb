//! Batch front end: resolves a [`RunConfig`], dispatches its command and
//! writes `report.json` plus CSV profiles into the output directory.
//!
//! Exit codes: 0 success, 1 config or validation failure, 2 solver
//! non-convergence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::capacity::capacity_sequence;
use crate::certificate::{minimal_growth_certificate, CertificateOptions};
use crate::config::{Command, Resolved, RunConfig};
use crate::criticality::{
    criticality_verdict, default_probe, ground_state, CriticalityOptions, Verdict,
};
use crate::domain::{build_grid, CompactSetSpec, Field, Interval};
use crate::eigen::{principal_eigenpair, EigenOptions};
use crate::error::{Error, Result};
use crate::mingrowth::{
    point_singularity_solution, removability_test, singularity_exponent, uk_limit, ExponentMode,
    MinGrowthOptions,
};
use crate::solver::{classify_sign, solve_dirichlet, Checked};
use crate::suites::run_suites;

pub const DEFAULT_OUT: &str = "plap-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Failure,
    NonConvergence,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::NonConvergence => 2,
        }
    }

    pub fn for_error(e: &Error) -> ExitStatus {
        match e {
            Error::NonConvergence(_) => ExitStatus::NonConvergence,
            _ => ExitStatus::Failure,
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: ExitStatus,
    pub report: Value,
    pub out_dir: PathBuf,
    /// Files written, report first.
    pub files: Vec<PathBuf>,
}

/// What a command produced before it is wrapped into the report.
struct CommandOutput {
    result: Value,
    status: ExitStatus,
    csv: Vec<(&'static str, String)>,
}

/// Lowercase hex SHA-256 of the config text.
pub fn config_hash(source: &str) -> String {
    let digest = Sha256::digest(source.as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("writing to a String");
    }
    s
}

/// Loads, resolves and runs a config file. Config errors are returned;
/// errors raised by the command itself end up in the report.
pub fn run_file(path: &Path, ov: &Overrides) -> Result<Outcome> {
    run(RunConfig::load(path)?, ov)
}

pub fn run(mut cfg: RunConfig, ov: &Overrides) -> Result<Outcome> {
    if let Some(t) = ov.tol {
        if !(t > 0.0) {
            return Err(Error::Argument(format!("--tol must be positive, got {t}")));
        }
        cfg.override_tol(t);
    }
    if let Some(n) = ov.levels {
        if n == 0 {
            return Err(Error::Argument("--levels must be at least 1".into()));
        }
        cfg.override_levels(n);
    }
    if let Some(s) = ov.seed {
        cfg.seed = Some(s);
    }
    let out_dir = ov
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let rc = cfg.resolve()?;

    let (status, body, csv) = match dispatch(&rc) {
        Ok(o) => (
            o.status,
            json!({ "status": status_name(o.status), "result": o.result }),
            o.csv,
        ),
        Err(e) => {
            let status = ExitStatus::for_error(&e);
            (
                status,
                json!({ "status": status_name(status), "error": e.to_string() }),
                Vec::new(),
            )
        }
    };
    let mut report = json!({
        "command": rc.command.name(),
        "config_sha256": config_hash(cfg.source()),
        "seed": rc.seed,
        "tolerances": {
            "solver_tol": rc.solver.tol_for(rc.problem.p),
            "max_newton": rc.solver.max_newton,
            "eps_start": rc.solver.eps_start,
            "eps_end": rc.solver.eps_end,
            "eps_factor": rc.solver.eps_factor,
        },
        "problem": rc.problem,
        "grid": rc.grid,
    });
    if matches!(
        rc.command,
        Command::Critical { .. }
            | Command::Capacity { .. }
            | Command::Mingrowth { .. }
            | Command::Certify { .. }
    ) {
        report["levels"] = json!(rc
            .exhaustion
            .levels
            .iter()
            .map(|l| [l.lo, l.hi])
            .collect::<Vec<_>>());
    }
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }

    std::fs::create_dir_all(&out_dir)?;
    let report_path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&report_path, text + "\n")?;
    let mut files = vec![report_path];
    for (name, content) in csv {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        files.push(path);
    }
    Ok(Outcome {
        status,
        report,
        out_dir,
        files,
    })
}

fn converged(ok: bool) -> ExitStatus {
    if ok {
        ExitStatus::Success
    } else {
        ExitStatus::NonConvergence
    }
}

fn status_name(s: ExitStatus) -> &'static str {
    match s {
        ExitStatus::Success => "ok",
        ExitStatus::Failure => "failed",
        ExitStatus::NonConvergence => "not-converged",
    }
}

fn field_csv(f: &Field) -> String {
    let mut buf = Vec::new();
    f.write_csv(&mut buf).expect("writing to a Vec");
    String::from_utf8(buf).expect("csv is ascii")
}

fn interval(a: &[f64; 2]) -> Result<Interval> {
    Interval::new(a[0], a[1])
}

fn dispatch(rc: &Resolved) -> Result<CommandOutput> {
    let problem = &rc.problem;
    let ex = &rc.exhaustion;
    let mg_opts = MinGrowthOptions {
        grid: rc.grid,
        solver: rc.solver,
        ..Default::default()
    };
    match &rc.command {
        Command::Eig {
            level,
            nodes,
            spacing,
        } => {
            let lv = level.map_or(Ok(problem.domain), |l| interval(&l))?;
            let grid = Arc::new(build_grid(problem, &lv, *nodes, *spacing)?);
            let eig = principal_eigenpair(problem, &grid, &rc.solver, &EigenOptions::default())?;
            Ok(CommandOutput {
                result: json!({
                    "lambda": eig.lambda,
                    "iterations": eig.iterations,
                    "converged": eig.converged,
                    "shift": eig.shift,
                }),
                status: converged(eig.converged),
                csv: vec![("eigenfunction.csv", field_csv(&eig.eigenfunction))],
            })
        }
        Command::Solve {
            level,
            nodes,
            spacing,
            boundary,
            load,
        } => {
            let lv = level.map_or(Ok(problem.domain), |l| interval(&l))?;
            let grid = Arc::new(build_grid(problem, &lv, *nodes, *spacing)?);
            let f = load
                .as_ref()
                .map(|spec| Field::from_fn(grid.clone(), |r| spec.eval(r)));
            let rep = solve_dirichlet(
                problem,
                &grid,
                (boundary[0], boundary[1]),
                f.as_ref(),
                &rc.solver,
                Checked::Yes,
            )?;
            let sign = if load.is_none() {
                Some(classify_sign(
                    &rep.solution,
                    problem,
                    10.0 * rc.solver.tol_for(problem.p),
                )?)
            } else {
                None
            };
            Ok(CommandOutput {
                result: json!({
                    "final_residual_norm": rep.final_residual_norm,
                    "iterations": rep.iterations,
                    "regularization_eps_final": rep.regularization_eps_final,
                    "converged": rep.converged,
                    "sign": sign,
                }),
                status: converged(rep.converged),
                csv: vec![("solution.csv", field_csv(&rep.solution))],
            })
        }
        Command::Critical {
            probe,
            ground_state: want_gs,
        } => {
            let probe = probe.clone().unwrap_or_else(|| default_probe(ex));
            let opts = CriticalityOptions {
                grid: rc.grid,
                solver: rc.solver,
                ..Default::default()
            };
            let report = criticality_verdict(problem, ex, &probe, &opts)?;
            let mut csv = String::from("level,lo,hi,t,energy,identity_error\n");
            for (k, (n, t)) in report.thresholds.iter().enumerate() {
                let l = report.levels[k];
                writeln!(
                    csv,
                    "{n},{:.17e},{:.17e},{t:.17e},{:.17e},{:.17e}",
                    l.lo, l.hi, report.energies[k], report.identity_errors[k]
                )
                .expect("writing to a String");
            }
            let mut files = vec![("thresholds.csv", csv)];
            let mut result = json!({ "probe": probe, "report": report });
            if let Some(gs) = &report.ground_state {
                files.push(("ground_state.csv", field_csv(gs)));
            }
            if *want_gs && report.verdict == Verdict::Critical {
                let gs = ground_state(problem, ex, &probe, &opts)?;
                result["ground_state"] = json!({
                    "refinement_diff": gs.refinement_diff,
                    "sign": gs.sign,
                });
            }
            Ok(CommandOutput {
                result,
                status: converged(report.failure.is_none()),
                csv: files,
            })
        }
        Command::Capacity { set } => {
            let k = CompactSetSpec::new(set[0], set[1])?;
            let caps = capacity_sequence(problem, &k, ex, &rc.grid, &rc.solver)?;
            let mut csv = String::from("level,lo,hi,capacity,active_nodes,residual,converged\n");
            for (n, c) in caps.iter().enumerate() {
                writeln!(
                    csv,
                    "{},{:.17e},{:.17e},{:.17e},{},{:.17e},{}",
                    n + 1,
                    c.level.lo,
                    c.level.hi,
                    c.value,
                    c.active_nodes,
                    c.residual,
                    c.converged
                )
                .expect("writing to a String");
            }
            if let Some(last) = caps.last() {
                let profile = field_csv(&last.minimizer);
                let ok = caps.iter().all(|c| c.converged);
                return Ok(CommandOutput {
                    result: json!({ "set": k, "levels": caps }),
                    status: converged(ok),
                    csv: vec![("capacity.csv", csv), ("capacity_minimizer.csv", profile)],
                });
            }
            Err(Error::Argument(
                "no level contains the set strictly inside".into(),
            ))
        }
        Command::Mingrowth {
            set: Some(set),
            trace,
            cauchy_tol,
            ..
        } => {
            let mg_opts = MinGrowthOptions {
                cauchy_tol: *cauchy_tol,
                ..mg_opts
            };
            let k = CompactSetSpec::new(set[0], set[1])?.with_trace(trace[0], trace[1]);
            let run = uk_limit(problem, &k, ex, &mg_opts)?;
            let mut csv = String::from("level,lo,hi,monotonicity,cauchy\n");
            for (n, l) in run.levels.iter().enumerate() {
                let mono = if n == 0 {
                    f64::NAN
                } else {
                    run.monotonicity[n - 1]
                };
                let cauchy = if n == 0 { f64::NAN } else { run.cauchy[n - 1] };
                writeln!(
                    csv,
                    "{},{:.17e},{:.17e},{mono:.17e},{cauchy:.17e}",
                    n + 1,
                    l.lo,
                    l.hi
                )
                .expect("writing to a String");
            }
            Ok(CommandOutput {
                result: json!(run),
                status: converged(run.converged && run.failure.is_none()),
                csv: vec![("levels.csv", csv), ("limit.csv", field_csv(&run.limit))],
            })
        }
        Command::Mingrowth {
            x0: Some(x0),
            x1: Some(x1),
            fit_window,
            cauchy_tol,
            ..
        } => {
            let mg_opts = MinGrowthOptions {
                cauchy_tol: *cauchy_tol,
                ..mg_opts
            };
            let run = point_singularity_solution(problem, *x0, *x1, ex, &mg_opts)?;
            let rho = *run.radii.last().expect("run has at least one level");
            let window = match fit_window {
                Some(w) => interval(w),
                None => Interval::new(20.0 * rho, 0.05 * (x1 - x0).abs()),
            };
            let mode = if problem.p == problem.d {
                ExponentMode::Log
            } else {
                ExponentMode::Power
            };
            let fit = if problem.p > problem.d {
                json!({ "error": "p > d: the profile stays bounded at x0, no blow-up rate to fit" })
            } else {
                match window.and_then(|w| {
                    singularity_exponent(&run.solution, *x0, &w, mode).map(|f| (w, f))
                }) {
                    Ok((w, f)) => {
                        json!({ "mode": format!("{mode:?}").to_lowercase(), "window": [w.lo, w.hi], "fit": f })
                    }
                    Err(e) => json!({ "error": e.to_string() }),
                }
            };
            let removability = match run
                .punctured()
                .and_then(|u| removability_test(problem, &u, *x0, rc.solver.tol_for(problem.p)))
            {
                Ok(r) => json!(r),
                Err(e) => json!({ "error": e.to_string() }),
            };
            let mut csv = String::from("level,lo,hi,rho,cauchy\n");
            for (n, l) in run.levels.iter().enumerate() {
                let cauchy = if n == 0 { f64::NAN } else { run.cauchy[n - 1] };
                writeln!(
                    csv,
                    "{},{:.17e},{:.17e},{:.17e},{cauchy:.17e}",
                    n + 1,
                    l.lo,
                    l.hi,
                    run.radii[n]
                )
                .expect("writing to a String");
            }
            // log mode fits log u against log(-log s), whose slope is 1 for p = d
            let expected = if problem.p == problem.d {
                1.0
            } else {
                (problem.p - problem.d) / (problem.p - 1.0)
            };
            Ok(CommandOutput {
                result: json!({
                    "x0": x0,
                    "x1": x1,
                    "radii": run.radii,
                    "cauchy": run.cauchy,
                    "failure": run.failure,
                    "fit": fit,
                    "expected_slope": expected,
                    "removability": removability,
                }),
                status: converged(run.failure.is_none()),
                csv: vec![
                    ("levels.csv", csv),
                    ("solution.csv", field_csv(&run.solution)),
                ],
            })
        }
        Command::Mingrowth { .. } => Err(Error::Argument(
            "mingrowth needs `set` or `x0` and `x1`".into(),
        )),
        Command::Certify { set, trace, b } => {
            if ex.len() < 2 {
                return Err(Error::Argument("certify needs at least two levels".into()));
            }
            let k = CompactSetSpec::new(set[0], set[1])?.with_trace(trace[0], trace[1]);
            let run = uk_limit(problem, &k, ex, &mg_opts)?;
            if let Some((n, msg)) = &run.failure {
                return Err(Error::NonConvergence(format!("u^K at level {n}: {msg}")));
            }
            let omega2 = CompactSetSpec::new(set[0], set[1])?;
            let cert_opts = CertificateOptions {
                grid: rc.grid,
                ..Default::default()
            };
            let cert = minimal_growth_certificate(
                problem,
                &run.limit,
                &omega2,
                &interval(b)?,
                &ex.truncated(ex.len() - 1),
                &cert_opts,
            )?;
            let mut csv = String::from("level,lo,hi,mu,normalization_error\n");
            for (n, l) in cert.levels.iter().enumerate() {
                writeln!(
                    csv,
                    "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                    n + 1,
                    l.lo,
                    l.hi,
                    cert.mu[n],
                    cert.normalization_errors[n]
                )
                .expect("writing to a String");
            }
            Ok(CommandOutput {
                result: json!(cert),
                status: converged(true),
                csv: vec![
                    ("certificate.csv", csv),
                    ("profile.csv", field_csv(&run.limit)),
                ],
            })
        }
        Command::Validate { scale } => {
            let outcomes = run_suites(rc.seed, *scale);
            let mut csv = String::from("name,passed,samples,worst\n");
            for o in &outcomes {
                writeln!(
                    csv,
                    "{},{},{},{:.17e}",
                    o.name, o.passed, o.samples, o.worst
                )
                .expect("writing to a String");
            }
            let failed: Vec<&str> = outcomes
                .iter()
                .filter(|o| !o.passed)
                .map(|o| o.name.as_str())
                .collect();
            Ok(CommandOutput {
                result: json!({ "scale": scale, "failed": failed, "suites": outcomes }),
                status: if failed.is_empty() {
                    ExitStatus::Success
                } else {
                    ExitStatus::Failure
                },
                csv: vec![("suites.csv", csv)],
            })
        }
    }
}
