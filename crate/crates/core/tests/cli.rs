//! End-to-end runs of the `plap` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn plap(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("out/report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const EIG: &str = r#"
[problem]
p = 2.0
d = 1
domain = [0.0, 1.0]
inner = "boundary"

[command]
kind = "eig"
nodes = 2000
"#;

#[test]
fn eig_reports_dirichlet_eigenvalue_of_unit_interval() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), EIG, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path());
    let lambda = r["result"]["lambda"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() < 1e-3 * pi2, "lambda = {lambda}");
    assert_eq!(r["command"], "eig");
    assert_eq!(r["status"], "ok");

    let csv = std::fs::read_to_string(dir.path().join("out/eigenfunction.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("node,value"));
    assert_eq!(lines.count(), 2000);
}

#[test]
fn report_embeds_config_hash_and_tolerances() {
    // known-answer vector for SHA-256
    assert_eq!(
        plap::cli::config_hash("abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), EIG, &["--tol", "1e-9"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(dir.path());
    assert_eq!(r["config_sha256"], plap::cli::config_hash(EIG));
    assert_eq!(r["tolerances"]["solver_tol"].as_f64(), Some(1e-9));
    assert!(r["tolerances"]["max_newton"].as_u64().is_some());
}

#[test]
fn critical_free_line_in_one_dimension() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[problem]
p = 2.0
d = 1
domain = [0.0, inf]

[exhaustion]
kind = "balls"
r1 = 2.0
levels = 12

[command]
kind = "critical"
"#;
    let out = plap(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path());
    assert_eq!(r["result"]["report"]["verdict"], "critical");
    assert_eq!(r["levels"].as_array().unwrap().len(), 12);
    let thresholds = std::fs::read_to_string(dir.path().join("out/thresholds.csv")).unwrap();
    assert_eq!(
        thresholds.lines().next(),
        Some("level,lo,hi,t,energy,identity_error")
    );
    assert_eq!(thresholds.lines().count(), 13);
    assert!(dir.path().join("out/ground_state.csv").exists());
}

#[test]
fn levels_override_shortens_exhaustion() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[problem]
p = 2.0
d = 3
domain = [0.0, inf]

[exhaustion]
kind = "balls"
r1 = 2.0
levels = 12

[command]
kind = "capacity"
set = [0.0, 1.0]
"#;
    let out = plap(dir.path(), cfg, &["--levels", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path());
    assert_eq!(r["levels"].as_array().unwrap().len(), 5);
    let caps = std::fs::read_to_string(dir.path().join("out/capacity.csv")).unwrap();
    assert_eq!(caps.lines().count(), 6);
}

#[test]
fn missing_p_is_a_usage_error_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = "[problem]\nd = 1\ndomain = [0.0, 1.0]\n\n[command]\nkind = \"eig\"\n";
    let out = plap(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 1") && err.contains("`p`"), "{err}");
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn unknown_command_is_reported_at_its_line() {
    let dir = TempDir::new().unwrap();
    let cfg = "[problem]\np = 2.0\nd = 1\ndomain = [0.0, 1.0]\n\n[command]\nkind = \"plot\"\n";
    let out = plap(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn inconsistent_interval_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = "[problem]\np = 2.0\nd = 1\ndomain = [0.0, 1.0]\n\n[command]\nkind = \"eig\"\nlevel = [0.0, 2.0]\n";
    let out = plap(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 8"), "{}", stderr(&out));
}

#[test]
fn non_integer_dimension_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = "[problem]\np = 2.0\nd = 2.5\ndomain = [0.0, 1.0]\n\n[command]\nkind = \"eig\"\n";
    let out = plap(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn starved_newton_exits_with_nonconvergence() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"
[problem]
p = 1.3
d = 2
domain = [0.0, 1.0]

[solver]
max_newton = 1
eps_start = 1e-8

[command]
kind = "solve"
boundary = [0.0, 1.0]
load = { kind = "constant", c = 50.0 }
"#;
    let out = plap(dir.path(), cfg, &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(report(dir.path())["status"], "not-converged");
}

#[test]
fn identical_config_gives_byte_identical_csv() {
    let cfg = r#"
[problem]
p = 3.0
d = 2
domain = [0.0, 4.0]

[command]
kind = "solve"
nodes = 400
spacing = "geometric"
boundary = [0.0, 1.0]
load = { kind = "bump", center = 2.0, radius = 0.5, height = 1.0 }
"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(plap(a.path(), cfg, &[]).status.success());
    assert!(plap(b.path(), cfg, &[]).status.success());
    let ca = std::fs::read(a.path().join("out/solution.csv")).unwrap();
    let cb = std::fs::read(b.path().join("out/solution.csv")).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(
        std::fs::read(a.path().join("out/report.json")).unwrap(),
        std::fs::read(b.path().join("out/report.json")).unwrap()
    );
}

const VALIDATE: &str =
    "[problem]\np = 2.0\nd = 1\ndomain = [0.0, 1.0]\n\n[command]\nkind = \"validate\"\n";

fn suites_csv(dir: &Path) -> Vec<(String, String, String)> {
    std::fs::read_to_string(dir.join("out/suites.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[3].to_string())
        })
        .collect()
}

#[test]
fn validate_passes_and_seed_changes_draws_only() {
    let a = TempDir::new().unwrap();
    let out = plap(a.path(), VALIDATE, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(a.path());
    assert_eq!(r["seed"].as_u64(), Some(plap::config::DEFAULT_SEED));
    let default = suites_csv(a.path());

    let names: Vec<&str> = default.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(names, plap::suites::SUITES);
    assert_eq!(
        names,
        [
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
        ]
    );
    assert!(default.iter().all(|s| s.1 == "true"), "{default:?}");

    let b = TempDir::new().unwrap();
    assert_eq!(
        plap(b.path(), VALIDATE, &["--seed", "7"]).status.code(),
        Some(0)
    );
    let c = TempDir::new().unwrap();
    assert_eq!(
        plap(c.path(), VALIDATE, &["--seed", "7"]).status.code(),
        Some(0)
    );
    let seeded = suites_csv(b.path());
    assert_eq!(seeded, suites_csv(c.path()));
    assert_eq!(report(b.path())["seed"].as_u64(), Some(7));
    assert!(seeded.iter().all(|s| s.1 == "true"), "{seeded:?}");
    // the randomized batteries draw different samples under another seed
    let differs = default
        .iter()
        .zip(&seeded)
        .filter(|(x, y)| x.2 != y.2)
        .count();
    assert!(differs >= 3, "{default:?} vs {seeded:?}");
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = plap::config::RunConfig::load(&path).unwrap();
            cfg.resolve()
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 9, "found {seen} configs");
}
