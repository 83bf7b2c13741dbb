//! Property tests for invariants that hold for every admissible input.

use std::sync::Arc;

use plap::config::RunConfig;
use plap::energy::{energy_q, picone_cell, vector_inequality_ratio, Support};
use plap::solver::{solve_on_grid, SolverConfig};
use plap::{
    build_grid, embed, restrict, Field, GridSpec, Interval, PotentialSpec, RadialProblem, Spacing,
};
use proptest::prelude::*;

fn annulus(p: f64, d: f64) -> RadialProblem {
    RadialProblem::new(p, d, Interval::new(1.0, 2.0).unwrap(), PotentialSpec::Zero).unwrap()
}

/// Smooth profile vanishing at both ends of (1, 2).
fn profile(coef: &[f64]) -> impl Fn(f64) -> f64 + '_ {
    move |r: f64| {
        let x = r - 1.0;
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let s: f64 = coef
            .iter()
            .enumerate()
            .map(|(k, c)| c * (std::f64::consts::PI * (k + 1) as f64 * x).sin())
            .sum();
        s
    }
}

proptest! {
    #[test]
    fn picone_cell_is_nonnegative(
        p in 1.05f64..8.0,
        u in 0.0f64..10.0,
        v in 1e-3f64..10.0,
        a in -50.0f64..50.0,
        b in -50.0f64..50.0,
    ) {
        let l = picone_cell(u, v, a, b, p);
        let t = u / v;
        let scale = (a.abs().powf(p) + (t * b.abs()).powf(p)) / p;
        prop_assert!(l >= -1e-12 * (1.0 + scale), "L = {l}, scale = {scale}");
    }

    #[test]
    fn picone_cell_vanishes_on_proportional_pairs(
        p in 1.05f64..8.0,
        v in 1e-2f64..10.0,
        b in -20.0f64..20.0,
        c in 0.0f64..5.0,
    ) {
        let l = picone_cell(c * v, v, c * b, b, p);
        let scale = (c * b).abs().powf(p);
        prop_assert!(l.abs() <= 1e-12 * (1.0 + scale), "L = {l}");
    }

    #[test]
    fn vector_ratio_is_one_at_p2(
        a in prop::collection::vec(-1e3f64..1e3, 3),
        b in prop::collection::vec(-1e3f64..1e3, 3),
    ) {
        prop_assume!(b.iter().any(|&x| x != 0.0));
        let r = vector_inequality_ratio(&a, &b, 2.0).unwrap().ratio;
        prop_assert!((r - 1.0).abs() <= 1e-12, "ratio = {r}");
    }

    #[test]
    fn vector_ratio_is_positive_and_finite(
        p in 1.05f64..6.0,
        a in prop::collection::vec(-1e2f64..1e2, 1..5),
        scale in -3.0f64..3.0,
        dir in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let b: Vec<f64> = a.iter().zip(&dir).map(|(_, d)| d * 10f64.powf(scale)).collect();
        prop_assume!(b.iter().any(|&x| x != 0.0));
        let r = vector_inequality_ratio(&a, &b, p).unwrap().ratio;
        prop_assert!(r.is_finite() && r > 0.0, "ratio = {r}");
    }

    #[test]
    fn energy_is_p_homogeneous(
        p in 1.1f64..6.0,
        d in 1u8..=4,
        coef in prop::collection::vec(-2.0f64..2.0, 1..4),
        t in 0.05f64..20.0,
    ) {
        let problem = annulus(p, d as f64);
        let grid = Arc::new(build_grid(&problem, &problem.domain, 300, Spacing::Uniform).unwrap());
        let u = Field::from_fn(grid.clone(), profile(&coef));
        let tu = Field::from_fn(grid, |r| t * profile(&coef)(r));
        let q = energy_q(&u, &problem, Support::Compact).unwrap().total;
        let qt = energy_q(&tu, &problem, Support::Compact).unwrap().total;
        let expect = t.powf(p) * q;
        prop_assert!((qt - expect).abs() <= 1e-12 * expect.abs().max(1e-300), "{qt} vs {expect}");
    }

    #[test]
    fn csv_round_trip_is_exact(
        d in 1u8..=4,
        coef in prop::collection::vec(-1e3f64..1e3, 1..4),
    ) {
        let problem = annulus(2.0, d as f64);
        let grid = Arc::new(build_grid(&problem, &problem.domain, 57, Spacing::Geometric).unwrap());
        let u = Field::from_fn(grid, profile(&coef));
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = Field::read_csv(buf.as_slice(), d as f64, false).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(back.grid().nodes(), u.grid().nodes());
    }

    #[test]
    fn restriction_inverts_embedding_on_nested_levels(
        k in 1usize..6,
        extra in 1usize..4,
        coef in prop::collection::vec(-1.0f64..1.0, 1..4),
    ) {
        let problem = RadialProblem::new(2.0, 3.0, Interval::new(0.0, f64::INFINITY).unwrap(), PotentialSpec::Zero).unwrap();
        let spec = GridSpec::default();
        let small = Interval::new(0.0, 2f64.powi(k as i32)).unwrap();
        let big = Interval::new(0.0, 2f64.powi((k + extra) as i32)).unwrap();
        let gs = Arc::new(spec.level_grid(&problem, &small).unwrap());
        let gb = Arc::new(spec.level_grid(&problem, &big).unwrap());
        let u = Field::from_fn(gs.clone(), |r| profile(&coef)(1.0 + r / small.hi) + 2.0);
        let there = embed(&u, &gb).unwrap();
        let back = restrict(&there, &gs).unwrap();
        prop_assert_eq!(back.values(), u.values());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dirichlet_solutions_scale_with_boundary_data(
        p in 1.5f64..4.0,
        d in 1u8..=3,
        a in 0.1f64..2.0,
        b in 0.1f64..2.0,
        t in 0.1f64..10.0,
    ) {
        let problem = annulus(p, d as f64);
        let grid = Arc::new(build_grid(&problem, &problem.domain, 120, Spacing::Uniform).unwrap());
        let cfg = SolverConfig::default();
        let u = solve_on_grid(&problem, &grid, (a, b), None, None, &cfg).unwrap();
        let ut = solve_on_grid(&problem, &grid, (t * a, t * b), None, None, &cfg).unwrap();
        prop_assert!(u.converged && ut.converged);
        let top = t * a.max(b);
        for (x, y) in u.solution.values().iter().zip(ut.solution.values()) {
            prop_assert!((t * x - y).abs() <= 1e-6 * top, "{} vs {y}", t * x);
        }
    }

    #[test]
    fn ordered_boundary_data_give_ordered_solutions(
        p in 1.5f64..4.0,
        d in 1u8..=3,
        a in 0.0f64..2.0,
        b in 0.0f64..2.0,
        da in 0.0f64..1.0,
        db in 0.0f64..1.0,
        c in 0.0f64..3.0,
    ) {
        let problem = RadialProblem::new(p, d as f64, Interval::new(1.0, 2.0).unwrap(), PotentialSpec::Constant { c }).unwrap();
        let grid = Arc::new(build_grid(&problem, &problem.domain, 120, Spacing::Uniform).unwrap());
        let cfg = SolverConfig::default();
        let lo = solve_on_grid(&problem, &grid, (a, b), None, None, &cfg).unwrap();
        let hi = solve_on_grid(&problem, &grid, (a + da, b + db), None, None, &cfg).unwrap();
        prop_assert!(lo.converged && hi.converged);
        for (x, y) in lo.solution.values().iter().zip(hi.solution.values()) {
            prop_assert!(x - y <= 1e-8, "{x} > {y}");
        }
    }

    #[test]
    fn configs_with_admissible_problems_resolve(
        p in 1.01f64..10.0,
        d in 1u8..=6,
        hi in 0.5f64..100.0,
    ) {
        let src = format!(
            "[problem]\np = {p:?}\nd = {d}\ndomain = [0.0, {hi:?}]\n\n[command]\nkind = \"eig\"\n"
        );
        let rc = RunConfig::parse(&src).unwrap().resolve().unwrap();
        prop_assert_eq!(rc.problem.p, p);
        prop_assert_eq!(rc.problem.domain.hi, hi);
    }

    #[test]
    fn configs_with_p_at_most_one_are_rejected(p in -5.0f64..=1.0) {
        let src = format!("[problem]\np = {p:?}\nd = 2\ndomain = [0.0, 1.0]\n\n[command]\nkind = \"eig\"\n");
        let err = RunConfig::parse(&src).unwrap().resolve().unwrap_err();
        prop_assert!(err.to_string().contains("line 2"), "{err}");
    }
}
