//! Problems, grids, nodal fields, exhaustions and compact-set markers.
//!
//! Everything is one dimensional: a radial profile on an interval of the
//! radius `r`, integrated against `r^(d-1) dr` with the angular surface
//! constant dropped. When the inner end of the domain is the origin of
//! `R^d` (a ball rather than an annulus), that node carries no boundary
//! condition: it is a symmetry center with a natural condition.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::Domain(format!("empty interval ({lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// How the inner end `r_lo` of a radial domain is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerEnd {
    /// `r_lo = 0` is the center of a ball: no boundary condition there.
    Center,
    /// `r_lo` is a genuine boundary point (annulus or half line).
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    Zero,
    Constant {
        c: f64,
    },
    /// `c * r^s`
    Power {
        c: f64,
        s: f64,
    },
    /// Smooth bump `height * exp(1 - 1/(1 - x^2))`, `x = (r - center)/radius`.
    Bump {
        center: f64,
        radius: f64,
        height: f64,
    },
    /// Piecewise-linear interpolation of `(r, V)` samples, constant beyond the ends.
    Tabulated {
        samples: Vec<(f64, f64)>,
    },
    /// Linear combination `sum coef_k * V_k`.
    Sum {
        terms: Vec<(f64, PotentialSpec)>,
    },
}

impl PotentialSpec {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant { c } => *c,
            PotentialSpec::Power { c, s } => {
                if *c == 0.0 {
                    0.0
                } else {
                    c * r.powf(*s)
                }
            }
            PotentialSpec::Bump {
                center,
                radius,
                height,
            } => bump(r, *center, *radius) * height,
            PotentialSpec::Tabulated { samples } => interp_table(samples, r),
            PotentialSpec::Sum { terms } => terms
                .iter()
                .filter(|(k, _)| *k != 0.0)
                .map(|(k, v)| k * v.eval(r))
                .sum(),
        }
    }

    /// `self - t * w`
    pub fn minus(&self, t: f64, w: &PotentialSpec) -> PotentialSpec {
        PotentialSpec::Sum {
            terms: vec![(1.0, self.clone()), (-t, w.clone())],
        }
    }

    pub fn scaled(&self, t: f64) -> PotentialSpec {
        PotentialSpec::Sum {
            terms: vec![(t, self.clone())],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Constant { c } => *c == 0.0,
            PotentialSpec::Power { c, .. } => *c == 0.0,
            PotentialSpec::Bump { height, .. } => *height == 0.0,
            PotentialSpec::Tabulated { samples } => samples.iter().all(|s| s.1 == 0.0),
            PotentialSpec::Sum { terms } => terms.iter().all(|(k, v)| *k == 0.0 || v.is_zero()),
        }
    }

    /// Support interval when it is known to be compact.
    pub fn support(&self) -> Option<Interval> {
        match self {
            PotentialSpec::Bump { center, radius, .. } => Some(Interval {
                lo: center - radius,
                hi: center + radius,
            }),
            _ => None,
        }
    }

    /// Values at every node of `grid`. Nodes listed in `skip` (where the
    /// consumer multiplies by an exact zero) are filled with 0 instead of
    /// evaluating.
    pub fn sample(&self, grid: &Grid, skip: &[bool]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        for (i, &r) in grid.nodes().iter().enumerate() {
            if skip.get(i).copied().unwrap_or(false) {
                out.push(0.0);
                continue;
            }
            let v = self.eval(r);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "potential is not finite at r = {r}"
                )));
            }
            out.push(v);
        }
        Ok(out)
    }
}

pub fn bump(r: f64, center: f64, radius: f64) -> f64 {
    let x = (r - center) / radius;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

fn interp_table(samples: &[(f64, f64)], r: f64) -> f64 {
    match samples.len() {
        0 => 0.0,
        1 => samples[0].1,
        n => {
            if r <= samples[0].0 {
                return samples[0].1;
            }
            if r >= samples[n - 1].0 {
                return samples[n - 1].1;
            }
            let k = samples.partition_point(|s| s.0 <= r).max(1);
            let (r0, v0) = samples[k - 1];
            let (r1, v1) = samples[k];
            v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub p: f64,
    /// Ambient dimension; only enters through the weight `r^(d-1)`.
    pub d: f64,
    pub domain: Interval,
    pub inner: InnerEnd,
    pub potential: PotentialSpec,
}

impl RadialProblem {
    /// The inner end defaults to a ball center when `r_lo = 0`.
    pub fn new(p: f64, d: f64, domain: Interval, potential: PotentialSpec) -> Result<Self> {
        let inner = if domain.lo == 0.0 {
            InnerEnd::Center
        } else {
            InnerEnd::Boundary
        };
        Self::with_inner(p, d, domain, inner, potential)
    }

    pub fn with_inner(
        p: f64,
        d: f64,
        domain: Interval,
        inner: InnerEnd,
        potential: PotentialSpec,
    ) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return arg(format!("exponent p must satisfy 1 < p < inf, got {p}"));
        }
        if !(d >= 1.0) || !d.is_finite() {
            return arg(format!("dimension d must be >= 1, got {d}"));
        }
        if !(domain.lo >= 0.0) || !(domain.lo < domain.hi) {
            return Err(Error::Domain(format!(
                "radial domain must satisfy 0 <= r_lo < r_hi, got ({}, {})",
                domain.lo, domain.hi
            )));
        }
        if inner == InnerEnd::Center && domain.lo != 0.0 {
            return Err(Error::Domain("a center inner end requires r_lo = 0".into()));
        }
        Ok(RadialProblem {
            p,
            d,
            domain,
            inner,
            potential,
        })
    }

    pub fn with_potential(&self, potential: PotentialSpec) -> Self {
        RadialProblem {
            potential,
            ..self.clone()
        }
    }

    /// Whether a level starting at `lo` has a free (symmetry) inner node.
    pub fn free_inner(&self, lo: f64) -> bool {
        self.inner == InnerEnd::Center && lo == 0.0
    }

    pub fn check_level(&self, level: &Interval) -> Result<()> {
        if !level.is_bounded() {
            return Err(Error::Domain("levels must be bounded intervals".into()));
        }
        if !self.domain.contains_interval(level) {
            return Err(Error::Domain(format!(
                "level ({}, {}) is not inside the domain ({}, {})",
                level.lo, level.hi, self.domain.lo, self.domain.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum SpacingLaw {
    Uniform,
    /// Constant ratio between consecutive nodes (between consecutive
    /// cell widths when the interval starts at 0).
    Geometric {
        ratio: f64,
    },
    /// Uniform core on `[0, anchor]` followed by the lattice `anchor * 2^(k/m)`.
    Lattice {
        per_octave: usize,
    },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    law: SpacingLaw,
    weight_exponent: f64,
    free_inner: bool,
    cell_measure: Vec<f64>,
    node_mass: Vec<f64>,
}

impl Grid {
    /// Grid over explicit nodes for dimension `d`. `free_inner` marks the
    /// first node as a symmetry center without boundary condition.
    pub fn from_nodes(nodes: Vec<f64>, d: f64, free_inner: bool) -> Result<Self> {
        Self::with_law(nodes, d, free_inner, SpacingLaw::Custom)
    }

    fn with_law(nodes: Vec<f64>, d: f64, free_inner: bool, law: SpacingLaw) -> Result<Self> {
        if nodes.len() < 3 {
            return arg(format!(
                "a grid needs at least 3 nodes, got {}",
                nodes.len()
            ));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return arg("grid nodes must be finite");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return arg("grid nodes must be strictly increasing");
        }
        if nodes[0] < 0.0 {
            return arg("radial grid nodes must be nonnegative");
        }
        if free_inner && nodes[0] != 0.0 {
            return arg("a free inner node must sit at r = 0");
        }
        let cell_measure: Vec<f64> = nodes
            .windows(2)
            .map(|w| radial_measure(w[0], w[1], d))
            .collect();
        if cell_measure.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Domain("nonpositive cell quadrature weight".into()));
        }
        let n = nodes.len();
        let mut node_mass = vec![0.0; n];
        for (c, m) in cell_measure.iter().enumerate() {
            node_mass[c] += 0.5 * m;
            node_mass[c + 1] += 0.5 * m;
        }
        Ok(Grid {
            nodes,
            law,
            weight_exponent: d - 1.0,
            free_inner,
            cell_measure,
            node_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn law(&self) -> SpacingLaw {
        self.law
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn dimension(&self) -> f64 {
        self.weight_exponent + 1.0
    }

    pub fn free_inner(&self) -> bool {
        self.free_inner
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.nodes[0],
            hi: self.nodes[self.nodes.len() - 1],
        }
    }

    /// Radial weight `r^(d-1)` at node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let r = self.nodes[i];
        if self.weight_exponent == 0.0 {
            1.0
        } else {
            r.powf(self.weight_exponent)
        }
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cell_width(&self, c: usize) -> f64 {
        self.nodes[c + 1] - self.nodes[c]
    }

    /// Exact `int r^(d-1) dr` over cell `c`.
    pub fn cell_measure(&self, c: usize) -> f64 {
        self.cell_measure[c]
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measure
    }

    /// Lumped (trapezoid) quadrature weight of node `i`.
    pub fn node_mass(&self, i: usize) -> f64 {
        self.node_mass[i]
    }

    pub fn node_masses(&self) -> &[f64] {
        &self.node_mass
    }

    /// Whether node `i` carries a Dirichlet condition when the grid is a level.
    pub fn is_dirichlet(&self, i: usize) -> bool {
        (i == 0 && !self.free_inner) || i + 1 == self.nodes.len()
    }

    /// Index of the node nearest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x < r);
        if k == 0 {
            0
        } else if k >= self.nodes.len() {
            self.nodes.len() - 1
        } else if (r - self.nodes[k - 1]) <= (self.nodes[k] - r) {
            k - 1
        } else {
            k
        }
    }

    /// Index of a node equal to `r` up to `1e-12` relative, if any.
    pub fn find(&self, r: f64) -> Option<usize> {
        let k = self.nearest(r);
        let tol = 1e-12 * r.abs().max(1e-300);
        ((self.nodes[k] - r).abs() <= tol).then_some(k)
    }

    /// Indices of nodes inside the closed interval.
    pub fn indices_in(&self, window: &Interval) -> std::ops::Range<usize> {
        let a = self.nodes.partition_point(|&x| x < window.lo);
        let b = self.nodes.partition_point(|&x| x <= window.hi);
        a..b.max(a)
    }
}

/// `int_a^b r^(d-1) dr`
pub fn radial_measure(a: f64, b: f64, d: f64) -> f64 {
    if d == 1.0 {
        return b - a;
    }
    // b^d - a^d = a^d * expm1(d * ln(b/a)) keeps precision for thin cells
    if a > 0.0 {
        a.powf(d) * (d * (b / a).ln()).exp_m1() / d
    } else {
        b.powf(d) / d
    }
}

/// Node placement for [`build_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Geometric,
}

/// Grid spanning exactly the closure of `level`.
///
/// Geometric spacing keeps a constant node ratio when `r_lo > 0`. When
/// `r_lo = 0` the first cell has width `1e-3 * length` and the remaining
/// nodes follow a constant ratio up to `r_hi`.
pub fn build_grid(
    problem: &RadialProblem,
    level: &Interval,
    resolution: usize,
    law: Spacing,
) -> Result<Grid> {
    problem.check_level(level)?;
    if resolution < 3 {
        return arg(format!("resolution must be at least 3, got {resolution}"));
    }
    let n = resolution;
    let (a, b) = (level.lo, level.hi);
    let free = problem.free_inner(a);
    match law {
        Spacing::Uniform => {
            let h = (b - a) / (n - 1) as f64;
            let mut nodes: Vec<f64> = (0..n).map(|k| a + h * k as f64).collect();
            nodes[n - 1] = b;
            Grid::with_law(nodes, problem.d, free, SpacingLaw::Uniform)
        }
        Spacing::Geometric => {
            let (start, first, m) = if a > 0.0 {
                (a, None, n - 1)
            } else {
                (1e-3 * (b - a), Some(0.0), n - 2)
            };
            let ratio = (b / start).powf(1.0 / m as f64);
            let mut nodes = Vec::with_capacity(n);
            nodes.extend(first);
            for k in 0..=m {
                nodes.push(start * ratio.powi(k as i32));
            }
            *nodes.last_mut().unwrap() = b;
            Grid::with_law(nodes, problem.d, free, SpacingLaw::Geometric { ratio })
        }
    }
}

/// Recipe for the grids of an exhaustion: shared lattice nodes so that the
/// grid of a level contains every node of a smaller level whose endpoints
/// are lattice points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Lattice nodes per factor-2 increase of `r`.
    pub per_octave: usize,
    /// Uniform cells on `[0, anchor]` for levels starting at the origin.
    pub core_cells: usize,
    pub anchor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            per_octave: 32,
            core_cells: 48,
            anchor: 1.0,
        }
    }
}

impl GridSpec {
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            per_octave: self.per_octave * 2,
            core_cells: self.core_cells * 2,
            anchor: self.anchor,
        }
    }

    pub fn level_grid(&self, problem: &RadialProblem, level: &Interval) -> Result<Grid> {
        problem.check_level(level)?;
        if self.per_octave == 0 || self.core_cells == 0 || !(self.anchor > 0.0) {
            return arg("GridSpec needs per_octave > 0, core_cells > 0, anchor > 0");
        }
        let (a, b) = (level.lo, level.hi);
        let m = self.per_octave as f64;
        let q = 2f64.powf(1.0 / m);
        let min_gap = 0.3 * (q - 1.0);
        let mut nodes = Vec::new();
        if a == 0.0 {
            let h = self.anchor / self.core_cells as f64;
            for k in 0..self.core_cells {
                let x = h * k as f64;
                if x < b {
                    nodes.push(x);
                }
            }
        } else {
            nodes.push(a);
        }
        let k_lo = if a > 0.0 {
            ((a / self.anchor).log2() * m).floor() as i64
        } else {
            0
        };
        let k_hi = ((b / self.anchor).log2() * m).ceil() as i64;
        for k in k_lo..=k_hi {
            let x = self.anchor * 2f64.powf(k as f64 / m);
            let last = *nodes.last().unwrap();
            if x <= last * (1.0 + 1e-12) || x >= b * (1.0 - 1e-12) {
                continue;
            }
            if x < a.max(self.anchor * (1.0 - 1e-12)) && a == 0.0 {
                continue;
            }
            if (x - last) < min_gap * last || (b - x) < min_gap * x {
                continue;
            }
            nodes.push(x);
        }
        if b > *nodes.last().unwrap() {
            nodes.push(b);
        }
        // uniform core ended beyond b: pad so there are at least 3 nodes
        if nodes.len() < 3 {
            return build_grid(
                problem,
                level,
                3 + self.core_cells.min(64),
                Spacing::Uniform,
            );
        }
        Grid::with_law(
            nodes,
            problem.d,
            problem.free_inner(a),
            SpacingLaw::Lattice {
                per_octave: self.per_octave,
            },
        )
    }
}

/// One real value per grid node, piecewise linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return arg(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            ));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Field { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Field {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scaled(&self, t: f64) -> Field {
        self.map(|x| t * x)
    }

    /// Vanishes at every Dirichlet end of the grid.
    pub fn is_compactly_supported(&self) -> bool {
        let n = self.values.len();
        (self.grid.free_inner() || self.values[0] == 0.0) && self.values[n - 1] == 0.0
    }

    /// Piecewise-linear value at `r`; zero outside the grid interval.
    pub fn sample(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        if r < nodes[0] || r > nodes[n - 1] {
            return 0.0;
        }
        let k = nodes.partition_point(|&x| x <= r);
        if k == 0 {
            return self.values[0];
        }
        if k >= n {
            return self.values[n - 1];
        }
        let (r0, r1) = (nodes[k - 1], nodes[k]);
        let t = (r - r0) / (r1 - r0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Maximum of `|self - other|` over `window`, comparing on the nodes of
    /// `self` and interpolating `other`.
    pub fn window_sup_diff(&self, other: &Field, window: &Interval) -> f64 {
        self.grid
            .indices_in(window)
            .map(|i| (self.values[i] - other.sample(self.grid.node(i))).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "node,value")?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{r:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads `(node, value)` rows; the header line is optional.
    pub fn read_csv(r: impl BufRead, d: f64, free_inner: bool) -> Result<Field> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with("node")) {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok()).ok_or(Error::Config {
                    line: k + 1,
                    msg: format!("expected `node,value`, got `{line}`"),
                })
            };
            nodes.push(parse(it.next())?);
            values.push(parse(it.next())?);
        }
        let grid = Arc::new(Grid::from_nodes(nodes, d, free_inner)?);
        Field::new(grid, values)
    }
}

/// Interpolates `field` onto a grid whose interval contains the field's
/// interval, extending by zero outside the source interval.
pub fn embed(field: &Field, target: &Arc<Grid>) -> Result<Field> {
    let src = field.grid().interval();
    let dst = target.interval();
    if !dst.contains_interval(&src) {
        return arg(format!(
            "target ({}, {}) does not contain source ({}, {})",
            dst.lo, dst.hi, src.lo, src.hi
        ));
    }
    Ok(Field::from_fn(target.clone(), |r| field.sample(r)))
}

/// Interpolates `field` onto a grid inside the field's interval.
pub fn restrict(field: &Field, target: &Arc<Grid>) -> Result<Field> {
    let src = field.grid().interval();
    let dst = target.interval();
    if !src.contains_interval(&dst) {
        return arg("restriction target must lie inside the source interval");
    }
    Ok(Field::from_fn(target.clone(), |r| field.sample(r)))
}

/// Nested levels `Omega_N` with reference points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionSchedule {
    pub levels: Vec<Interval>,
    pub x0: f64,
    pub x1: Option<f64>,
}

impl ExhaustionSchedule {
    pub fn new(levels: Vec<Interval>, x0: f64, x1: Option<f64>) -> Result<Self> {
        if levels.is_empty() {
            return arg("an exhaustion needs at least one level");
        }
        for w in levels.windows(2) {
            let (a, b) = (w[0], w[1]);
            let lo_ok = b.lo < a.lo || (a.lo == 0.0 && b.lo == 0.0);
            if !lo_ok || !(b.hi > a.hi) {
                return Err(Error::Domain(format!(
                    "levels are not nested: ({}, {}) then ({}, {})",
                    a.lo, a.hi, b.lo, b.hi
                )));
            }
        }
        let first = levels[0];
        let inside = |x: f64| x >= first.lo && x < first.hi;
        if !inside(x0) {
            return Err(Error::Domain(format!(
                "x0 = {x0} is not in the first level"
            )));
        }
        if let Some(x1) = x1 {
            if !inside(x1) {
                return Err(Error::Domain(format!(
                    "x1 = {x1} is not in the first level"
                )));
            }
        }
        Ok(ExhaustionSchedule { levels, x0, x1 })
    }

    /// Balls `(0, r1 * factor^(N-1))`, `N = 1..=n`.
    pub fn balls(r1: f64, factor: f64, n: usize) -> Result<Self> {
        if !(factor > 1.0) || !(r1 > 0.0) {
            return arg("balls need r1 > 0 and factor > 1");
        }
        let levels = (0..n)
            .map(|k| Interval {
                lo: 0.0,
                hi: r1 * factor.powi(k as i32),
            })
            .collect();
        Self::new(levels, 0.0, None)
    }

    /// Levels around `center` inside `domain`: each finite end is
    /// approached geometrically, each infinite end grows as
    /// `center * factor^N`.
    pub fn around(domain: &Interval, center: f64, factor: f64, n: usize) -> Result<Self> {
        if !(factor > 1.0) || !(center > domain.lo && center < domain.hi) {
            return arg("levels need factor > 1 and a center inside the domain");
        }
        let mut levels = Vec::with_capacity(n);
        for k in 1..=n {
            let f = factor.powi(k as i32);
            let lo = domain.lo + (center - domain.lo) / f;
            let hi = if domain.hi.is_finite() {
                domain.hi - (domain.hi - center) / f
            } else {
                center * f
            };
            levels.push(Interval { lo, hi });
        }
        Self::new(levels, center, None)
    }

    /// Default exhaustion for a problem: doubling balls when the inner end
    /// is a center, doubling annuli around `r_c = 1` otherwise.
    pub fn default_for(problem: &RadialProblem, n: usize) -> Result<Self> {
        let dom = problem.domain;
        if problem.inner == InnerEnd::Center {
            if dom.hi.is_finite() {
                let levels = (1..=n)
                    .map(|k| Interval {
                        lo: 0.0,
                        hi: dom.hi * (1.0 - 0.5f64.powi(k as i32)),
                    })
                    .collect();
                Self::new(levels, 0.0, None)
            } else {
                Self::balls(2.0, 2.0, n)
            }
        } else {
            let center = if dom.hi.is_finite() {
                0.5 * (dom.lo + dom.hi)
            } else {
                dom.lo.max(0.0) + 1.0
            };
            Self::around(&dom, center, 2.0, n)
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn truncated(&self, n: usize) -> Self {
        ExhaustionSchedule {
            levels: self.levels[..n.min(self.levels.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Compact interval `K = [lo, hi]`, optionally with Dirichlet trace values
/// at its two ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactSetSpec {
    pub lo: f64,
    pub hi: f64,
    pub trace: Option<(f64, f64)>,
}

impl CompactSetSpec {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return arg(format!("compact set [{lo}, {hi}] is not an interval"));
        }
        Ok(CompactSetSpec {
            lo,
            hi,
            trace: None,
        })
    }

    pub fn with_trace(mut self, lo_value: f64, hi_value: f64) -> Self {
        self.trace = Some((lo_value, hi_value));
        self
    }

    /// Checks that `K` is strictly inside `level`. A ball `[0, k]` around
    /// the center counts as inside a level starting at the center.
    pub fn check_inside(&self, problem: &RadialProblem, level: &Interval) -> Result<()> {
        let lo_ok = self.lo > level.lo || (self.lo == 0.0 && problem.free_inner(level.lo));
        if !lo_ok || !(self.hi < level.hi) {
            return arg(format!(
                "compact set [{}, {}] touches the boundary of ({}, {})",
                self.lo, self.hi, level.lo, level.hi
            ));
        }
        Ok(())
    }

    pub fn as_interval(&self) -> Interval {
        Interval {
            lo: self.lo,
            hi: self.hi,
        }
    }
}
