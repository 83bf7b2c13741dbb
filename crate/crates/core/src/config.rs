//! Run configuration: one TOML file, one problem, one command.
//!
//! Parsing and validation errors carry the line of the offending key (or
//! of its table header) so that a malformed config points at itself.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{
    CompactSetSpec, ExhaustionSchedule, GridSpec, InnerEnd, Interval, PotentialSpec, RadialProblem,
    Spacing,
};
use crate::error::{Error, Result};
use crate::mingrowth::MinGrowthOptions;
use crate::solver::SolverConfig;
use crate::suites::Scale;

pub const DEFAULT_LEVELS: usize = 12;
pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    #[serde(default)]
    pub exhaustion: Option<ExhaustionBlock>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub command: Command,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub p: f64,
    pub d: f64,
    /// `[lo, hi]`; `hi = inf` for unbounded domains.
    pub domain: [f64; 2],
    /// Defaults to `center` when `lo = 0`, `boundary` otherwise.
    #[serde(default)]
    pub inner: Option<InnerEnd>,
    #[serde(default = "zero_potential")]
    pub potential: PotentialSpec,
}

fn zero_potential() -> PotentialSpec {
    PotentialSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExhaustionBlock {
    /// Doubling balls, or doubling annuli around an interior center.
    Default {
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Balls {
        r1: f64,
        #[serde(default = "two")]
        factor: f64,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Around {
        center: f64,
        #[serde(default = "two")]
        factor: f64,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Explicit {
        intervals: Vec<[f64; 2]>,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        x1: Option<f64>,
    },
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

fn two() -> f64 {
    2.0
}

fn default_nodes() -> usize {
    2000
}

fn default_cauchy_tol() -> f64 {
    MinGrowthOptions::default().cauchy_tol
}

fn unit_trace() -> [f64; 2] {
    [1.0, 1.0]
}

fn uniform() -> Spacing {
    Spacing::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Command {
    /// Principal eigenpair on `level` (the domain when omitted).
    Eig {
        #[serde(default)]
        level: Option<[f64; 2]>,
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "uniform")]
        spacing: Spacing,
    },
    /// Dirichlet solve of `Q'_V(u) = f` on `level`.
    Solve {
        #[serde(default)]
        level: Option<[f64; 2]>,
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "uniform")]
        spacing: Spacing,
        #[serde(default)]
        boundary: [f64; 2],
        #[serde(default)]
        load: Option<PotentialSpec>,
    },
    /// Criticality verdict along the exhaustion.
    Critical {
        #[serde(default)]
        probe: Option<PotentialSpec>,
        /// Also refine the ground state when the verdict is critical.
        #[serde(default)]
        ground_state: bool,
    },
    /// Q-capacity of `set` along the exhaustion.
    Capacity { set: [f64; 2] },
    /// `u^K` limit for `set` with `trace`, or the point-singularity
    /// solution at `x0` normalized at `x1`.
    Mingrowth {
        #[serde(default)]
        set: Option<[f64; 2]>,
        #[serde(default = "unit_trace")]
        trace: [f64; 2],
        #[serde(default)]
        x0: Option<f64>,
        #[serde(default)]
        x1: Option<f64>,
        /// Distances from `x0` for the exponent fit.
        #[serde(default)]
        fit_window: Option<[f64; 2]>,
        /// Sup-norm change between the last two levels accepted as converged.
        #[serde(default = "default_cauchy_tol")]
        cauchy_tol: f64,
    },
    /// Minimal-growth certificate of `u^K` with `Omega_2 = set` and
    /// normalization set `b`.
    Certify {
        set: [f64; 2],
        #[serde(default = "unit_trace")]
        trace: [f64; 2],
        b: [f64; 2],
    },
    /// Built-in property suites.
    Validate {
        #[serde(default = "reduced")]
        scale: Scale,
    },
}

fn reduced() -> Scale {
    Scale::Reduced
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eig { .. } => "eig",
            Command::Solve { .. } => "solve",
            Command::Critical { .. } => "critical",
            Command::Capacity { .. } => "capacity",
            Command::Mingrowth { .. } => "mingrowth",
            Command::Certify { .. } => "certify",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Validated configuration, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: RadialProblem,
    pub exhaustion: ExhaustionSchedule,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub command: Command,
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map_or(0, |s| line_at(source, s.start));
            Error::Config {
                line,
                msg: e.message().trim().to_string(),
            }
        })?;
        cfg.source = source.to_string();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Replaces the solver tolerance.
    pub fn override_tol(&mut self, tol: f64) {
        self.solver.tol = Some(tol);
    }

    /// Replaces the number of exhaustion levels (explicit lists are truncated).
    pub fn override_levels(&mut self, n: usize) {
        self.exhaustion = Some(match self.exhaustion.take() {
            None | Some(ExhaustionBlock::Default { .. }) => ExhaustionBlock::Default { levels: n },
            Some(ExhaustionBlock::Balls { r1, factor, .. }) => ExhaustionBlock::Balls {
                r1,
                factor,
                levels: n,
            },
            Some(ExhaustionBlock::Around { center, factor, .. }) => ExhaustionBlock::Around {
                center,
                factor,
                levels: n,
            },
            Some(ExhaustionBlock::Explicit {
                mut intervals,
                x0,
                x1,
            }) => {
                intervals.truncate(n);
                ExhaustionBlock::Explicit { intervals, x0, x1 }
            }
        });
    }

    fn at(&self, table: &str, key: &str, e: impl std::fmt::Display) -> Error {
        Error::Config {
            line: line_of(&self.source, table, key),
            msg: e.to_string(),
        }
    }

    /// Checks the config against itself and builds the run objects.
    pub fn resolve(&self) -> Result<Resolved> {
        let pb = &self.problem;
        if !(pb.p > 1.0) || !pb.p.is_finite() {
            return Err(self.at(
                "problem",
                "p",
                format!("p must be a finite number > 1, got {}", pb.p),
            ));
        }
        if !(pb.d >= 1.0) || !pb.d.is_finite() || pb.d.fract() != 0.0 {
            return Err(self.at(
                "problem",
                "d",
                format!("d must be an integer >= 1, got {}", pb.d),
            ));
        }
        let domain = Interval::new(pb.domain[0], pb.domain[1])
            .map_err(|e| self.at("problem", "domain", e))?;
        let problem = match pb.inner {
            Some(inner) => {
                RadialProblem::with_inner(pb.p, pb.d, domain, inner, pb.potential.clone())
            }
            None => RadialProblem::new(pb.p, pb.d, domain, pb.potential.clone()),
        }
        .map_err(|e| self.at("problem", "domain", e))?;
        let exhaustion = self.exhaustion(&problem)?;
        for level in &exhaustion.levels {
            problem
                .check_level(level)
                .map_err(|e| self.at("exhaustion", "kind", e))?;
        }
        if self.solver.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(self.at("solver", "tol", "tol must be positive"));
        }
        self.check_command(&problem, &exhaustion)?;
        Ok(Resolved {
            problem,
            exhaustion,
            grid: self.grid,
            solver: self.solver,
            command: self.command.clone(),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        })
    }

    fn exhaustion(&self, problem: &RadialProblem) -> Result<ExhaustionSchedule> {
        let at = |e: Error| self.at("exhaustion", "kind", e);
        let levels_ok = |n: usize| {
            if n == 0 {
                Err(self.at("exhaustion", "levels", "levels must be at least 1"))
            } else {
                Ok(n)
            }
        };
        match &self.exhaustion {
            None => ExhaustionSchedule::default_for(problem, DEFAULT_LEVELS).map_err(at),
            Some(ExhaustionBlock::Default { levels }) => {
                ExhaustionSchedule::default_for(problem, levels_ok(*levels)?).map_err(at)
            }
            Some(ExhaustionBlock::Balls { r1, factor, levels }) => {
                if problem.inner != InnerEnd::Center {
                    return Err(self.at(
                        "exhaustion",
                        "kind",
                        "balls need a domain starting at the center r = 0",
                    ));
                }
                ExhaustionSchedule::balls(*r1, *factor, levels_ok(*levels)?).map_err(at)
            }
            Some(ExhaustionBlock::Around {
                center,
                factor,
                levels,
            }) => {
                ExhaustionSchedule::around(&problem.domain, *center, *factor, levels_ok(*levels)?)
                    .map_err(at)
            }
            Some(ExhaustionBlock::Explicit { intervals, x0, x1 }) => {
                let levels = intervals
                    .iter()
                    .map(|iv| Interval::new(iv[0], iv[1]))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| self.at("exhaustion", "intervals", e))?;
                ExhaustionSchedule::new(levels, *x0, *x1)
                    .map_err(|e| self.at("exhaustion", "intervals", e))
            }
        }
    }

    fn check_command(
        &self,
        problem: &RadialProblem,
        exhaustion: &ExhaustionSchedule,
    ) -> Result<()> {
        let level_of = |level: &Option<[f64; 2]>| -> Result<Interval> {
            let iv = match level {
                Some(l) => Interval::new(l[0], l[1]).map_err(|e| self.at("command", "level", e))?,
                None => problem.domain,
            };
            problem
                .check_level(&iv)
                .map_err(|e| self.at("command", "level", e))?;
            Ok(iv)
        };
        let set_of = |s: &[f64; 2], key: &str| -> Result<CompactSetSpec> {
            let k = CompactSetSpec::new(s[0], s[1]).map_err(|e| self.at("command", key, e))?;
            let last = exhaustion.levels[exhaustion.len() - 1];
            k.check_inside(problem, &last)
                .map_err(|e| self.at("command", key, e))?;
            Ok(k)
        };
        let trace_ok = |t: &[f64; 2]| {
            if t[0] > 0.0 && t[1] > 0.0 && t.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(self.at("command", "trace", "trace values must be positive"))
            }
        };
        match &self.command {
            Command::Eig { level, nodes, .. } | Command::Solve { level, nodes, .. } => {
                level_of(level)?;
                if *nodes < 3 {
                    return Err(self.at("command", "nodes", "nodes must be at least 3"));
                }
                if let Command::Solve { boundary, .. } = &self.command {
                    if boundary.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
                        return Err(self.at(
                            "command",
                            "boundary",
                            "boundary values must be finite and >= 0",
                        ));
                    }
                }
            }
            Command::Critical { .. } | Command::Validate { .. } => {}
            Command::Capacity { set } => {
                set_of(set, "set")?;
            }
            Command::Mingrowth {
                set,
                trace,
                x0,
                x1,
                cauchy_tol,
                ..
            } => match (set, x0) {
                _ if !(*cauchy_tol > 0.0) => {
                    return Err(self.at(
                        "command",
                        "cauchy_tol",
                        format!("cauchy_tol must be positive, got {cauchy_tol}"),
                    ));
                }
                (Some(s), None) => {
                    set_of(s, "set")?;
                    trace_ok(trace)?;
                }
                (None, Some(_)) => {
                    if x1.is_none() {
                        return Err(self.at(
                            "command",
                            "x0",
                            "a point singularity needs x1 as well",
                        ));
                    }
                }
                _ => {
                    return Err(self.at(
                        "command",
                        "kind",
                        "mingrowth needs exactly one of `set` or `x0`",
                    ));
                }
            },
            Command::Certify { set, trace, b } => {
                set_of(set, "set")?;
                trace_ok(trace)?;
                Interval::new(b[0], b[1]).map_err(|e| self.at("command", "b", e))?;
            }
        }
        Ok(())
    }
}

/// 1-based line of byte offset `pos`.
fn line_at(src: &str, pos: usize) -> usize {
    src[..pos.min(src.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[table]`, else of the table header, else 0.
fn line_of(src: &str, table: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = 0;
    for (k, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == table {
                header = k + 1;
            }
            continue;
        }
        if current == table {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return k + 1;
                }
            }
        }
    }
    header
}
