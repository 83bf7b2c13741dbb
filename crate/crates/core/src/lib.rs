//! Numerical criticality theory for the p-Laplacian with a potential,
//!
//! ```text
//! Q_V(u) = (1/p) * int (|u'|^p + V |u|^p) r^(d-1) dr,
//! ```
//!
//! on radial reductions: energies and Picone-type estimates, Dirichlet
//! solves and principal eigenpairs, exhaustion-based criticality verdicts
//! with ground states and Q-capacity, and solutions of minimal growth with
//! their variational certificates.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod capacity;
pub mod certificate;
pub mod cli;
pub mod config;
pub mod criticality;
pub mod domain;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod mingrowth;
pub mod solver;
pub mod suites;

pub use domain::{
    build_grid, embed, restrict, CompactSetSpec, ExhaustionSchedule, Field, Grid, GridSpec,
    InnerEnd, Interval, PotentialSpec, RadialProblem, Spacing, SpacingLaw,
};
pub use error::{Error, Result};
