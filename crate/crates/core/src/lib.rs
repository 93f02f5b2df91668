//! Convergence analysis and validation of multigrid methods built on
//! additive Schwarz smoothers.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`discretization`] assembles infinite-grid stencils for Qp Poisson
//!    and the Q2-Q1 Biot poroelasticity system.
//! 2. [`schwarz`] describes periodic patterns of overlapping blocks with
//!    additive (AS) or restricted additive (RAS) weighting.
//! 3. [`lfa`] turns stencils, blocks and grid transfers into dense
//!    Bloch-window symbols, sweeps frequencies and reports the predicted
//!    asymptotic two-grid convergence factor.
//! 4. [`solver`] runs the same smoothers inside an actual geometric
//!    multigrid solver on finite Dirichlet grids so predictions can be
//!    checked against measured factors.
//! 5. [`optimize`] searches smoother weights that minimize the predicted
//!    factor.
//! 6. [`report`] packages well-known benchmark configurations as tables
//!    with golden-value comparison.

extern crate blas_src;

pub mod discretization;
pub mod error;
pub mod lfa;
pub mod linalg;
pub mod optimize;
pub mod report;
pub mod schwarz;
pub mod solver;

pub use discretization::{BiotParams, DofClass, GridSpec, StencilSet};
pub use error::CoreError;
pub use lfa::{AnalysisSetup, FactorReport, Frequency, SweepSymmetry, Window};
pub use schwarz::{BlockPattern, SchwarzVariant, WeightRule, WeightScheme};
