//! Window-based local Fourier analysis for additive Schwarz smoothers.
//!
//! The infinite lattice is split into subgrids that repeat with a window of
//! n lattice points per dimension. For a frequency theta0 in
//! Theta_nh = (-pi/nh, pi/nh]^d, the span of the windowed Fourier modes is
//! invariant under every operator whose pattern period divides the window,
//! so the fine operator, the Schwarz smoother, the grid transfers and the
//! coarse operator all become dense complex matrices indexed by window
//! positions. Couplings that leave the window wrap around periodically and
//! pick up the Bloch phase exp(+i theta0 . n h wraps).

mod sweep;
mod symbols;

pub use sweep::{
    asymptotic_factor, frequency_grid, sweep_rhos, AnalysisSetup, FactorReport, SweepSymmetry,
};
pub use symbols::{
    coarse_class_set, coarse_weights_1d, operator_symbol, prolongation_symbol, smoother_symbol,
    two_grid_symbol, FreqOutcome, SmootherPlan, TwoGridAnalyzer,
};

use serde::{Deserialize, Serialize};

use crate::discretization::{ClassSet, IVec};
use crate::error::CoreError;
use crate::schwarz::{lcm, BlockPattern, PatternKind};

/// A fixed analysis window of n lattice points per dimension together with
/// the dense indexing of its dofs (class-major, then cell row-major).
#[derive(Debug, Clone)]
pub struct Window {
    pub classes: ClassSet,
    /// Window size per dimension, in lattice units.
    pub n: IVec,
    /// Window size per dimension, in period cells.
    pub cells: IVec,
    /// Physical lattice spacing.
    pub lattice_h: f64,
}

impl Window {
    pub fn new(classes: ClassSet, n: IVec, lattice_h: f64) -> Result<Self, CoreError> {
        let dim = classes.dim;
        let mut cells = [1, 1];
        for j in 0..dim {
            let p = classes.period[j];
            if n[j] <= 0 || n[j] % (2 * p) != 0 {
                return Err(CoreError::Config(format!(
                    "window size {} must be a positive multiple of twice the pattern period {p}",
                    n[j]
                )));
            }
            cells[j] = n[j] / p;
        }
        Ok(Self { classes, n, cells, lattice_h })
    }

    pub fn dim(&self) -> usize {
        self.classes.dim
    }

    pub fn cell_count(&self) -> usize {
        (self.cells[0] * if self.dim() == 2 { self.cells[1] } else { 1 }) as usize
    }

    pub fn dof_count(&self) -> usize {
        self.classes.len() * self.cell_count()
    }

    /// Dense index of (class, cell) with cell in [0, cells)^d.
    pub fn index(&self, class: usize, cell: IVec) -> usize {
        debug_assert!(cell[0] >= 0 && cell[0] < self.cells[0]);
        class * self.cell_count() + (cell[1] * self.cells[0] + cell[0]) as usize
    }

    /// Wrap a cell into the window; returns (wrapped cell, wrap counts).
    pub fn wrap(&self, cell: IVec) -> (IVec, IVec) {
        let wx = cell[0].div_euclid(self.cells[0]);
        let cx = cell[0].rem_euclid(self.cells[0]);
        if self.dim() == 1 {
            debug_assert_eq!(cell[1], 0);
            return ([cx, 0], [wx, 0]);
        }
        let wy = cell[1].div_euclid(self.cells[1]);
        let cy = cell[1].rem_euclid(self.cells[1]);
        ([cx, cy], [wx, wy])
    }

    /// Physical window period per dimension (n h).
    pub fn period_len(&self, j: usize) -> f64 {
        self.n[j] as f64 * self.lattice_h
    }
}

/// A frequency theta0 of Theta_nh (componentwise physical radians per unit
/// length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency(pub [f64; 2]);

/// Analysis window size from the block geometry, following the rule:
/// n = lcm(2p, m) with m the smallest multiple of (k - ov) strictly larger
/// than k.
pub fn window_size(p: usize, k: usize, ov: usize) -> Result<i64, CoreError> {
    if k < 2 || ov < 1 || ov >= k {
        return Err(CoreError::InvalidPattern(format!(
            "window rule needs 2 <= k and 1 <= ov < k; got k={k}, ov={ov}"
        )));
    }
    let stride = (k - ov) as i64;
    let m = (k as i64 / stride + 1) * stride;
    debug_assert!(m > k as i64 && m % stride == 0);
    Ok(lcm(2 * p as i64, m))
}

/// Default analysis window (lattice units per dimension) for a block
/// pattern. Interval and element patterns follow the window rule per
/// dimension; the Biot pressure pattern uses an 8x8-element window, whose
/// N = 576 symbol is comfortably above the minimal valid size.
pub fn default_window(pattern: &BlockPattern) -> Result<IVec, CoreError> {
    match pattern.kind {
        PatternKind::Interval { k, ov } => {
            let p = pattern.classes.period[0] as usize;
            Ok([window_size(p, k, ov)?, 1])
        }
        PatternKind::Element { p } => {
            let n = window_size(p, p + 1, 1)?;
            if pattern.classes.dim == 1 {
                Ok([n, 1])
            } else {
                Ok([n, n])
            }
        }
        PatternKind::BiotPressure => Ok([16, 16]),
    }
}
