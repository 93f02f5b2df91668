//! Explicitly assembled matrices on periodic grids: the ground truth the
//! window analysis is checked against. The grid wraps after `cells` period
//! cells per dimension; the dof space then decomposes into the Bloch
//! subspaces of the represented frequencies 2 pi t / (cells P h).

use ndarray::{Array1, Array2};

use crate::discretization::{ClassSet, IVec, StencilSet};
use crate::error::CoreError;
use crate::lfa::coarse_weights_1d;
use crate::linalg::{
    deflated_spectral_radius_real, inv_real, pinv_symmetric, LagrangeBasis,
};
use crate::schwarz::{dof_weight, local_matrix, BlockPattern, WeightRule};

/// Dense index space of a periodic grid with `cells` period cells per dim.
pub struct PeriodicGrid {
    pub classes: ClassSet,
    pub cells: IVec,
}

impl PeriodicGrid {
    pub fn new(classes: ClassSet, cells: IVec) -> Self {
        Self { classes, cells }
    }

    pub fn cell_count(&self) -> usize {
        (self.cells[0] * if self.classes.dim == 2 { self.cells[1] } else { 1 }) as usize
    }

    pub fn len(&self) -> usize {
        self.classes.len() * self.cell_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, class: usize, cell: IVec) -> usize {
        let cx = cell[0].rem_euclid(self.cells[0]);
        let cy = if self.classes.dim == 2 { cell[1].rem_euclid(self.cells[1]) } else { 0 };
        class * self.cell_count() + (cy * self.cells[0] + cx) as usize
    }
}

/// Dense periodic operator matrix from stencils.
pub fn operator_matrix(grid: &PeriodicGrid, stencils: &StencilSet) -> Array2<f64> {
    let n = grid.len();
    let mut a = Array2::<f64>::zeros((n, n));
    let cy = if grid.classes.dim == 2 { grid.cells[1] } else { 1 };
    for c in 0..grid.classes.len() {
        for my in 0..cy {
            for mx in 0..grid.cells[0] {
                let i = grid.index(c, [mx, my]);
                for (tgt, q, v) in stencils.row(c) {
                    let j = grid.index(tgt, [mx + q[0], my + q[1]]);
                    a[[i, j]] += v;
                }
            }
        }
    }
    a
}

/// Dense one-sweep Schwarz iteration matrix S = I - (sum_i V_i^T D_i
/// A_i^-1 V_i) A with the pattern wrapped periodically.
pub fn smoother_matrix(
    grid: &PeriodicGrid,
    stencils: &StencilSet,
    pattern: &BlockPattern,
    rule: &WeightRule,
) -> Result<Array2<f64>, CoreError> {
    let n = grid.len();
    let a = operator_matrix(grid, stencils);
    let mut c_mat = Array2::<f64>::zeros((n, n));
    let cp = pattern.cell_period;
    let sy = if grid.classes.dim == 2 { grid.cells[1] / cp[1] } else { 1 };
    for (r, anchor) in pattern.anchors.iter().enumerate() {
        let aloc = local_matrix(pattern, stencils, r);
        let ainv = inv_real(&aloc)?;
        let wts: Vec<f64> =
            (0..anchor.footprint.len()).map(|t| dof_weight(rule, anchor, t)).collect();
        for ty in 0..sy {
            for tx in 0..grid.cells[0] / cp[0] {
                let dofs: Vec<usize> = anchor
                    .footprint
                    .iter()
                    .map(|&(class, cell)| {
                        grid.index(class, [cell[0] + tx * cp[0], cell[1] + ty * cp[1]])
                    })
                    .collect();
                for (tr, &row) in dofs.iter().enumerate() {
                    if wts[tr] == 0.0 {
                        continue;
                    }
                    for (tc, &col) in dofs.iter().enumerate() {
                        c_mat[[row, col]] += wts[tr] * ainv[[tr, tc]];
                    }
                }
            }
        }
    }
    let ca = c_mat.dot(&a);
    let mut s = -ca;
    for i in 0..n {
        s[[i, i]] += 1.0;
    }
    Ok(s)
}

/// Dense periodic prolongation (canonical embedding) from the grid with
/// half the cells.
pub fn prolongation_matrix(grid: &PeriodicGrid) -> Array2<f64> {
    let cs = &grid.classes;
    let dim = cs.dim;
    let coarse = PeriodicGrid::new(cs.clone(), [grid.cells[0] / 2, grid.cells[1] / 2]);
    let bases: Vec<LagrangeBasis> =
        cs.fields.iter().map(|f| LagrangeBasis::new(f.degree)).collect();
    let mut p = Array2::<f64>::zeros((grid.len(), coarse.len()));
    let cy = if dim == 2 { grid.cells[1] } else { 1 };
    for class in 0..cs.len() {
        let field = cs.classes[class].field;
        let spacing = cs.fields[field].spacing;
        for my in 0..cy {
            for mx in 0..grid.cells[0] {
                let i = grid.index(class, [mx, my]);
                let x = cs.position(class, [mx, my]);
                let wx = coarse_weights_1d(&bases[field], x[0] / spacing);
                let wy = if dim == 2 {
                    coarse_weights_1d(&bases[field], x[1] / spacing)
                } else {
                    vec![(0, 1.0)]
                };
                for &(ux, vx) in &wx {
                    for &(uy, vy) in &wy {
                        let w = vx * vy;
                        if w == 0.0 {
                            continue;
                        }
                        // coarse lattice position, in coarse-lattice units
                        let pos = [ux * spacing / 2, uy * spacing / 2];
                        let (cc, cm) = cs.dof_at(field, pos).expect("coarse dof exists");
                        p[[i, coarse.index(cc, cm)]] += w;
                    }
                }
            }
        }
    }
    p
}

/// Dense two-grid error-propagation matrix M = S^nu2 CGC S^nu1 on the
/// periodic grid; the singular coarse operator is handled by a symmetric
/// pseudo-inverse with relative cutoff `pinv_rel_tol`.
pub fn two_grid_matrix(
    grid: &PeriodicGrid,
    stencils: &StencilSet,
    pattern: &BlockPattern,
    rule: &WeightRule,
    nu1: u32,
    nu2: u32,
    pinv_rel_tol: f64,
) -> Result<Array2<f64>, CoreError> {
    let n = grid.len();
    let a = operator_matrix(grid, stencils);
    let s = smoother_matrix(grid, stencils, pattern, rule)?;
    let p = prolongation_matrix(grid);
    let ra = p.t().dot(&a);
    let ac = ra.dot(&p);
    let ac_pinv = pinv_symmetric(&ac, pinv_rel_tol)?;
    let mut cgc = -p.dot(&ac_pinv).dot(&ra);
    for i in 0..n {
        cgc[[i, i]] += 1.0;
    }
    let mut m = cgc;
    for _ in 0..nu1 {
        m = m.dot(&s);
    }
    for _ in 0..nu2 {
        m = s.dot(&m);
    }
    Ok(m)
}

/// Per-field constant vectors (the kernel directions of the periodic
/// operator fixed by the two-grid matrix).
pub fn field_constants(grid: &PeriodicGrid) -> Vec<Array1<f64>> {
    let cs = &grid.classes;
    let mut out = Vec::new();
    let cy = if cs.dim == 2 { grid.cells[1] } else { 1 };
    for field in 0..cs.fields.len() {
        let mut v = Array1::<f64>::zeros(grid.len());
        for class in 0..cs.len() {
            if cs.classes[class].field != field {
                continue;
            }
            for my in 0..cy {
                for mx in 0..grid.cells[0] {
                    v[grid.index(class, [mx, my])] = 1.0;
                }
            }
        }
        out.push(v);
    }
    out
}

/// Spectral radius of the periodic two-grid matrix restricted to the
/// complement of the per-field constant subspace.
pub fn two_grid_factor(
    grid: &PeriodicGrid,
    stencils: &StencilSet,
    pattern: &BlockPattern,
    rule: &WeightRule,
    nu1: u32,
    nu2: u32,
) -> Result<f64, CoreError> {
    let m = two_grid_matrix(grid, stencils, pattern, rule, nu1, nu2, 1e-10)?;
    deflated_spectral_radius_real(&m, &field_constants(grid))
}
