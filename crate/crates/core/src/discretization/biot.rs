//! Q2-Q1 Taylor-Hood stencils for the two-field quasi-static Biot system
//! with backward Euler in time.
//!
//! The assembled block operator is the symmetric indefinite matrix
//!
//! ```text
//!   [ A   B^T ]        A = 2 mu (eps(u), eps(v)) + lambda (div u, div v)
//!   [ B  -C   ]        B = -alpha (div u, q)
//! ```
//!
//! where the flux equation has been multiplied by the time step tau (and by
//! -1) so that C = tau * (K / mu_f) (grad p, grad q) + (1/M) (p, q) appears
//! with a positive semi-definite sign.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::discretization::lattice::{ClassSet, DofClass, FieldInfo, IVec, StencilSet};
use crate::error::CoreError;
use crate::linalg::{gauss_legendre, LagrangeBasis};

pub const FIELD_UX: usize = 0;
pub const FIELD_UY: usize = 1;
pub const FIELD_P: usize = 2;

/// Material and time-stepping parameters of the Biot model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiotParams {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub permeability: f64,
    pub fluid_viscosity: f64,
    /// 1/M, the inverse Biot modulus (0 = incompressible constituents).
    pub biot_modulus_inverse: f64,
    pub biot_willis: f64,
    pub time_step: f64,
}

impl Default for BiotParams {
    fn default() -> Self {
        // E and nu as in the benchmark runs; the remaining values are the
        // declared defaults recorded in every report.
        Self {
            young_modulus: 3.0e4,
            poisson_ratio: 0.2,
            permeability: 1.0,
            fluid_viscosity: 1.0,
            biot_modulus_inverse: 0.0,
            biot_willis: 1.0,
            time_step: 1.0,
        }
    }
}

impl BiotParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(CoreError::InvalidGrid(format!(
                "poisson_ratio must lie in (0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        if !(self.young_modulus > 0.0) {
            return Err(CoreError::InvalidGrid("young_modulus must be positive".into()));
        }
        if self.permeability < 0.0 {
            return Err(CoreError::InvalidGrid("permeability must be >= 0".into()));
        }
        if !(self.fluid_viscosity > 0.0) {
            return Err(CoreError::InvalidGrid("fluid_viscosity must be positive".into()));
        }
        if self.biot_modulus_inverse < 0.0 {
            return Err(CoreError::InvalidGrid("biot_modulus_inverse must be >= 0".into()));
        }
        if !(self.time_step > 0.0) {
            return Err(CoreError::InvalidGrid("time_step must be positive".into()));
        }
        Ok(())
    }

    /// Lame coefficients (lambda, mu).
    pub fn lame(&self) -> (f64, f64) {
        let e = self.young_modulus;
        let nu = self.poisson_ratio;
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

/// Dof classes of the Q2-Q1 pair: lattice spacing h/2, one element per
/// period cell. Displacement components occupy every lattice point (four
/// classes each: vertex, two edges, cell center); pressure sits on vertices.
pub fn biot_class_set() -> ClassSet {
    let mut classes = Vec::new();
    for field in [FIELD_UX, FIELD_UY] {
        for oy in 0..2 {
            for ox in 0..2 {
                classes.push(DofClass { field, offset: [ox, oy] });
            }
        }
    }
    classes.push(DofClass { field: FIELD_P, offset: [0, 0] });
    ClassSet {
        dim: 2,
        period: [2, 2],
        fields: vec![
            FieldInfo { name: "ux".into(), degree: 2, spacing: 1 },
            FieldInfo { name: "uy".into(), degree: 2, spacing: 1 },
            FieldInfo { name: "p".into(), degree: 1, spacing: 2 },
        ],
        classes,
    }
}

/// Element matrices of the Biot bilinear forms on [0, h]^2.
///
/// Displacement dofs are ordered component-major: index = comp * 9 + node,
/// with Q2 nodes lexicographic (x fastest). Pressure nodes are the four Q1
/// corners, lexicographic.
pub struct BiotElementMatrices {
    /// 18 x 18 elasticity block.
    pub a: Array2<f64>,
    /// 18 x 4 coupling (q, div v).
    pub g: Array2<f64>,
    /// 4 x 4 pressure stiffness (grad p, grad q), unscaled.
    pub c_stiff: Array2<f64>,
    /// 4 x 4 pressure mass (p, q).
    pub c_mass: Array2<f64>,
}

pub fn biot_element_matrices(params: &BiotParams, h: f64) -> BiotElementMatrices {
    let (lambda, mu) = params.lame();
    let q2 = LagrangeBasis::new(2);
    let q1 = LagrangeBasis::new(1);
    let nq = 4; // exact for every integrand here (per-dim degree <= 4)
    let (qx, qw) = gauss_legendre(nq);

    // Tabulate 1D values/derivatives at quadrature points.
    let tab = |basis: &LagrangeBasis| {
        let n = basis.degree() + 1;
        let mut val = vec![vec![0.0; nq]; n];
        let mut der = vec![vec![0.0; nq]; n];
        for i in 0..n {
            for (q, &t) in qx.iter().enumerate() {
                val[i][q] = basis.eval(i, t);
                der[i][q] = basis.deriv(i, t);
            }
        }
        (val, der)
    };
    let (v2, d2) = tab(&q2);
    let (v1, d1) = tab(&q1);

    let mut a = Array2::<f64>::zeros((18, 18));
    let mut g = Array2::<f64>::zeros((18, 4));
    let mut c_stiff = Array2::<f64>::zeros((4, 4));
    let mut c_mass = Array2::<f64>::zeros((4, 4));

    for qi in 0..nq {
        for qj in 0..nq {
            let w = qw[qi] * qw[qj];
            // Gradients on [0,h]^2 carry 1/h; the area element carries h^2.
            let mut phi = [0.0; 9];
            let mut grad = [[0.0; 2]; 9]; // physical gradient * h
            for ny in 0..3 {
                for nx in 0..3 {
                    let n = nx + 3 * ny;
                    phi[n] = v2[nx][qi] * v2[ny][qj];
                    grad[n][0] = d2[nx][qi] * v2[ny][qj];
                    grad[n][1] = v2[nx][qi] * d2[ny][qj];
                }
            }
            let mut psi = [0.0; 4];
            let mut gpsi = [[0.0; 2]; 4];
            for ny in 0..2 {
                for nx in 0..2 {
                    let n = nx + 2 * ny;
                    psi[n] = v1[nx][qi] * v1[ny][qj];
                    gpsi[n][0] = d1[nx][qi] * v1[ny][qj];
                    gpsi[n][1] = v1[nx][qi] * d1[ny][qj];
                }
            }

            // a(phi_b e_beta, phi_a e_alpha) =
            //   mu [ delta_ab grad.grad + d_alpha phi_b d_beta phi_a ]
            //   + lambda d_beta phi_b d_alpha phi_a     (all h-free in 2D)
            for alpha in 0..2 {
                for na in 0..9 {
                    let row = alpha * 9 + na;
                    for beta in 0..2 {
                        for nb in 0..9 {
                            let col = beta * 9 + nb;
                            let mut term = mu * grad[nb][alpha] * grad[na][beta]
                                + lambda * grad[nb][beta] * grad[na][alpha];
                            if alpha == beta {
                                term += mu
                                    * (grad[na][0] * grad[nb][0] + grad[na][1] * grad[nb][1]);
                            }
                            a[[row, col]] += w * term;
                        }
                    }
                    // (q_b, d_alpha phi_a): one 1/h from the gradient, h^2
                    // from the area element.
                    for nb in 0..4 {
                        g[[row, nb]] += w * h * psi[nb] * grad[na][alpha];
                    }
                }
            }
            for na in 0..4 {
                for nb in 0..4 {
                    c_stiff[[na, nb]] +=
                        w * (gpsi[na][0] * gpsi[nb][0] + gpsi[na][1] * gpsi[nb][1]);
                    c_mass[[na, nb]] += w * h * h * psi[na] * psi[nb];
                }
            }
        }
    }
    let at = a.t().to_owned();
    let cs = c_stiff.t().to_owned();
    let cm = c_mass.t().to_owned();
    BiotElementMatrices {
        a: (&a + &at) * 0.5,
        g,
        c_stiff: (&c_stiff + &cs) * 0.5,
        c_mass: (&c_mass + &cm) * 0.5,
    }
}

/// Local-to-class map for the 18 displacement dofs (comp-major) and the 4
/// pressure dofs of one element.
pub fn biot_local_maps() -> (Vec<(usize, IVec)>, Vec<(usize, IVec)>) {
    let classes = biot_class_set();
    let mut disp = Vec::new();
    for comp in 0..2 {
        for ny in 0..3i64 {
            for nx in 0..3i64 {
                let (c, cell) = classes.dof_at(comp, [nx, ny]).unwrap();
                disp.push((c, cell));
            }
        }
    }
    let mut press = Vec::new();
    for ny in 0..2i64 {
        for nx in 0..2i64 {
            let (c, cell) = classes.dof_at(FIELD_P, [2 * nx, 2 * ny]).unwrap();
            press.push((c, cell));
        }
    }
    (disp, press)
}

/// Assemble the infinite-grid stencils of the Biot block operator for mesh
/// size h. Nine dof classes: 8 displacement + 1 pressure.
pub fn assemble_biot_stencils(params: &BiotParams, h: f64) -> Result<StencilSet, CoreError> {
    params.validate()?;
    if !(h > 0.0) {
        return Err(CoreError::InvalidGrid("mesh size must be positive".into()));
    }
    let el = biot_element_matrices(params, h);
    let (disp_map, press_map) = biot_local_maps();
    let alpha = params.biot_willis;
    let tau = params.time_step;
    let kf = params.permeability / params.fluid_viscosity;
    let minv = params.biot_modulus_inverse;

    let mut st = StencilSet::new(biot_class_set(), h / 2.0);
    // A block.
    for (i, &(ci, celli)) in disp_map.iter().enumerate() {
        for (j, &(cj, cellj)) in disp_map.iter().enumerate() {
            st.add(ci, cj, [cellj[0] - celli[0], cellj[1] - celli[1]], el.a[[i, j]]);
        }
    }
    // B^T = -alpha G on displacement rows, B = -alpha G^T on pressure rows.
    for (i, &(ci, celli)) in disp_map.iter().enumerate() {
        for (j, &(cj, cellj)) in press_map.iter().enumerate() {
            let v = -alpha * el.g[[i, j]];
            st.add(ci, cj, [cellj[0] - celli[0], cellj[1] - celli[1]], v);
            st.add(cj, ci, [celli[0] - cellj[0], celli[1] - cellj[1]], v);
        }
    }
    // -C on pressure rows.
    for (i, &(ci, celli)) in press_map.iter().enumerate() {
        for (j, &(cj, cellj)) in press_map.iter().enumerate() {
            let v = -(tau * kf * el.c_stiff[[i, j]] + minv * el.c_mass[[i, j]]);
            st.add(ci, cj, [cellj[0] - celli[0], cellj[1] - celli[1]], v);
        }
    }
    Ok(st.symmetrized().pruned(1e-15))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lame_conversion_matches_hand_values() {
        let params = BiotParams::default();
        let (lambda, mu) = params.lame();
        assert_abs_diff_eq!(lambda, 25000.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mu, 12500.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_incompressible_solid() {
        let params = BiotParams { poisson_ratio: 0.5, ..BiotParams::default() };
        assert!(assemble_biot_stencils(&params, 1.0 / 64.0).is_err());
    }

    #[test]
    fn zero_permeability_and_storage_kill_the_c_block() {
        let params = BiotParams {
            permeability: 0.0,
            biot_modulus_inverse: 0.0,
            ..BiotParams::default()
        };
        let st = assemble_biot_stencils(&params, 1.0 / 64.0).unwrap();
        let pclass = 8;
        for (tgt, _, v) in st.row(pclass) {
            if tgt == pclass {
                assert_eq!(v, 0.0, "C block should vanish");
            }
        }
    }

    #[test]
    fn block_stencil_is_symmetric() {
        let params = BiotParams { permeability: 1e-6, ..BiotParams::default() };
        let st = assemble_biot_stencils(&params, 1.0 / 64.0).unwrap();
        assert_eq!(st.symmetry_error(), 0.0);
        assert_eq!(st.classes.len(), 9);
    }

    #[test]
    fn displacement_rows_annihilate_constants() {
        // Rigid translations are in the kernel of [A, B^T]: row sums over
        // displacement couplings of each displacement row vanish, and so do
        // the pressure couplings (sum of (q, div v) over constant v).
        let st = assemble_biot_stencils(&BiotParams::default(), 1.0 / 64.0).unwrap();
        for src in 0..8 {
            let mut disp_sum = 0.0;
            let mut press_sum = 0.0;
            for (tgt, _, v) in st.row(src) {
                if st.classes.classes[tgt].field == FIELD_P {
                    press_sum += v;
                } else {
                    disp_sum += v;
                }
            }
            assert_abs_diff_eq!(disp_sum, 0.0, epsilon = 1e-12 * st.max_abs());
            assert_abs_diff_eq!(press_sum, 0.0, epsilon = 1e-12 * st.max_abs());
        }
    }
}
