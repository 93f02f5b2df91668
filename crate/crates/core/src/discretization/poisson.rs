//! Qp finite-element stencils for the Poisson operator on uniform grids.

use ndarray::Array2;

use crate::discretization::lattice::{ClassSet, DofClass, FieldInfo, GridSpec, IVec, StencilSet};
use crate::error::CoreError;
use crate::linalg::{gauss_legendre, LagrangeBasis};

/// Element stiffness matrix of the Lagrange Qp basis on equispaced nodes of
/// [0, h]^d. Node order is lexicographic with the x index fastest. Computed
/// with tensor Gauss-Legendre quadrature using `quad_points` points per
/// direction; `p + 1` points integrate the stiffness integrand exactly.
pub fn qp_element_matrix_with_quadrature(
    p: usize,
    d: usize,
    h: f64,
    quad_points: usize,
) -> Result<Array2<f64>, CoreError> {
    if p < 1 {
        return Err(CoreError::InvalidGrid("poly_degree must be >= 1".into()));
    }
    if d != 1 && d != 2 {
        return Err(CoreError::InvalidGrid(format!("dim must be 1 or 2, got {d}")));
    }
    let basis = LagrangeBasis::new(p);
    let (qx, qw) = gauss_legendre(quad_points);
    let nn = p + 1;

    // Tabulate values and derivatives at quadrature points.
    let mut val = vec![vec![0.0; quad_points]; nn];
    let mut der = vec![vec![0.0; quad_points]; nn];
    for i in 0..nn {
        for (q, &t) in qx.iter().enumerate() {
            val[i][q] = basis.eval(i, t);
            der[i][q] = basis.deriv(i, t);
        }
    }

    let size = nn.pow(d as u32);
    let mut k = Array2::<f64>::zeros((size, size));
    // Reference-element gradient terms carry h^(d-2) after scaling.
    let scale = h.powi(d as i32 - 2);
    match d {
        1 => {
            for a in 0..nn {
                for b in 0..nn {
                    let mut s = 0.0;
                    for q in 0..quad_points {
                        s += qw[q] * der[a][q] * der[b][q];
                    }
                    k[[a, b]] = scale * s;
                }
            }
        }
        2 => {
            for ay in 0..nn {
                for ax in 0..nn {
                    let a = ax + nn * ay;
                    for by in 0..nn {
                        for bx in 0..nn {
                            let b = bx + nn * by;
                            let mut s = 0.0;
                            for qx_i in 0..quad_points {
                                for qy_i in 0..quad_points {
                                    let w = qw[qx_i] * qw[qy_i];
                                    let gx = der[ax][qx_i] * val[ay][qy_i]
                                        * der[bx][qx_i] * val[by][qy_i];
                                    let gy = val[ax][qx_i] * der[ay][qy_i]
                                        * val[bx][qx_i] * der[by][qy_i];
                                    s += w * (gx + gy);
                                }
                            }
                            k[[a, b]] = scale * s;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    // The bilinear form is symmetric; make the matrix symmetric to rounding.
    let kt = k.t().to_owned();
    Ok((&k + &kt) * 0.5)
}

/// Element stiffness matrix with the default exact quadrature (p+1 points).
pub fn qp_element_matrix(p: usize, d: usize, h: f64) -> Result<Array2<f64>, CoreError> {
    qp_element_matrix_with_quadrature(p, d, h, p + 1)
}

/// Dof classes of the Qp discretization: lattice spacing h/p, one element
/// per period cell, p^d classes at the lattice offsets [0, p)^d.
pub fn poisson_class_set(p: usize, d: usize) -> ClassSet {
    let period = if d == 1 { [p as i64, 1] } else { [p as i64, p as i64] };
    let mut classes = Vec::new();
    let ny = if d == 1 { 1 } else { p };
    for oy in 0..ny {
        for ox in 0..p {
            classes.push(DofClass { field: 0, offset: [ox as i64, oy as i64] });
        }
    }
    ClassSet {
        dim: d,
        period,
        fields: vec![FieldInfo { name: "u".into(), degree: p, spacing: 1 }],
        classes,
    }
}

/// Map a local element node (lexicographic, x fastest) to its dof class and
/// the cell offset of the element that owns the node's period cell.
pub fn poisson_local_map(p: usize, d: usize) -> Vec<(usize, IVec)> {
    let nn = p + 1;
    let classes = poisson_class_set(p, d);
    let mut map = Vec::new();
    let ny = if d == 1 { 1 } else { nn };
    for iy in 0..ny {
        for ix in 0..nn {
            let pos = [ix as i64, iy as i64];
            let (class, cell) = classes.dof_at(0, pos).expect("every lattice point is a dof");
            map.push((class, cell));
        }
    }
    map
}

/// Assemble the infinite-grid Poisson stencils: sums the element matrix over
/// all element/dof incidences of one period cell.
pub fn assemble_poisson_stencils(spec: &GridSpec) -> Result<StencilSet, CoreError> {
    spec.validate()?;
    let p = spec.poly_degree;
    let d = spec.dim;
    let k = qp_element_matrix(p, d, spec.mesh_size)?;
    let map = poisson_local_map(p, d);
    let classes = poisson_class_set(p, d);
    let lattice_h = spec.mesh_size / p as f64;
    let mut st = StencilSet::new(classes, lattice_h);
    for (i, &(ci, celli)) in map.iter().enumerate() {
        for (j, &(cj, cellj)) in map.iter().enumerate() {
            let q = [cellj[0] - celli[0], cellj[1] - celli[1]];
            st.add(ci, cj, q, k[[i, j]]);
        }
    }
    Ok(st.symmetrized().pruned(1e-14))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn p1_element_matrix_is_hat_stiffness() {
        let k = qp_element_matrix(1, 1, 1.0).unwrap();
        let expect = ndarray::array![[1.0, -1.0], [-1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(k[[i, j]], expect[[i, j]], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(qp_element_matrix(0, 1, 1.0).is_err());
        assert!(qp_element_matrix(1, 3, 1.0).is_err());
    }

    #[test]
    fn p2_element_rows_sum_to_zero() {
        let k = qp_element_matrix(2, 1, 1.0).unwrap();
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| k[[i, j]]).sum();
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-13);
        }
        // Classical P2 element stiffness on [0,1], scaled by 1/3.
        let expect = ndarray::array![[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k[[i, j]], expect[[i, j]] / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn q1_interior_vertex_stencil_is_nine_point_laplacian() {
        let spec = GridSpec::new(2, 1.0, 1).unwrap();
        let st = assemble_poisson_stencils(&spec).unwrap();
        assert_eq!(st.classes.len(), 1);
        assert_abs_diff_eq!(st.coef(0, 0, [0, 0]), 8.0 / 3.0, epsilon = 1e-12);
        for q in [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]] {
            assert_abs_diff_eq!(st.coef(0, 0, q), -1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn p1_1d_stencil_is_classical() {
        let spec = GridSpec::new(1, 0.5, 1).unwrap();
        let st = assemble_poisson_stencils(&spec).unwrap();
        assert_abs_diff_eq!(st.coef(0, 0, [0, 0]), 2.0 / 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(st.coef(0, 0, [1, 0]), -1.0 / 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(st.coef(0, 0, [-1, 0]), -1.0 / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn p2_midpoint_couples_only_to_flanking_vertices() {
        let spec = GridSpec::new(1, 1.0, 2).unwrap();
        let st = assemble_poisson_stencils(&spec).unwrap();
        assert_eq!(st.classes.len(), 2);
        // class 1 = midpoint: support is a single element, so it reaches
        // itself and the two vertices of its element only.
        let reach: Vec<_> = st.row(1).collect();
        assert_eq!(reach.len(), 3);
        assert_abs_diff_eq!(st.coef(1, 1, [0, 0]), 16.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.coef(1, 0, [0, 0]), -8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.coef(1, 0, [1, 0]), -8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn row_sums_vanish_up_to_p8() {
        for d in [1usize, 2] {
            for p in 1..=8usize {
                let spec = GridSpec::new(d, 1.0, p).unwrap();
                let st = assemble_poisson_stencils(&spec).unwrap();
                assert_eq!(st.classes.len(), p.pow(d as u32));
                let scale = st.max_abs();
                for s in st.row_sums() {
                    assert!(
                        s.abs() <= 1e-12 * scale,
                        "row sum {s} too large for p={p}, d={d}"
                    );
                }
                assert!(st.symmetry_error() == 0.0);
            }
        }
    }

    #[test]
    fn quadrature_order_bump_changes_nothing() {
        for d in [1usize, 2] {
            for p in [1usize, 3, 5] {
                let a = qp_element_matrix_with_quadrature(p, d, 1.0, p + 1).unwrap();
                let b = qp_element_matrix_with_quadrature(p, d, 1.0, p + 3).unwrap();
                let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                for (x, y) in a.iter().zip(b.iter()) {
                    assert!((x - y).abs() <= 1e-13 * scale);
                }
            }
        }
    }
}
