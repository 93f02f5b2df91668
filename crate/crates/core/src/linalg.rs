//! Small dense linear-algebra helpers shared by the analysis and solver
//! modules: Gauss-Legendre quadrature, Lagrange bases on equispaced nodes,
//! spectral radii of dense complex matrices, and Hermitian pseudo-inverses.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, UPLO};
use num_complex::Complex64;

use crate::error::CoreError;

pub type C64 = Complex64;

/// Gauss-Legendre nodes and weights on [0, 1], exact for polynomials of
/// degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Newton iteration on P_n over (-1, 1), then map to (0, 1).
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Lagrange basis on the p+1 equispaced nodes i/p of [0, 1].
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1);
        let nodes = (0..=p).map(|i| i as f64 / p as f64).collect();
        Self { nodes }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Value of basis polynomial `i` at `t`.
    pub fn eval(&self, i: usize, t: f64) -> f64 {
        let xi = self.nodes[i];
        let mut v = 1.0;
        for (m, &xm) in self.nodes.iter().enumerate() {
            if m != i {
                v *= (t - xm) / (xi - xm);
            }
        }
        v
    }

    /// Derivative of basis polynomial `i` at `t`.
    pub fn deriv(&self, i: usize, t: f64) -> f64 {
        let xi = self.nodes[i];
        let mut sum = 0.0;
        for (m, &xm) in self.nodes.iter().enumerate() {
            if m == i {
                continue;
            }
            let mut prod = 1.0 / (xi - xm);
            for (l, &xl) in self.nodes.iter().enumerate() {
                if l != i && l != m {
                    prod *= (t - xl) / (xi - xl);
                }
            }
            sum += prod;
        }
        sum
    }
}

/// All eigenvalues of a dense complex matrix.
pub fn eigenvalues(m: &Array2<C64>) -> Result<Vec<C64>, CoreError> {
    let (vals, _) = m.eig()?;
    Ok(vals.to_vec())
}

/// All eigenvalues of a dense real matrix (as complex numbers).
pub fn eigenvalues_real(m: &Array2<f64>) -> Result<Vec<C64>, CoreError> {
    let (vals, _) = m.eig()?;
    Ok(vals.to_vec())
}

/// Spectral radius of a dense complex matrix.
pub fn spectral_radius(m: &Array2<C64>) -> Result<f64, CoreError> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &Array2<C64>) -> Result<Vec<f64>, CoreError> {
    let (vals, _) = m.eigh(UPLO::Lower)?;
    Ok(vals.to_vec())
}

/// Inverse of a dense complex matrix.
pub fn inv(m: &Array2<C64>) -> Result<Array2<C64>, CoreError> {
    Ok(m.inv()?)
}

/// Inverse of a dense real matrix.
pub fn inv_real(m: &Array2<f64>) -> Result<Array2<f64>, CoreError> {
    Ok(m.inv()?)
}

/// Moore-Penrose pseudo-inverse of a Hermitian matrix. Eigenvalues with
/// |lambda| <= rel_cutoff * max|lambda| are treated as zero.
///
/// Note: the complex `eigh` of the backing library returns vectors with
/// A = conj(V) diag(lambda) V^T, so the eigenvector of lambda_j is
/// conj(V[:, j]).
pub fn pinv_hermitian(m: &Array2<C64>, rel_cutoff: f64) -> Result<Array2<C64>, CoreError> {
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    let max = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let n = m.nrows();
    // filtered = conj(V) diag(1/lambda)
    let mut filtered = Array2::<C64>::zeros((n, n));
    for (j, &v) in vals.iter().enumerate() {
        let inv = if v.abs() > rel_cutoff * max { 1.0 / v } else { 0.0 };
        for i in 0..n {
            filtered[[i, j]] = vecs[[i, j]].conj() * inv;
        }
    }
    // pinv = conj(V) diag(1/lambda) V^T
    Ok(filtered.dot(&vecs.t()))
}

/// Pseudo-inverse of a real symmetric matrix with a relative eigenvalue cutoff.
pub fn pinv_symmetric(m: &Array2<f64>, rel_cutoff: f64) -> Result<Array2<f64>, CoreError> {
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    let max = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let n = m.nrows();
    let mut filtered = Array2::<f64>::zeros((n, n));
    for (j, &v) in vals.iter().enumerate() {
        let inv = if v.abs() > rel_cutoff * max { 1.0 / v } else { 0.0 };
        for i in 0..n {
            filtered[[i, j]] = vecs[[i, j]] * inv;
        }
    }
    Ok(filtered.dot(&vecs.t()))
}

/// Conjugate transpose.
pub fn conj_transpose(m: &Array2<C64>) -> Array2<C64> {
    m.t().map(|z| z.conj())
}

/// Promote a real matrix to complex.
pub fn to_complex(m: &Array2<f64>) -> Array2<C64> {
    m.map(|&v| C64::new(v, 0.0))
}

/// Largest eigenvalue modulus of `m` restricted to the orthogonal complement
/// of span(kernel), assuming that span is fixed pointwise by `m`. With
/// orthonormalized kernel columns and P = I - sum v v^H this is rho(P m P):
/// in a basis adapted to [kernel, complement] the projected matrix is
/// block-diagonal with a zero kernel block.
pub fn deflated_spectral_radius(m: &Array2<C64>, kernel: &[Array1<C64>]) -> Result<f64, CoreError> {
    let basis = orthonormalize(kernel);
    let mut out = m.clone();
    for v in &basis {
        let vh_out = v.map(|z| z.conj()).dot(&out);
        for i in 0..out.nrows() {
            let vi = v[i];
            for j in 0..out.ncols() {
                out[[i, j]] -= vi * vh_out[j];
            }
        }
    }
    for v in &basis {
        let out_v = out.dot(v);
        for i in 0..out.nrows() {
            let ovi = out_v[i];
            for j in 0..out.ncols() {
                out[[i, j]] -= ovi * v[j].conj();
            }
        }
    }
    spectral_radius(&out)
}

/// Real-matrix variant of [`deflated_spectral_radius`].
pub fn deflated_spectral_radius_real(
    m: &Array2<f64>,
    kernel: &[Array1<f64>],
) -> Result<f64, CoreError> {
    let kc: Vec<Array1<C64>> = kernel.iter().map(|v| v.map(|&x| C64::new(x, 0.0))).collect();
    let basis: Vec<Array1<f64>> = orthonormalize(&kc)
        .into_iter()
        .map(|v| v.map(|z| z.re))
        .collect();
    let mut out = m.clone();
    for v in &basis {
        let vt_out = v.dot(&out);
        for i in 0..out.nrows() {
            let vi = v[i];
            for j in 0..out.ncols() {
                out[[i, j]] -= vi * vt_out[j];
            }
        }
    }
    for v in &basis {
        let out_v = out.dot(v);
        for i in 0..out.nrows() {
            let ovi = out_v[i];
            for j in 0..out.ncols() {
                out[[i, j]] -= ovi * v[j];
            }
        }
    }
    Ok(eigenvalues_real(&out)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

fn orthonormalize(vecs: &[Array1<C64>]) -> Vec<Array1<C64>> {
    let mut basis: Vec<Array1<C64>> = Vec::new();
    for v in vecs {
        let mut w = v.clone();
        // Two Gram-Schmidt passes for orthogonality at machine precision.
        for _ in 0..2 {
            for b in basis.iter() {
                let coef = b.map(|z| z.conj()).dot(&w);
                w = &w - &b.map(|z| z * coef);
            }
        }
        let norm = w.map(|z| z.norm_sqr()).sum().sqrt();
        if norm > 1e-14 {
            basis.push(w.map(|z| z / norm));
        }
    }
    basis
}
