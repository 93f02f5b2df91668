//! Dof classification on the infinite uniform lattice.
//!
//! All discretizations in this crate live on an integer lattice whose
//! spacing is the finest dof spacing of the scheme (h/p for Qp Poisson,
//! h/2 for Q2-Q1 Biot). The pattern of unknowns repeats with an integer
//! period per dimension; a [`DofClass`] identifies one unknown inside the
//! period cell and a [`StencilSet`] carries the couplings between classes
//! as a function of the cell offset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Integer lattice vector. One-dimensional problems use component 0 and
/// keep component 1 at zero.
pub type IVec = [i64; 2];

pub fn ivec_add(a: IVec, b: IVec) -> IVec {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn ivec_sub(a: IVec, b: IVec) -> IVec {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn ivec_neg(a: IVec) -> IVec {
    [-a[0], -a[1]]
}

/// Discretized field living on the lattice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldInfo {
    pub name: String,
    /// Per-dimension polynomial degree of the field's element basis.
    pub degree: usize,
    /// Dof spacing of the field in lattice units.
    pub spacing: i64,
}

/// One unknown of the periodic pattern: which field it belongs to and its
/// integer offset inside the period cell (in lattice units).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DofClass {
    pub field: usize,
    pub offset: IVec,
}

/// The full set of dof classes of a discretization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSet {
    pub dim: usize,
    /// Period of the pattern in lattice units (one element per cell).
    pub period: IVec,
    pub fields: Vec<FieldInfo>,
    pub classes: Vec<DofClass>,
}

impl ClassSet {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Lattice position of a dof.
    pub fn position(&self, class: usize, cell: IVec) -> IVec {
        let o = self.classes[class].offset;
        [o[0] + self.period[0] * cell[0], o[1] + self.period[1] * cell[1]]
    }

    /// Identify the dof of `field` (if any) at a lattice position.
    pub fn dof_at(&self, field: usize, pos: IVec) -> Option<(usize, IVec)> {
        let p = self.period;
        let cell = [pos[0].div_euclid(p[0]), pos[1].div_euclid(p[1])];
        let off = [pos[0].rem_euclid(p[0]), pos[1].rem_euclid(p[1])];
        self.classes
            .iter()
            .position(|c| c.field == field && c.offset == off)
            .map(|ci| (ci, cell))
    }

}

/// Key of one stencil entry: (source class, target class, cell offset).
pub type StencilKey = (usize, usize, IVec);

/// Couplings of a discrete operator on the infinite lattice, grouped by
/// source class. Entry ((a, b, q) -> c) means: the equation of a dof of
/// class `a` in cell `m` receives coefficient `c` times the unknown of
/// class `b` in cell `m + q`.
#[derive(Debug, Clone)]
pub struct StencilSet {
    pub classes: ClassSet,
    /// Physical lattice spacing.
    pub lattice_h: f64,
    entries: BTreeMap<StencilKey, f64>,
}

impl StencilSet {
    pub fn new(classes: ClassSet, lattice_h: f64) -> Self {
        Self { classes, lattice_h, entries: BTreeMap::new() }
    }

    pub fn add(&mut self, src: usize, tgt: usize, offset: IVec, value: f64) {
        if value != 0.0 {
            *self.entries.entry((src, tgt, offset)).or_insert(0.0) += value;
        }
    }

    pub fn coef(&self, src: usize, tgt: usize, offset: IVec) -> f64 {
        self.entries.get(&(src, tgt, offset)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StencilKey, &f64)> {
        self.entries.iter()
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    /// Couplings leaving a source class, in deterministic order.
    pub fn row(&self, src: usize) -> impl Iterator<Item = (usize, IVec, f64)> + '_ {
        self.entries
            .range((src, 0, [i64::MIN, i64::MIN])..=(src, usize::MAX, [i64::MAX, i64::MAX]))
            .map(|(&(_, tgt, off), &v)| (tgt, off, v))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Sum of all coefficients leaving each class. Zero for operators that
    /// annihilate per-field constants.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.classes.len()];
        for (&(src, _, _), &v) in &self.entries {
            sums[src] += v;
        }
        sums
    }

    /// Largest violation of coef(a -> b, q) = coef(b -> a, -q).
    pub fn symmetry_error(&self) -> f64 {
        let mut err = 0.0f64;
        for (&(a, b, q), &v) in &self.entries {
            let w = self.coef(b, a, ivec_neg(q));
            err = err.max((v - w).abs());
        }
        err
    }

    /// Enforce coef(a -> b, q) = coef(b -> a, -q) exactly by averaging the
    /// two accumulation orders (they agree up to rounding for symmetric
    /// bilinear forms).
    pub fn symmetrized(&self) -> StencilSet {
        let mut entries = BTreeMap::new();
        for (&(a, b, q), &v) in &self.entries {
            let w = self.coef(b, a, ivec_neg(q));
            entries.insert((a, b, q), 0.5 * (v + w));
        }
        StencilSet { classes: self.classes.clone(), lattice_h: self.lattice_h, entries }
    }

    /// Drop entries with negligible magnitude relative to the largest one.
    pub fn pruned(&self, rel_tol: f64) -> StencilSet {
        let cut = self.max_abs() * rel_tol;
        let entries = self
            .entries
            .iter()
            .filter(|(_, &v)| v.abs() > cut)
            .map(|(&k, &v)| (k, v))
            .collect();
        StencilSet { classes: self.classes.clone(), lattice_h: self.lattice_h, entries }
    }

    /// Symmetric per-field rescaling: coef'(a, b, q) = s[f(a)] s[f(b)] coef.
    /// A similarity transform of the operator, so every convergence factor
    /// computed from the scaled stencils equals the unscaled one.
    pub fn scaled_per_field(&self, scales: &[f64]) -> StencilSet {
        assert_eq!(scales.len(), self.classes.fields.len());
        let entries = self
            .entries
            .iter()
            .map(|(&(a, b, q), &v)| {
                let fa = self.classes.classes[a].field;
                let fb = self.classes.classes[b].field;
                ((a, b, q), scales[fa] * scales[fb] * v)
            })
            .collect();
        StencilSet { classes: self.classes.clone(), lattice_h: self.lattice_h, entries }
    }

    /// JSON dump with one record per coupling, in deterministic order.
    pub fn dump_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|(&(a, b, q), &v)| {
                serde_json::json!({
                    "field": self.classes.fields[self.classes.classes[a].field].name,
                    "source_class": a,
                    "target_class": b,
                    "offset": [q[0], q[1]],
                    "value": v,
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

/// Per-field Ruiz equilibration. Returns scale factors making the largest
/// coupling magnitude of every field pair approximately one. Applying them
/// through [`StencilSet::scaled_per_field`] is spectrum-neutral but keeps
/// badly scaled systems (Biot at small permeability) numerically tame.
pub fn equilibration_scales(st: &StencilSet) -> Vec<f64> {
    let nf = st.classes.fields.len();
    let mut m = vec![vec![0.0f64; nf]; nf];
    for (&(a, b, _), &v) in st.entries.iter() {
        let fa = st.classes.classes[a].field;
        let fb = st.classes.classes[b].field;
        m[fa][fb] = m[fa][fb].max(v.abs());
    }
    let mut s = vec![1.0f64; nf];
    for _ in 0..20 {
        let mut r = vec![0.0f64; nf];
        for f in 0..nf {
            for g in 0..nf {
                r[f] = r[f].max(m[f][g] * s[f] * s[g]);
            }
        }
        for f in 0..nf {
            if r[f] > 0.0 {
                s[f] /= r[f].sqrt();
            }
        }
    }
    s
}

/// Problem size and element order of a uniform-grid scalar discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    /// Element size h. The Poisson analysis is h-invariant; the value still
    /// scales assembled coefficients (1D) and is recorded in reports.
    pub mesh_size: f64,
    pub poly_degree: usize,
}

impl GridSpec {
    pub fn new(dim: usize, mesh_size: f64, poly_degree: usize) -> Result<Self, CoreError> {
        let spec = Self { dim, mesh_size, poly_degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.dim != 1 && self.dim != 2 {
            return Err(CoreError::InvalidGrid(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if self.poly_degree < 1 {
            return Err(CoreError::InvalidGrid("poly_degree must be >= 1".into()));
        }
        if !(self.mesh_size > 0.0) {
            return Err(CoreError::InvalidGrid("mesh_size must be positive".into()));
        }
        Ok(())
    }
}
