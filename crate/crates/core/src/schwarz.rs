//! Periodic patterns of overlapping Schwarz blocks and their weighting.
//!
//! A block is a small set of dofs whose local system is solved exactly
//! during smoothing. Patterns are stored by one or more anchor instances
//! plus a translation lattice; every quantity that enters the smoother
//! (local matrix, weights, restricted-variant ownership) is translation
//! invariant, so it is computed once per anchor.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::discretization::{biot_class_set, poisson_class_set, ClassSet, IVec, StencilSet};
use crate::error::CoreError;
use crate::linalg::inv_real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchwarzVariant {
    /// All block corrections are summed with diagonal weights D_i.
    Additive,
    /// Each dof takes its correction from exactly one owning block.
    Restricted,
}

/// Role of a dof inside the weight assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DofRole {
    Scalar,
    Pressure,
    DispVertex,
    DispEdge,
    DispCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightScheme {
    /// AS: reciprocal of the number of blocks containing the dof.
    /// RAS: one on owned dofs.
    Natural,
    /// One scalar for every dof (RAS: applied on owned dofs only).
    Uniform(f64),
    /// One weight per dof role.
    PerRole(BTreeMap<DofRole, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRule {
    pub variant: SchwarzVariant,
    pub scheme: WeightScheme,
}

impl WeightRule {
    pub fn natural(variant: SchwarzVariant) -> Self {
        Self { variant, scheme: WeightScheme::Natural }
    }
}

/// What the pattern describes; used to pick analysis window sizes and for
/// serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternKind {
    Interval { k: usize, ov: usize },
    Element { p: usize },
    BiotPressure,
}

/// One anchor instance of the periodic pattern.
#[derive(Debug, Clone)]
pub struct Anchor {
    /// Lattice position of the block origin (reporting only).
    pub base: IVec,
    /// Footprint dofs as (class, cell) pairs, fixed order.
    pub footprint: Vec<(usize, IVec)>,
    /// Number of pattern instances containing each footprint dof.
    pub counts: Vec<u32>,
    /// Restricted-variant ownership mask for each footprint dof.
    pub owned: Vec<bool>,
    /// Role of each footprint dof.
    pub roles: Vec<DofRole>,
}

/// Periodic pattern of Schwarz blocks.
#[derive(Debug, Clone)]
pub struct BlockPattern {
    pub classes: ClassSet,
    pub kind: PatternKind,
    /// Shift (in period cells, per dim) between copies of the same anchor.
    pub cell_period: IVec,
    pub anchors: Vec<Anchor>,
}

impl BlockPattern {
    pub fn block_size(&self, anchor: usize) -> usize {
        self.anchors[anchor].footprint.len()
    }

    /// Number of block instances whose base cell lies in a region of
    /// `cells` period cells per dimension. The region size must be a
    /// multiple of the pattern's cell period.
    pub fn instances_in(&self, cells: IVec) -> usize {
        let nx = cells[0] / self.cell_period[0];
        let ny = if self.classes.dim == 2 { cells[1] / self.cell_period[1] } else { 1 };
        self.anchors.len() * (nx * ny) as usize
    }

    /// Serializable descriptor, used by CLI configs.
    pub fn descriptor(&self, rule: &WeightRule) -> serde_json::Value {
        let type_name = match self.kind {
            PatternKind::Interval { .. } => "interval",
            PatternKind::Element { .. } => "element",
            PatternKind::BiotPressure => "biot-pressure",
        };
        let mut v = serde_json::json!({
            "type": type_name,
            "variant": match rule.variant {
                SchwarzVariant::Additive => "as",
                SchwarzVariant::Restricted => "ras",
            },
            "weights": serde_json::to_value(&rule.scheme).unwrap(),
        });
        match self.kind {
            PatternKind::Interval { k, ov } => {
                v["k"] = k.into();
                v["ov"] = ov.into();
            }
            PatternKind::Element { p } => {
                v["p"] = p.into();
            }
            PatternKind::BiotPressure => {}
        }
        v
    }
}

/// Role of a dof class under the weight schemes.
pub fn classify_role(classes: &ClassSet, class: usize) -> DofRole {
    if classes.fields.len() == 1 {
        return DofRole::Scalar;
    }
    let c = &classes.classes[class];
    if classes.fields[c.field].name == "p" {
        return DofRole::Pressure;
    }
    match (c.offset[0] % 2 != 0, c.offset[1] % 2 != 0) {
        (false, false) => DofRole::DispVertex,
        (true, true) => DofRole::DispCell,
        _ => DofRole::DispEdge,
    }
}

/// Diagonal weight (D_i entry) for one footprint dof under a rule. For the
/// restricted variant the ownership mask multiplies the weight.
pub fn dof_weight(rule: &WeightRule, anchor: &Anchor, entry: usize) -> f64 {
    let base = match (&rule.scheme, rule.variant) {
        (WeightScheme::Natural, SchwarzVariant::Additive) => 1.0 / anchor.counts[entry] as f64,
        (WeightScheme::Natural, SchwarzVariant::Restricted) => 1.0,
        (WeightScheme::Uniform(w), _) => *w,
        (WeightScheme::PerRole(map), _) => *map
            .get(&anchor.roles[entry])
            .unwrap_or_else(|| panic!("no weight for role {:?}", anchor.roles[entry])),
    };
    match rule.variant {
        SchwarzVariant::Additive => base,
        SchwarzVariant::Restricted => {
            if anchor.owned[entry] {
                base
            } else {
                0.0
            }
        }
    }
}

/// 1D interval blocks of size k with overlap ov on the dof grid of a degree
/// p Poisson discretization.
pub fn make_1d_interval_blocks(p: usize, k: usize, ov: usize) -> Result<BlockPattern, CoreError> {
    if k < 2 {
        return Err(CoreError::InvalidPattern(format!("block size k must be >= 2, got {k}")));
    }
    if ov < 1 || ov >= k {
        return Err(CoreError::InvalidPattern(format!(
            "overlap must satisfy 1 <= ov < k, got ov={ov}, k={k} (blocks would not advance)"
        )));
    }
    let classes = poisson_class_set(p, 1);
    let stride = (k - ov) as i64;
    let lp = lcm(p as i64, stride);
    let n_anchors = (lp / stride) as usize;
    let mut anchors = Vec::new();
    for r in 0..n_anchors {
        let base = [r as i64 * stride, 0];
        let footprint: Vec<(usize, IVec)> = (0..k as i64)
            .map(|i| classes.dof_at(0, [base[0] + i, 0]).unwrap())
            .collect();
        anchors.push(Anchor { base, footprint, counts: vec![], owned: vec![], roles: vec![] });
    }
    finish_pattern(BlockPattern {
        classes,
        kind: PatternKind::Interval { k, ov },
        cell_period: [lp / p as i64, 1],
        anchors,
    })
}

/// Spec shorthand: interval blocks on the linear (p = 1) dof grid.
pub fn make_1d_blocks(k: usize, ov: usize) -> Result<BlockPattern, CoreError> {
    make_1d_interval_blocks(1, k, ov)
}

/// Element blocks: one block per element containing all basis functions
/// with support in it ((p+1)^d dofs, one dof layer of overlap).
pub fn make_element_blocks(p: usize, d: usize) -> Result<BlockPattern, CoreError> {
    if p < 1 || (d != 1 && d != 2) {
        return Err(CoreError::InvalidPattern(format!("element blocks need p >= 1, d in {{1,2}}; got p={p}, d={d}")));
    }
    let classes = poisson_class_set(p, d);
    let nn = p as i64 + 1;
    let mut footprint = Vec::new();
    let ny = if d == 1 { 1 } else { nn };
    for iy in 0..ny {
        for ix in 0..nn {
            footprint.push(classes.dof_at(0, [ix, iy]).unwrap());
        }
    }
    let anchors =
        vec![Anchor { base: [0, 0], footprint, counts: vec![], owned: vec![], roles: vec![] }];
    finish_pattern(BlockPattern {
        classes,
        kind: PatternKind::Element { p },
        cell_period: [1, 1],
        anchors,
    })
}

/// Biot pressure-centered blocks: one pressure dof plus the 5x5 patch of
/// displacement dofs (per component) sharing support with it; 51 dofs.
/// Displacement dofs come first, the pressure dof is last.
pub fn make_biot_pressure_blocks() -> Result<BlockPattern, CoreError> {
    let classes = biot_class_set();
    let mut footprint = Vec::new();
    for comp in 0..2usize {
        for dy in -2..=2i64 {
            for dx in -2..=2i64 {
                footprint.push(classes.dof_at(comp, [dx, dy]).unwrap());
            }
        }
    }
    footprint.push(classes.dof_at(crate::discretization::FIELD_P, [0, 0]).unwrap());
    let anchors =
        vec![Anchor { base: [0, 0], footprint, counts: vec![], owned: vec![], roles: vec![] }];
    finish_pattern(BlockPattern {
        classes,
        kind: PatternKind::BiotPressure,
        cell_period: [1, 1],
        anchors,
    })
}

/// Real, frequency-independent local matrix A_i of one anchor: the
/// restriction of the infinite-grid operator to the block footprint.
pub fn local_matrix(pattern: &BlockPattern, stencils: &StencilSet, anchor: usize) -> Array2<f64> {
    let fp = &pattern.anchors[anchor].footprint;
    let n = fp.len();
    let mut a = Array2::<f64>::zeros((n, n));
    for (i, &(ci, celli)) in fp.iter().enumerate() {
        for (j, &(cj, cellj)) in fp.iter().enumerate() {
            a[[i, j]] = stencils.coef(ci, cj, [cellj[0] - celli[0], cellj[1] - celli[1]]);
        }
    }
    a
}

/// Local matrix inverse; fails loudly on a singular block design.
pub fn local_matrix_inverse(
    pattern: &BlockPattern,
    stencils: &StencilSet,
    anchor: usize,
) -> Result<Array2<f64>, CoreError> {
    let a = local_matrix(pattern, stencils, anchor);
    let norm_a = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    match inv_real(&a) {
        Ok(inv) => {
            let norm_inv = inv.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let cond = norm_a * norm_inv * a.nrows() as f64;
            if !cond.is_finite() || cond > 1e15 {
                return Err(CoreError::SingularLocalMatrix {
                    anchor: pattern.anchors[anchor].base,
                    cond,
                });
            }
            Ok(inv)
        }
        Err(_) => Err(CoreError::SingularLocalMatrix {
            anchor: pattern.anchors[anchor].base,
            cond: f64::INFINITY,
        }),
    }
}

/// Pattern instances (anchor index, cell shift) containing the dof
/// (class, cell).
pub fn containing_instances(pattern: &BlockPattern, class: usize, cell: IVec) -> Vec<(usize, IVec)> {
    let cp = pattern.cell_period;
    let dim = pattern.classes.dim;
    let mut out = Vec::new();
    for (r, anchor) in pattern.anchors.iter().enumerate() {
        for &(ce, celle) in &anchor.footprint {
            if ce != class {
                continue;
            }
            let d0 = cell[0] - celle[0];
            let d1 = cell[1] - celle[1];
            if d0.rem_euclid(cp[0]) != 0 {
                continue;
            }
            if dim == 2 && d1.rem_euclid(cp[1]) != 0 {
                continue;
            }
            if dim == 1 && d1 != 0 {
                continue;
            }
            let shift = [d0.div_euclid(cp[0]), if dim == 2 { d1.div_euclid(cp[1]) } else { 0 }];
            out.push((r, shift));
        }
    }
    out
}

/// Lattice base position of an instance.
pub fn instance_base(pattern: &BlockPattern, anchor: usize, shift: IVec) -> IVec {
    let b = pattern.anchors[anchor].base;
    let lx = pattern.cell_period[0] * pattern.classes.period[0];
    let ly = pattern.cell_period[1] * pattern.classes.period[1];
    [b[0] + shift[0] * lx, b[1] + shift[1] * ly]
}

/// Owner of a dof under the restricted variant: the containing instance
/// with the componentwise-largest base. With 1D stride k - ov this makes
/// each block own its first k - ov dofs.
pub fn owner_instance(pattern: &BlockPattern, class: usize, cell: IVec) -> (usize, IVec) {
    let inst = containing_instances(pattern, class, cell);
    assert!(!inst.is_empty(), "dof not covered by any block");
    let max0 = inst.iter().map(|&(r, s)| instance_base(pattern, r, s)[0]).max().unwrap();
    let max1 = inst.iter().map(|&(r, s)| instance_base(pattern, r, s)[1]).max().unwrap();
    for &(r, s) in &inst {
        let b = instance_base(pattern, r, s);
        if b[0] == max0 && b[1] == max1 {
            return (r, s);
        }
    }
    // Tensor-product footprints always contain the componentwise maximum.
    panic!("ownership rule requires tensor-product block footprints");
}

fn finish_pattern(mut pattern: BlockPattern) -> Result<BlockPattern, CoreError> {
    // Coverage: every dof class in one pattern period must lie in a block.
    let dim = pattern.classes.dim;
    for c in 0..pattern.classes.len() {
        for my in 0..(if dim == 2 { pattern.cell_period[1] } else { 1 }) {
            for mx in 0..pattern.cell_period[0] {
                if containing_instances(&pattern, c, [mx, my]).is_empty() {
                    return Err(CoreError::InvalidPattern(format!(
                        "dof class {c} at cell [{mx},{my}] is not covered by any block"
                    )));
                }
            }
        }
    }
    let snapshot = pattern.clone();
    for (r, anchor) in pattern.anchors.iter_mut().enumerate() {
        anchor.counts = anchor
            .footprint
            .iter()
            .map(|&(c, cell)| containing_instances(&snapshot, c, cell).len() as u32)
            .collect();
        anchor.owned = anchor
            .footprint
            .iter()
            .map(|&(c, cell)| owner_instance(&snapshot, c, cell) == (r, [0, 0]))
            .collect();
        anchor.roles = anchor
            .footprint
            .iter()
            .map(|&(c, _)| classify_role(&snapshot.classes, c))
            .collect();
    }
    Ok(pattern)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_poisson_stencils, GridSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn k3_ov1_has_paper_weights() {
        let pattern = make_1d_blocks(3, 1).unwrap();
        assert_eq!(pattern.anchors.len(), 1);
        let anchor = &pattern.anchors[0];
        assert_eq!(anchor.footprint.len(), 3);

        let rule = WeightRule::natural(SchwarzVariant::Additive);
        let w: Vec<f64> = (0..3).map(|t| dof_weight(&rule, anchor, t)).collect();
        assert_eq!(w, vec![0.5, 1.0, 0.5]);

        let rule = WeightRule::natural(SchwarzVariant::Restricted);
        let w: Vec<f64> = (0..3).map(|t| dof_weight(&rule, anchor, t)).collect();
        assert_eq!(w, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn k2_ov1_every_dof_in_two_blocks() {
        let pattern = make_1d_blocks(2, 1).unwrap();
        let anchor = &pattern.anchors[0];
        assert_eq!(anchor.counts, vec![2, 2]);
        let rule = WeightRule::natural(SchwarzVariant::Additive);
        assert_eq!(dof_weight(&rule, anchor, 0), 0.5);
        assert_eq!(dof_weight(&rule, anchor, 1), 0.5);
    }

    #[test]
    fn rejects_non_advancing_blocks() {
        assert!(make_1d_blocks(3, 3).is_err());
        assert!(make_1d_blocks(3, 4).is_err());
        assert!(make_1d_blocks(1, 0).is_err());
    }

    #[test]
    fn element_blocks_match_interval_blocks_for_p1() {
        let a = make_element_blocks(1, 1).unwrap();
        let b = make_1d_blocks(2, 1).unwrap();
        assert_eq!(a.anchors[0].footprint, b.anchors[0].footprint);
        assert_eq!(a.cell_period, b.cell_period);
    }

    #[test]
    fn element_blocks_p3_1d_geometry() {
        let pattern = make_element_blocks(3, 1).unwrap();
        assert_eq!(pattern.block_size(0), 4);
        // stride = one element = 3 dofs
        assert_eq!(pattern.cell_period[0] * pattern.classes.period[0], 3);
    }

    #[test]
    fn element_blocks_p2_2d_natural_weights() {
        let pattern = make_element_blocks(2, 2).unwrap();
        let anchor = &pattern.anchors[0];
        assert_eq!(anchor.footprint.len(), 9);
        let rule = WeightRule::natural(SchwarzVariant::Additive);
        for (t, &(c, _)) in anchor.footprint.iter().enumerate() {
            let off = pattern.classes.classes[c].offset;
            let expect = match (off[0] % 2 != 0, off[1] % 2 != 0) {
                (false, false) => 0.25,
                (true, true) => 1.0,
                _ => 0.5,
            };
            assert_abs_diff_eq!(dof_weight(&rule, anchor, t), expect, epsilon = 0.0);
        }
    }

    #[test]
    fn biot_blocks_have_size_51_and_paper_weights() {
        let pattern = make_biot_pressure_blocks().unwrap();
        let anchor = &pattern.anchors[0];
        assert_eq!(anchor.footprint.len(), 51);
        let rule = WeightRule::natural(SchwarzVariant::Additive);
        // last entry is the pressure dof
        assert_eq!(anchor.roles[50], DofRole::Pressure);
        assert_abs_diff_eq!(dof_weight(&rule, anchor, 50), 1.0, epsilon = 0.0);
        let mut seen = BTreeMap::new();
        for t in 0..50 {
            let w = dof_weight(&rule, anchor, t);
            *seen.entry(anchor.roles[t]).or_insert(w) = w;
            let expect = match anchor.roles[t] {
                DofRole::DispVertex => 1.0 / 9.0,
                DofRole::DispEdge => 1.0 / 6.0,
                DofRole::DispCell => 0.25,
                other => panic!("unexpected role {other:?}"),
            };
            assert_abs_diff_eq!(w, expect, epsilon = 1e-15);
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn partition_of_unity_is_exact() {
        for (p, k, ov) in [(1, 2, 1), (1, 3, 1), (1, 5, 2), (1, 7, 4), (2, 3, 1)] {
            let pattern = make_1d_interval_blocks(p, k, ov).unwrap();
            let rule = WeightRule::natural(SchwarzVariant::Additive);
            check_partition(&pattern, &rule);
        }
        for (p, d) in [(1, 2), (2, 2), (3, 2), (4, 1)] {
            let pattern = make_element_blocks(p, d).unwrap();
            check_partition(&pattern, &WeightRule::natural(SchwarzVariant::Additive));
        }
        let pattern = make_biot_pressure_blocks().unwrap();
        check_partition(&pattern, &WeightRule::natural(SchwarzVariant::Additive));
    }

    /// Sum of lifted weights over all containing blocks must be exactly one
    /// (AS natural); exactly one owner with mask one (RAS natural).
    fn check_partition(pattern: &BlockPattern, rule: &WeightRule) {
        let dim = pattern.classes.dim;
        let ras = WeightRule::natural(SchwarzVariant::Restricted);
        for c in 0..pattern.classes.len() {
            for my in 0..(if dim == 2 { pattern.cell_period[1] } else { 1 }) {
                for mx in 0..pattern.cell_period[0] {
                    let inst = containing_instances(pattern, c, [mx, my]);
                    // Exact rational identity: sum of 1/count over the
                    // containing blocks is 1 <=> sum of L/count equals L.
                    let mut counts = Vec::new();
                    let mut owners = 0;
                    for &(r, shift) in &inst {
                        let anchor = &pattern.anchors[r];
                        // entry index of this dof within the shifted instance
                        for (t, &(ce, celle)) in anchor.footprint.iter().enumerate() {
                            let shifted = [
                                celle[0] + shift[0] * pattern.cell_period[0],
                                celle[1] + shift[1] * pattern.cell_period[1],
                            ];
                            if ce == c && shifted == [mx, my] {
                                assert!(dof_weight(rule, anchor, t) > 0.0);
                                counts.push(anchor.counts[t] as i64);
                                if dof_weight(&ras, anchor, t) == 1.0 {
                                    owners += 1;
                                }
                            }
                        }
                    }
                    let l = counts.iter().copied().fold(1i64, lcm);
                    let total: i64 = counts.iter().map(|&cnt| l / cnt).sum();
                    assert_eq!(total, l, "AS partition of unity");
                    assert_eq!(owners, 1, "RAS single ownership");
                }
            }
        }
    }

    #[test]
    fn local_matrices_match_hand_results() {
        let spec = GridSpec::new(1, 1.0, 1).unwrap();
        let st = assemble_poisson_stencils(&spec).unwrap();
        let p2 = make_1d_blocks(2, 1).unwrap();
        let a = local_matrix(&p2, &st, 0);
        assert_eq!(a.shape(), &[2, 2]);
        assert_abs_diff_eq!(a[[0, 0]], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a[[0, 1]], -1.0, epsilon = 1e-14);
        let p3 = make_1d_blocks(3, 1).unwrap();
        let a = local_matrix(&p3, &st, 0);
        for i in 0..3usize {
            for j in 0..3usize {
                let expect = if i == j {
                    2.0
                } else if i.abs_diff(j) == 1 {
                    -1.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(a[[i, j]], expect, epsilon = 1e-14);
            }
        }
        assert!(local_matrix_inverse(&p3, &st, 0).is_ok());
    }
}
