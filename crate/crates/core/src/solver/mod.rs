//! Geometric multigrid on finite Dirichlet grids with the same Schwarz
//! smoothers as the Fourier analysis, used to measure actual asymptotic
//! convergence factors and iteration counts.

pub mod periodic;

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, LUFactorized, Solve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_biot_stencils, assemble_poisson_stencils, BiotParams, ClassSet, GridSpec, IVec,
    StencilSet,
};
use crate::error::CoreError;
use crate::lfa::coarse_weights_1d;
use crate::linalg::LagrangeBasis;
use crate::schwarz::{dof_weight, BlockPattern, WeightRule};

/// Problem definition able to produce stencils at every grid level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ProblemDef {
    Poisson(GridSpec),
    Biot { params: BiotParams, mesh_size: f64 },
}

impl ProblemDef {
    pub fn dim(&self) -> usize {
        match self {
            ProblemDef::Poisson(spec) => spec.dim,
            ProblemDef::Biot { .. } => 2,
        }
    }

    pub fn mesh_size(&self) -> f64 {
        match self {
            ProblemDef::Poisson(spec) => spec.mesh_size,
            ProblemDef::Biot { mesh_size, .. } => *mesh_size,
        }
    }

    /// Stencils for a level whose elements are `factor` times coarser than
    /// the finest level.
    pub fn stencils_at(&self, factor: i64) -> Result<StencilSet, CoreError> {
        match self {
            ProblemDef::Poisson(spec) => {
                let coarse =
                    GridSpec::new(spec.dim, spec.mesh_size * factor as f64, spec.poly_degree)?;
                assemble_poisson_stencils(&coarse)
            }
            ProblemDef::Biot { params, mesh_size } => {
                assemble_biot_stencils(params, mesh_size * factor as f64)
            }
        }
    }
}

/// Interior dofs of a uniform grid of `elements`^d elements with
/// homogeneous Dirichlet conditions on every field.
#[derive(Debug)]
pub struct FiniteGrid {
    pub classes: ClassSet,
    pub elements: i64,
    pub lattice_h: f64,
    /// Per-class cell ranges [lo, hi) per dimension.
    class_lo: Vec<IVec>,
    class_hi: Vec<IVec>,
    class_base: Vec<usize>,
    len: usize,
}

impl FiniteGrid {
    pub fn new(classes: ClassSet, elements: i64, lattice_h: f64) -> Self {
        let dim = classes.dim;
        let mut class_lo = Vec::new();
        let mut class_hi = Vec::new();
        let mut class_base = Vec::new();
        let mut len = 0usize;
        for c in 0..classes.len() {
            let off = classes.classes[c].offset;
            let mut lo = [0i64, 0];
            let mut hi = [1i64, 1];
            for j in 0..dim {
                // interior: 0 < off + P*m < P*E
                lo[j] = if off[j] == 0 { 1 } else { 0 };
                hi[j] = elements;
            }
            class_lo.push(lo);
            class_hi.push(hi);
            class_base.push(len);
            let nx = (hi[0] - lo[0]).max(0);
            let ny = if dim == 2 { (hi[1] - lo[1]).max(0) } else { 1 };
            len += (nx * ny) as usize;
        }
        Self { classes, elements, lattice_h, class_lo, class_hi, class_base, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn lookup(&self, class: usize, cell: IVec) -> Option<usize> {
        let lo = self.class_lo[class];
        let hi = self.class_hi[class];
        if cell[0] < lo[0] || cell[0] >= hi[0] {
            return None;
        }
        if self.classes.dim == 2 && (cell[1] < lo[1] || cell[1] >= hi[1]) {
            return None;
        }
        let nx = hi[0] - lo[0];
        let lin = if self.classes.dim == 2 {
            (cell[1] - lo[1]) * nx + (cell[0] - lo[0])
        } else {
            cell[0] - lo[0]
        };
        Some(self.class_base[class] + lin as usize)
    }

    /// Inverse of [`lookup`].
    pub fn dof(&self, idx: usize) -> (usize, IVec) {
        let class = match self.class_base.binary_search(&idx) {
            Ok(c) => {
                // first class with this base that is non-empty
                let mut c = c;
                while c + 1 < self.class_base.len() && self.class_base[c + 1] == idx {
                    c += 1;
                }
                c
            }
            Err(i) => i - 1,
        };
        let lo = self.class_lo[class];
        let hi = self.class_hi[class];
        let nx = hi[0] - lo[0];
        let lin = (idx - self.class_base[class]) as i64;
        let cell = if self.classes.dim == 2 {
            [lo[0] + lin % nx, lo[1] + lin / nx]
        } else {
            [lo[0] + lin, 0]
        };
        (class, cell)
    }

    pub fn iter_dofs(&self) -> impl Iterator<Item = (usize, (usize, IVec))> + '_ {
        (0..self.len).map(move |i| (i, self.dof(i)))
    }
}

/// Matrix-free application of a stencil operator on a finite grid, with a
/// fast constant-offset path away from the boundary.
pub struct StencilOperator {
    pub grid: Arc<FiniteGrid>,
    rows: Vec<Vec<(usize, IVec, f64)>>,
    core_margin: i64,
}

impl StencilOperator {
    pub fn new(grid: Arc<FiniteGrid>, stencils: &StencilSet) -> Self {
        assert_eq!(grid.classes, stencils.classes);
        let nclass = grid.classes.len();
        let mut rows = Vec::with_capacity(nclass);
        let mut margin = 1i64;
        for c in 0..nclass {
            let row: Vec<(usize, IVec, f64)> = stencils.row(c).collect();
            for &(_, q, _) in &row {
                margin = margin.max(q[0].abs()).max(q[1].abs());
            }
            rows.push(row);
        }
        Self { grid, rows, core_margin: margin + 1 }
    }

    /// y = A x
    ///
    /// Away from the boundary every coupling resolves to a constant index
    /// offset along a row of cells; the offsets are rebuilt at each row
    /// start because class ranges have different widths.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let grid = &*self.grid;
        let dim = grid.classes.dim;
        let e = grid.elements;
        let m = self.core_margin;
        let mut deltas: Vec<(isize, f64)> = Vec::new();
        for c in 0..grid.classes.len() {
            let lo = grid.class_lo[c];
            let hi = grid.class_hi[c];
            if hi[0] <= lo[0] {
                continue;
            }
            let row = &self.rows[c];
            let ys = if dim == 2 { lo[1]..hi[1] } else { 0..1 };
            for my in ys {
                let safe_y = dim == 1 || (my >= m && my < e - m);
                let (fast_lo, fast_hi) = if safe_y {
                    (m.max(lo[0]), (e - m).min(hi[0]))
                } else {
                    (hi[0], hi[0]) // boundary row: slow path only
                };
                let mut fast_ok = fast_lo < fast_hi;
                if fast_ok {
                    deltas.clear();
                    let base = grid.lookup(c, [fast_lo, my]).unwrap() as isize;
                    for &(tgt, q, v) in row {
                        match grid.lookup(tgt, [fast_lo + q[0], my + q[1]]) {
                            Some(t) => deltas.push((t as isize - base, v)),
                            None => {
                                fast_ok = false;
                                break;
                            }
                        }
                    }
                }
                let mut mx = lo[0];
                while mx < hi[0] {
                    if fast_ok && mx == fast_lo {
                        // contiguous dof indices along the row
                        let base = grid.lookup(c, [mx, my]).unwrap();
                        for (k, i) in (base..base + (fast_hi - fast_lo) as usize).enumerate() {
                            let mut acc = 0.0;
                            let off = i as isize;
                            for &(d, v) in &deltas {
                                acc += v * x[(off + d) as usize];
                            }
                            y[i] = acc;
                            let _ = k;
                        }
                        mx = fast_hi;
                        continue;
                    }
                    let i = grid.lookup(c, [mx, my]).unwrap();
                    let mut acc = 0.0;
                    for &(tgt, q, v) in row {
                        if let Some(t) = grid.lookup(tgt, [mx + q[0], my + q[1]]) {
                            acc += v * x[t];
                        }
                    }
                    y[i] = acc;
                    mx += 1;
                }
            }
        }
    }

    /// r = b - A x
    pub fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        self.apply(x, r);
        for i in 0..r.len() {
            r[i] = b[i] - r[i];
        }
    }

    pub fn assemble_dense(&self) -> Array2<f64> {
        let n = self.grid.len();
        let mut a = Array2::<f64>::zeros((n, n));
        for (i, (c, cell)) in self.grid.iter_dofs() {
            for &(tgt, q, v) in &self.rows[c] {
                if let Some(j) = self.grid.lookup(tgt, [cell[0] + q[0], cell[1] + q[1]]) {
                    a[[i, j]] += v;
                }
            }
        }
        a
    }
}

/// One Schwarz block instance on the finite grid.
struct BlockInstance {
    dofs: Vec<usize>,
    weights: Vec<f64>,
    solver: usize,
}

/// All Schwarz blocks of one level with cached local factorizations
/// (boundary truncations share factorizations by footprint signature).
pub struct FiniteBlocks {
    instances: Vec<BlockInstance>,
    solvers: Vec<LUFactorized<ndarray::OwnedRepr<f64>>>,
}

impl FiniteBlocks {
    pub fn new(
        grid: &FiniteGrid,
        stencils: &StencilSet,
        pattern: &BlockPattern,
        rule: &WeightRule,
    ) -> Result<Self, CoreError> {
        let dim = grid.classes.dim;
        let e = grid.elements;
        // instance base cells: anchors shifted by multiples of cell_period
        let cp = pattern.cell_period;
        let reach = pattern
            .anchors
            .iter()
            .flat_map(|a| a.footprint.iter())
            .map(|&(_, cell)| cell[0].abs().max(cell[1].abs()))
            .max()
            .unwrap_or(1);
        let shift_range = |span: i64| {
            let lo = (-reach - 1) / span - 1;
            let hi = (e + reach) / span + 1;
            lo..=hi
        };
        let mut instances = Vec::new();
        let mut solvers = Vec::new();
        let mut cache: BTreeMap<(usize, Vec<bool>), usize> = BTreeMap::new();
        let ty_range: Vec<i64> = if dim == 2 { shift_range(cp[1]).collect() } else { vec![0] };
        for (r, anchor) in pattern.anchors.iter().enumerate() {
            for &ty in &ty_range {
                for tx in shift_range(cp[0]) {
                    let mut kept = Vec::new();
                    let mut dofs = Vec::new();
                    for (t, &(class, cell)) in anchor.footprint.iter().enumerate() {
                        let shifted = [cell[0] + tx * cp[0], cell[1] + ty * cp[1]];
                        match grid.lookup(class, shifted) {
                            Some(i) => {
                                kept.push(t);
                                dofs.push(i);
                            }
                            None => {}
                        }
                    }
                    if dofs.is_empty() {
                        continue;
                    }
                    let mask: Vec<bool> =
                        (0..anchor.footprint.len()).map(|t| kept.contains(&t)).collect();
                    let solver = match cache.get(&(r, mask.clone())) {
                        Some(&s) => s,
                        None => {
                            let k = kept.len();
                            let mut a = Array2::<f64>::zeros((k, k));
                            for (ii, &ti) in kept.iter().enumerate() {
                                let (ci, celli) = anchor.footprint[ti];
                                for (jj, &tj) in kept.iter().enumerate() {
                                    let (cj, cellj) = anchor.footprint[tj];
                                    a[[ii, jj]] = stencils.coef(
                                        ci,
                                        cj,
                                        [cellj[0] - celli[0], cellj[1] - celli[1]],
                                    );
                                }
                            }
                            let lu = a.factorize().map_err(|_| {
                                CoreError::SingularLocalMatrix {
                                    anchor: [tx, ty],
                                    cond: f64::INFINITY,
                                }
                            })?;
                            solvers.push(lu);
                            cache.insert((r, mask.clone()), solvers.len() - 1);
                            solvers.len() - 1
                        }
                    };
                    let weights: Vec<f64> =
                        kept.iter().map(|&t| dof_weight(rule, anchor, t)).collect();
                    instances.push(BlockInstance { dofs, weights, solver });
                }
            }
        }
        Ok(Self { instances, solvers })
    }

    pub fn block_count(&self) -> usize {
        self.instances.len()
    }
}

/// One additive (or restricted additive) sweep: all corrections computed
/// from the same residual, accumulated in fixed block order.
pub fn apply_schwarz(
    op: &StencilOperator,
    blocks: &FiniteBlocks,
    x: &mut [f64],
    b: &[f64],
    scratch: &mut Scratch,
) {
    let n = x.len();
    scratch.resize(n);
    let r = &mut scratch.r;
    op.residual(b, x, r);
    let corr = &mut scratch.corr;
    corr.iter_mut().for_each(|v| *v = 0.0);
    for inst in &blocks.instances {
        let k = inst.dofs.len();
        let mut rloc = Array1::<f64>::zeros(k);
        for (t, &d) in inst.dofs.iter().enumerate() {
            rloc[t] = r[d];
        }
        let delta = blocks.solvers[inst.solver]
            .solve_into(rloc)
            .expect("local solve of factorized block");
        for (t, &d) in inst.dofs.iter().enumerate() {
            corr[d] += inst.weights[t] * delta[t];
        }
    }
    for i in 0..n {
        x[i] += corr[i];
    }
}

/// Reusable work vectors of one level.
pub struct Scratch {
    pub r: Vec<f64>,
    pub corr: Vec<f64>,
}

impl Scratch {
    fn new() -> Self {
        Self { r: Vec::new(), corr: Vec::new() }
    }
    fn resize(&mut self, n: usize) {
        self.r.resize(n, 0.0);
        self.corr.resize(n, 0.0);
    }
}

/// Nested-embedding prolongation between two consecutive levels.
pub struct Prolongation {
    /// per fine dof: (coarse dof, weight)
    entries: Vec<Vec<(usize, f64)>>,
}

impl Prolongation {
    pub fn new(fine: &FiniteGrid, coarse: &FiniteGrid) -> Self {
        let cs = &fine.classes;
        let dim = cs.dim;
        let bases: Vec<LagrangeBasis> =
            cs.fields.iter().map(|f| LagrangeBasis::new(f.degree)).collect();
        let mut entries = Vec::with_capacity(fine.len());
        for (_, (class, cell)) in fine.iter_dofs() {
            let field = cs.classes[class].field;
            let spacing = cs.fields[field].spacing;
            let x = cs.position(class, cell);
            let wx = coarse_weights_1d(&bases[field], x[0] / spacing);
            let wy = if dim == 2 {
                coarse_weights_1d(&bases[field], x[1] / spacing)
            } else {
                vec![(0, 1.0)]
            };
            let mut row = Vec::new();
            for &(ux, vx) in &wx {
                for &(uy, vy) in &wy {
                    let w = vx * vy;
                    if w == 0.0 {
                        continue;
                    }
                    // coarse lattice position in coarse-lattice units
                    let pos = [ux * spacing / 2, uy * spacing / 2];
                    if let Some((cc, cm)) = coarse.classes.dof_at(field, pos) {
                        if let Some(j) = coarse.lookup(cc, cm) {
                            row.push((j, w));
                        }
                    }
                }
            }
            entries.push(row);
        }
        Self { entries }
    }

    /// fine += P coarse
    pub fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        for (i, row) in self.entries.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, w) in row {
                acc += w * coarse[j];
            }
            fine[i] += acc;
        }
    }

    /// coarse = P^T fine
    pub fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        coarse.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.entries.iter().enumerate() {
            let f = fine[i];
            for &(j, w) in row {
                coarse[j] += w * f;
            }
        }
    }

    pub fn assemble_dense(&self, nc: usize) -> Array2<f64> {
        let mut p = Array2::<f64>::zeros((self.entries.len(), nc));
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, w) in row {
                p[[i, j]] += w;
            }
        }
        p
    }
}

/// Cycle index: V or W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleKind {
    V,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub kind: CycleKind,
    pub nu1: u32,
    pub nu2: u32,
}

pub struct Level {
    pub grid: Arc<FiniteGrid>,
    pub op: StencilOperator,
    pub blocks: FiniteBlocks,
    /// prolongation from the next-coarser level into this one
    pub prolong: Option<Prolongation>,
}

pub struct Hierarchy {
    pub problem: ProblemDef,
    pub levels: Vec<Level>,
    coarsest_lu: LUFactorized<ndarray::OwnedRepr<f64>>,
}

/// Build the multigrid hierarchy: nested uniform grids halving the element
/// count, rediscretized operators (equal to the Galerkin coarse operators
/// for these nested spaces), truncated block patterns, and canonical
/// embedding transfers. `depth` limits the number of levels; `None` coarsens
/// while the next level still has at least one interior dof.
pub fn build_hierarchy(
    problem: &ProblemDef,
    pattern: &BlockPattern,
    rule: &WeightRule,
    elements: i64,
    depth: Option<usize>,
) -> Result<Hierarchy, CoreError> {
    if elements < 2 || (elements & (elements - 1)) != 0 {
        return Err(CoreError::Config(format!(
            "element count must be a power of two >= 2, got {elements}"
        )));
    }
    let mut levels: Vec<Level> = Vec::new();
    let mut e = elements;
    let mut factor = 1i64;
    loop {
        let stencils = problem.stencils_at(factor)?;
        let grid = Arc::new(FiniteGrid::new(
            stencils.classes.clone(),
            e,
            stencils.lattice_h,
        ));
        if grid.is_empty() {
            break;
        }
        let op = StencilOperator::new(grid.clone(), &stencils);
        let blocks = FiniteBlocks::new(&grid, &stencils, pattern, rule)?;
        if let Some(prev) = levels.last_mut() {
            prev.prolong = Some(Prolongation::new(&prev.grid, &grid));
        }
        levels.push(Level { grid, op, blocks, prolong: None });
        let at_depth = depth.map(|d| levels.len() >= d).unwrap_or(false);
        if at_depth || e % 2 != 0 {
            break;
        }
        // stop if the next level would be empty
        let next = FiniteGrid::new(stencils.classes.clone(), e / 2, stencils.lattice_h * 2.0);
        if next.is_empty() {
            break;
        }
        e /= 2;
        factor *= 2;
    }
    let coarsest = levels.last().unwrap();
    let dense = coarsest.op.assemble_dense();
    let coarsest_lu = dense
        .factorize()
        .map_err(|e| CoreError::Linalg(format!("coarsest-level factorization: {e}")))?;
    Ok(Hierarchy { problem: problem.clone(), levels, coarsest_lu })
}

impl Hierarchy {
    pub fn finest(&self) -> &Level {
        &self.levels[0]
    }

    pub fn dof_count(&self) -> usize {
        self.levels[0].grid.len()
    }

    /// One multigrid cycle on level `l` for A x = b.
    fn cycle(&self, l: usize, x: &mut [f64], b: &[f64], spec: &CycleSpec, ws: &mut Workspaces) {
        if l == self.levels.len() - 1 {
            let rhs = Array1::from(b.to_vec());
            let sol = self.coarsest_lu.solve_into(rhs).expect("coarsest solve");
            x.copy_from_slice(sol.as_slice().unwrap());
            return;
        }
        let level = &self.levels[l];
        let nc = self.levels[l + 1].grid.len();
        for _ in 0..spec.nu1 {
            apply_schwarz(&level.op, &level.blocks, x, b, &mut ws.scratch[l]);
        }
        let gamma = match spec.kind {
            CycleKind::V => 1,
            CycleKind::W => 2,
        };
        for g in 0..gamma {
            if g > 0 && l + 2 == self.levels.len() {
                break; // repeated exact coarsest solves are idempotent
            }
            let mut r = std::mem::take(&mut ws.res[l]);
            r.resize(level.grid.len(), 0.0);
            level.op.residual(b, x, &mut r);
            let mut bc = std::mem::take(&mut ws.coarse_b[l]);
            bc.resize(nc, 0.0);
            let prolong = level.prolong.as_ref().expect("non-coarsest level has transfers");
            prolong.restrict(&r, &mut bc);
            let mut xc = std::mem::take(&mut ws.coarse_x[l]);
            xc.clear();
            xc.resize(nc, 0.0);
            self.cycle(l + 1, &mut xc, &bc, spec, ws);
            prolong.prolong_add(&xc, x);
            ws.res[l] = r;
            ws.coarse_b[l] = bc;
            ws.coarse_x[l] = xc;
        }
        for _ in 0..spec.nu2 {
            apply_schwarz(&level.op, &level.blocks, x, b, &mut ws.scratch[l]);
        }
    }

    pub fn run_cycle(&self, x: &mut [f64], b: &[f64], spec: &CycleSpec) {
        let mut ws = Workspaces::new(self.levels.len());
        self.cycle(0, x, b, spec, &mut ws);
    }
}

struct Workspaces {
    scratch: Vec<Scratch>,
    res: Vec<Vec<f64>>,
    coarse_b: Vec<Vec<f64>>,
    coarse_x: Vec<Vec<f64>>,
}

impl Workspaces {
    fn new(levels: usize) -> Self {
        Self {
            scratch: (0..levels).map(|_| Scratch::new()).collect(),
            res: vec![Vec::new(); levels],
            coarse_b: vec![Vec::new(); levels],
            coarse_x: vec![Vec::new(); levels],
        }
    }
}

/// Measured asymptotic convergence factor: run the cycle on A e = 0 from a
/// random seeded start, discard a transient, take the geometric mean of the
/// last `tail` residual-reduction ratios (error renormalized every step).
pub fn measure_rho_h(
    hier: &Hierarchy,
    spec: &CycleSpec,
    iterations: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>), CoreError> {
    if spec.nu1 + spec.nu2 == 0 {
        return Err(CoreError::Config("measurement needs nu1 + nu2 >= 1".into()));
    }
    let n = hier.dof_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = vec![0.0; n];
    let mut ws = Workspaces::new(hier.levels.len());
    let mut r = vec![0.0; n];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    hier.finest().op.apply(&e, &mut r);
    let mut res_prev = norm(&r);
    let mut ratios = Vec::with_capacity(iterations);
    let mut diverging = 0usize;
    for _ in 0..iterations {
        hier.cycle(0, &mut e, &b, spec, &mut ws);
        hier.finest().op.apply(&e, &mut r);
        let res = norm(&r);
        let ratio = res / res_prev;
        ratios.push(ratio);
        if ratio > 1.5 {
            diverging += 1;
            if diverging >= 5 {
                return Err(CoreError::Divergence(1.5));
            }
        } else {
            diverging = 0;
        }
        // renormalize the error to avoid under/overflow
        let en = norm(&e);
        if en > 0.0 {
            for v in e.iter_mut() {
                *v /= en;
            }
            res_prev = res / en;
        } else {
            res_prev = res;
        }
    }
    let tail = 10.min(ratios.len());
    let transient = ratios.len() - tail;
    let geo: f64 = ratios[transient..].iter().map(|r| r.ln()).sum::<f64>() / tail as f64;
    Ok((geo.exp(), ratios))
}

/// Number of cycles needed to reduce the initial residual by `tol` for a
/// seeded random right-hand side and zero initial guess. Capped at 500.
pub fn count_iterations(
    hier: &Hierarchy,
    spec: &CycleSpec,
    tol: f64,
    seed: u64,
) -> Result<(usize, Vec<f64>), CoreError> {
    let n = hier.dof_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r0 = norm(&b);
    let mut history = vec![r0];
    if r0 == 0.0 || 1.0 <= tol {
        return Ok((0, history));
    }
    let mut ws = Workspaces::new(hier.levels.len());
    for it in 1..=500 {
        hier.cycle(0, &mut x, &b, spec, &mut ws);
        hier.finest().op.residual(&b, &x, &mut r);
        let rn = norm(&r);
        history.push(rn);
        if rn / r0 <= tol {
            return Ok((it, history));
        }
    }
    Err(CoreError::Config(format!(
        "no convergence to {tol:e} within 500 cycles (last ratio {:.3e})",
        history.last().unwrap() / r0
    )))
}
