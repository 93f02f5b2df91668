//! Benchmark tables: frozen configurations, golden-value comparison and
//! report emission (CSV/Markdown/JSON).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_biot_stencils, assemble_poisson_stencils, BiotParams, GridSpec,
};
use crate::error::CoreError;
use crate::lfa::{default_window, sweep_rhos, AnalysisSetup, SweepSymmetry};
use crate::optimize::{optimize_weights, WeightSearchSpec};
use crate::schwarz::{
    make_1d_blocks, make_biot_pressure_blocks, make_element_blocks, DofRole, SchwarzVariant,
    WeightRule, WeightScheme,
};
use crate::solver::{build_hierarchy, count_iterations, measure_rho_h, CycleKind, CycleSpec, ProblemDef};

/// Identifier of a benchmark table. `T2D` is the 2D element-block AS/RAS
/// table that sits between T4 and T5 in the benchmark set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T2D,
    T5,
    T6,
    T7,
    T8,
}

impl FromStr for TableId {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(TableId::T1),
            "T2" => Ok(TableId::T2),
            "T3" => Ok(TableId::T3),
            "T4" => Ok(TableId::T4),
            "T2D" => Ok(TableId::T2D),
            "T5" => Ok(TableId::T5),
            "T6" => Ok(TableId::T6),
            "T7" => Ok(TableId::T7),
            "T8" => Ok(TableId::T8),
            other => Err(CoreError::Config(format!(
                "unknown table id {other:?}; expected T1..T8 or T2D"
            ))),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TableId::T1 => "T1",
            TableId::T2 => "T2",
            TableId::T3 => "T3",
            TableId::T4 => "T4",
            TableId::T2D => "T2D",
            TableId::T5 => "T5",
            TableId::T6 => "T6",
            TableId::T7 => "T7",
            TableId::T8 => "T8",
        };
        f.write_str(s)
    }
}

pub fn all_table_ids() -> [TableId; 9] {
    [
        TableId::T1,
        TableId::T2,
        TableId::T3,
        TableId::T4,
        TableId::T2D,
        TableId::T5,
        TableId::T6,
        TableId::T7,
        TableId::T8,
    ]
}

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    Factor(f64),
    /// factor with the optimized weight in parentheses
    FactorWeight(f64, f64),
    Iterations(u32),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Empty => "-".to_string(),
            Cell::Factor(v) => format!("{v:.2}"),
            Cell::FactorWeight(v, w) => format!("{v:.2} ({w:.2})"),
            Cell::Iterations(n) => format!("{n}"),
        }
    }

    fn parse(text: &str) -> Result<Cell, CoreError> {
        let t = text.trim();
        if t.is_empty() || t == "-" {
            return Ok(Cell::Empty);
        }
        if let Some(open) = t.find('(') {
            let close = t
                .find(')')
                .ok_or_else(|| CoreError::Config(format!("malformed cell {t:?}")))?;
            let v = t[..open].trim().parse::<f64>();
            let w = t[open + 1..close].trim().parse::<f64>();
            return match (v, w) {
                (Ok(v), Ok(w)) => Ok(Cell::FactorWeight(v, w)),
                _ => Err(CoreError::Config(format!("malformed cell {t:?}"))),
            };
        }
        if let Ok(n) = t.parse::<u32>() {
            return Ok(Cell::Iterations(n));
        }
        t.parse::<f64>()
            .map(Cell::Factor)
            .map_err(|_| CoreError::Config(format!("malformed cell {t:?}")))
    }
}

/// Computed table with layout metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableData {
    pub id: String,
    pub title: String,
    pub row_label: String,
    pub col_headers: Vec<String>,
    pub rows: Vec<(String, Vec<Cell>)>,
    /// provenance lines emitted as comments
    pub provenance: Vec<String>,
}

/// Comparison outcome of one cell against its golden value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellCheck {
    pub row: String,
    pub col: String,
    pub computed: Cell,
    pub golden: Cell,
    pub delta: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Ok,
    /// outside the primary tolerance but inside the relaxed flag gate
    Flagged,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub checks: Vec<CellCheck>,
    pub ok: usize,
    pub flagged: usize,
    pub failed: usize,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

/// Per-table tolerances: (primary, optional relaxed flag gate), plus the
/// weight tolerance for tables carrying optimized weights.
pub struct Tolerances {
    pub factor: f64,
    pub factor_flag: Option<f64>,
    pub rho_h: f64,
    pub weight: f64,
    pub iterations: u32,
    pub iterations_flag: Option<u32>,
}

pub fn tolerances(id: TableId) -> Tolerances {
    let strict = Tolerances {
        factor: 0.01,
        factor_flag: None,
        rho_h: 0.02,
        weight: 0.05,
        iterations: 2,
        iterations_flag: None,
    };
    match id {
        TableId::T6 | TableId::T7 => Tolerances {
            factor_flag: Some(0.05),
            ..strict
        },
        TableId::T8 => Tolerances {
            iterations_flag: Some(5),
            ..strict
        },
        _ => strict,
    }
}

/// Overridable knobs of a table run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableJob {
    pub id: TableId,
    /// frequency samples per dimension (None = table default)
    pub samples: Option<usize>,
    /// finest grid in elements per dimension (None = table default)
    pub grid: Option<i64>,
    pub seed: u64,
}

impl TableJob {
    pub fn new(id: TableId) -> Self {
        Self { id, samples: None, grid: None, seed: 2024 }
    }
}

fn poisson_setup(
    d: usize,
    p: usize,
    variant: SchwarzVariant,
    kind: BlockKind,
) -> Result<AnalysisSetup, CoreError> {
    let st = assemble_poisson_stencils(&GridSpec::new(d, 1.0, p)?)?;
    let pattern = match kind {
        BlockKind::Interval { k, ov } => make_1d_blocks(k, ov)?,
        BlockKind::Element => make_element_blocks(p, d)?,
    };
    let window_n = default_window(&pattern)?;
    let symmetry = match (d, variant) {
        (1, _) => SweepSymmetry::Central,
        (_, SchwarzVariant::Additive) => SweepSymmetry::Dihedral,
        (_, SchwarzVariant::Restricted) => SweepSymmetry::CentralSwap,
    };
    let label = serde_json::json!({
        "problem": if d == 1 { "poisson1d" } else { "poisson2d" },
        "p": p,
        "blocks": pattern.descriptor(&WeightRule::natural(variant)),
    });
    Ok(AnalysisSetup {
        stencils: st,
        pattern,
        rule: WeightRule::natural(variant),
        window_n,
        equilibrate: true,
        symmetry,
        label,
    })
}

enum BlockKind {
    Interval { k: usize, ov: usize },
    Element,
}

/// The parameter assumptions used by every Biot table; the benchmark
/// specifies only E, nu and the permeability sweep.
pub fn biot_assumptions(permeability: f64) -> (BiotParams, f64) {
    (
        BiotParams { permeability, ..BiotParams::default() },
        1.0 / 64.0,
    )
}

pub const BIOT_PERMEABILITIES: [f64; 6] = [1.0, 1e-3, 1e-6, 1e-9, 1e-12, 1e-15];

fn biot_k_label(k: f64) -> String {
    if k == 1.0 {
        "1".to_string()
    } else {
        format!("1e{}", k.log10().round() as i64)
    }
}

fn biot_setup(permeability: f64, rule: WeightRule) -> Result<AnalysisSetup, CoreError> {
    let (params, h) = biot_assumptions(permeability);
    let st = assemble_biot_stencils(&params, h)?;
    let pattern = make_biot_pressure_blocks()?;
    let label = serde_json::json!({
        "problem": "biot",
        "K": permeability,
        "h": h,
        "tau": params.time_step,
        "biot_modulus_inverse": params.biot_modulus_inverse,
        "mu_f": params.fluid_viscosity,
        "blocks": pattern.descriptor(&rule),
    });
    Ok(AnalysisSetup {
        stencils: st,
        pattern,
        rule,
        window_n: [16, 16],
        equilibrate: true,
        symmetry: SweepSymmetry::Dihedral,
        label,
    })
}

/// Weights reported as robust for the Biot smoother: displacements at
/// vertices and edges, displacements at interior points, pressure.
pub fn biot_optimal_rule() -> WeightRule {
    let mut map = BTreeMap::new();
    map.insert(DofRole::DispVertex, 0.09);
    map.insert(DofRole::DispEdge, 0.09);
    map.insert(DofRole::DispCell, 0.22);
    map.insert(DofRole::Pressure, 1.02);
    WeightRule { variant: SchwarzVariant::Additive, scheme: WeightScheme::PerRole(map) }
}

const CYCLE_SPLITS: [(u32, u32); 4] = [(1, 0), (1, 1), (2, 1), (2, 2)];

fn provenance(job: &TableJob, extra: Vec<String>) -> Vec<String> {
    let mut lines = vec![
        format!("table: {}", job.id),
        format!("seed: {}", job.seed),
        format!("git: {}", git_hash()),
    ];
    lines.extend(extra);
    lines
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Compute a table.
pub fn run_table(job: &TableJob) -> Result<TableData, CoreError> {
    match job.id {
        TableId::T1 => interval_table(job, SchwarzVariant::Additive),
        TableId::T2 => interval_table(job, SchwarzVariant::Restricted),
        TableId::T3 => optimal_interval_table(job),
        TableId::T4 => element_1d_table(job),
        TableId::T2D => element_2d_table(job),
        TableId::T5 => cycles_2d_table(job),
        TableId::T6 => biot_natural_table(job),
        TableId::T7 => biot_optimal_table(job),
        TableId::T8 => biot_iterations_table(job),
    }
}

fn interval_table(job: &TableJob, variant: SchwarzVariant) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(32);
    let mut rows = Vec::new();
    for ov in 1..=6usize {
        let mut cells = Vec::new();
        for k in 2..=7usize {
            if ov >= k {
                cells.push(Cell::Empty);
                continue;
            }
            let setup = poisson_setup(1, 1, variant, BlockKind::Interval { k, ov })?;
            let rep = sweep_rhos(&setup, samples, &[(1, 0)])?;
            cells.push(Cell::Factor(rep[0].rho_2g));
        }
        rows.push((format!("{ov}"), cells));
    }
    let name = match variant {
        SchwarzVariant::Additive => "additive",
        SchwarzVariant::Restricted => "restricted additive",
    };
    Ok(TableData {
        id: job.id.to_string(),
        title: format!(
            "1D linear elements: two-grid factors, one {name} Schwarz step, natural weights"
        ),
        row_label: "ov".to_string(),
        col_headers: (2..=7).map(|k| format!("k={k}")).collect(),
        rows,
        provenance: provenance(job, vec![format!("samples: {samples}"), "nu: 1".into()]),
    })
}

fn optimal_interval_table(job: &TableJob) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(32);
    let mut rows = Vec::new();
    for ov in 1..=6usize {
        let mut cells = Vec::new();
        for k in 2..=7usize {
            if ov >= k {
                cells.push(Cell::Empty);
                continue;
            }
            let setup =
                poisson_setup(1, 1, SchwarzVariant::Restricted, BlockKind::Interval { k, ov })?;
            let spec = WeightSearchSpec {
                parameter_roles: vec![vec![DofRole::Scalar]],
                bounds: vec![(0.0, 2.0)],
                variant: SchwarzVariant::Restricted,
                scenarios: vec![setup],
                search_samples: samples / 2,
                certificate_samples: samples,
                nu1: 1,
                nu2: 0,
            };
            let result = optimize_weights(&spec)?;
            cells.push(Cell::FactorWeight(result.rho, result.weights[0]));
        }
        rows.push((format!("{ov}"), cells));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "1D linear elements: restricted additive Schwarz with optimized scalar weight"
            .to_string(),
        row_label: "ov".to_string(),
        col_headers: (2..=7).map(|k| format!("k={k}")).collect(),
        rows,
        provenance: provenance(job, vec![format!("samples: {samples}"), "nu: 1".into()]),
    })
}

fn element_1d_table(job: &TableJob) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(32);
    let mut rows = Vec::new();
    for variant in [SchwarzVariant::Additive, SchwarzVariant::Restricted] {
        let mut cells = Vec::new();
        for p in 2..=8usize {
            let setup = poisson_setup(1, p, variant, BlockKind::Element)?;
            let rep = sweep_rhos(&setup, samples, &[(1, 0)])?;
            cells.push(Cell::Factor(rep[0].rho_2g));
        }
        let name = match variant {
            SchwarzVariant::Additive => "AS",
            SchwarzVariant::Restricted => "RAS",
        };
        rows.push((name.to_string(), cells));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "1D element blocks (k = p+1, ov = 1): two-grid factors, nu = 1, natural weights"
            .to_string(),
        row_label: "smoother".to_string(),
        col_headers: (2..=8).map(|p| format!("p={p}")).collect(),
        rows,
        provenance: provenance(job, vec![format!("samples: {samples}"), "nu: 1".into()]),
    })
}

fn element_2d_table(job: &TableJob) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(16);
    let mut rows = Vec::new();
    for variant in [SchwarzVariant::Additive, SchwarzVariant::Restricted] {
        let mut cells = Vec::new();
        for p in 1..=8usize {
            let setup = poisson_setup(2, p, variant, BlockKind::Element)?;
            let rep = sweep_rhos(&setup, samples, &[(2, 0)])?;
            cells.push(Cell::Factor(rep[0].rho_2g));
        }
        let name = match variant {
            SchwarzVariant::Additive => "AS",
            SchwarzVariant::Restricted => "RAS",
        };
        rows.push((name.to_string(), cells));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "2D element blocks: two-grid factors, nu = 2, natural weights".to_string(),
        row_label: "smoother".to_string(),
        col_headers: (1..=8).map(|p| format!("p={p}")).collect(),
        rows,
        provenance: provenance(job, vec![format!("samples: {samples}"), "nu: 2".into()]),
    })
}

fn cycles_2d_table(job: &TableJob) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(16);
    let elements = job.grid.unwrap_or(128);
    let mut rows = Vec::new();
    for p in 1..=8usize {
        let setup = poisson_setup(2, p, SchwarzVariant::Restricted, BlockKind::Element)?;
        let reps = sweep_rhos(&setup, samples, &CYCLE_SPLITS)?;
        let problem = ProblemDef::Poisson(GridSpec::new(2, 1.0 / elements as f64, p)?);
        let pattern = make_element_blocks(p, 2)?;
        let rule = WeightRule::natural(SchwarzVariant::Restricted);
        let hier = build_hierarchy(&problem, &pattern, &rule, elements, None)?;
        let mut cells = Vec::new();
        for (i, &(nu1, nu2)) in CYCLE_SPLITS.iter().enumerate() {
            cells.push(Cell::Factor(reps[i].rho_2g));
            let spec = CycleSpec { kind: CycleKind::V, nu1, nu2 };
            let (rho_h, _) = measure_rho_h(&hier, &spec, 30, job.seed)?;
            cells.push(Cell::Factor(rho_h));
        }
        rows.push((format!("{p}"), cells));
    }
    let mut headers = Vec::new();
    for (nu1, nu2) in CYCLE_SPLITS {
        headers.push(format!("V({nu1}-{nu2}) rho_2g"));
        headers.push(format!("V({nu1}-{nu2}) rho_h"));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "2D element blocks, RAS natural weights: predicted vs measured V-cycle factors"
            .to_string(),
        row_label: "p".to_string(),
        col_headers: headers,
        rows,
        provenance: provenance(
            job,
            vec![format!("samples: {samples}"), format!("elements: {elements}x{elements}")],
        ),
    })
}

fn biot_natural_table(job: &TableJob) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(8);
    let elements = job.grid.unwrap_or(64);
    let mut rows = Vec::new();
    for k in BIOT_PERMEABILITIES {
        let rule = WeightRule::natural(SchwarzVariant::Additive);
        let setup = biot_setup(k, rule.clone())?;
        let reps = sweep_rhos(&setup, samples, &CYCLE_SPLITS)?;
        let (params, h) = biot_assumptions(k);
        let problem = ProblemDef::Biot { params, mesh_size: h * 64.0 / elements as f64 };
        let pattern = make_biot_pressure_blocks()?;
        let hier = build_hierarchy(&problem, &pattern, &rule, elements, None)?;
        let mut cells = Vec::new();
        for (i, &(nu1, nu2)) in CYCLE_SPLITS.iter().enumerate() {
            cells.push(Cell::Factor(reps[i].rho_2g));
            let spec = CycleSpec { kind: CycleKind::W, nu1, nu2 };
            let (rho_h, _) = measure_rho_h(&hier, &spec, 30, job.seed)?;
            cells.push(Cell::Factor(rho_h));
        }
        rows.push((biot_k_label(k), cells));
    }
    let mut headers = Vec::new();
    for (nu1, nu2) in CYCLE_SPLITS {
        headers.push(format!("W({nu1}-{nu2}) rho_2g"));
        headers.push(format!("W({nu1}-{nu2}) rho_h"));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "Biot 51-point blocks, natural weights: predicted vs measured W-cycle factors"
            .to_string(),
        row_label: "K".to_string(),
        col_headers: headers,
        rows,
        provenance: provenance(
            job,
            vec![
                format!("samples: {samples}"),
                format!("elements: {elements}x{elements}"),
                "assumptions: h=1/64, tau=1, 1/M=0, mu_f=1".to_string(),
            ],
        ),
    })
}

fn biot_optimal_table(job: &TableJob) -> Result<TableData, CoreError> {
    let samples = job.samples.unwrap_or(8);
    let mut rows = Vec::new();
    for k in BIOT_PERMEABILITIES {
        let setup = biot_setup(k, biot_optimal_rule())?;
        let reps = sweep_rhos(&setup, samples, &CYCLE_SPLITS)?;
        let cells = reps.iter().map(|r| Cell::Factor(r.rho_2g)).collect();
        rows.push((biot_k_label(k), cells));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "Biot 51-point blocks, weights (0.09, 0.22, 1.02): predicted factors".to_string(),
        row_label: "K".to_string(),
        col_headers: CYCLE_SPLITS.iter().map(|(a, b)| format!("W({a}-{b})")).collect(),
        rows,
        provenance: provenance(
            job,
            vec![
                format!("samples: {samples}"),
                "assumptions: h=1/64, tau=1, 1/M=0, mu_f=1".to_string(),
            ],
        ),
    })
}

fn biot_iterations_table(job: &TableJob) -> Result<TableData, CoreError> {
    let elements = job.grid.unwrap_or(64);
    let rule = biot_optimal_rule();
    let pattern = make_biot_pressure_blocks()?;
    let mut rows = Vec::new();
    for k in BIOT_PERMEABILITIES {
        let (params, h) = biot_assumptions(k);
        let problem = ProblemDef::Biot { params, mesh_size: h * 64.0 / elements as f64 };
        let hier = build_hierarchy(&problem, &pattern, &rule, elements, None)?;
        let mut cells = Vec::new();
        for (nu1, nu2) in CYCLE_SPLITS {
            for kind in [CycleKind::V, CycleKind::W] {
                let spec = CycleSpec { kind, nu1, nu2 };
                // the 500-cycle cap reports non-convergence as an empty cell
                match count_iterations(&hier, &spec, 1e-10, job.seed) {
                    Ok((its, _)) => cells.push(Cell::Iterations(its as u32)),
                    Err(CoreError::Config(_)) => cells.push(Cell::Empty),
                    Err(e) => return Err(e),
                }
            }
        }
        rows.push((biot_k_label(k), cells));
    }
    let mut headers = Vec::new();
    for (nu1, nu2) in CYCLE_SPLITS {
        headers.push(format!("({nu1}-{nu2}) V"));
        headers.push(format!("({nu1}-{nu2}) W"));
    }
    Ok(TableData {
        id: job.id.to_string(),
        title: "Biot 51-point blocks, weights (0.09, 0.22, 1.02): cycles to reduce the residual by 1e-10"
            .to_string(),
        row_label: "K".to_string(),
        col_headers: headers,
        rows,
        provenance: provenance(
            job,
            vec![
                format!("elements: {elements}x{elements}"),
                "tol: 1e-10".to_string(),
                "assumptions: h=1/64, tau=1, 1/M=0, mu_f=1".to_string(),
            ],
        ),
    })
}

// ---------------------------------------------------------------------
// Emission

impl TableData {
    /// CSV: comma delimiter, `.` decimal, 2-decimal fixed factor cells,
    /// provenance as trailing comment lines. Byte-identical across reruns
    /// of the same configuration.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.row_label);
        for h in &self.col_headers {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(label);
            for c in cells {
                out.push(',');
                out.push_str(&c.render());
            }
            out.push('\n');
        }
        for line in &self.provenance {
            out.push_str(&format!("# {line}\n"));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n", self.title);
        out.push_str(&format!("| {} |", self.row_label));
        for h in &self.col_headers {
            out.push_str(&format!(" {h} |"));
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &self.col_headers {
            out.push_str("---|");
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(&format!("| {label} |"));
            for c in cells {
                out.push_str(&format!(" {} |", c.render()));
            }
            out.push('\n');
        }
        out.push('\n');
        for line in &self.provenance {
            out.push_str(&format!("_{line}_\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("table serialization")
    }

    /// Parse a golden CSV with the same layout.
    pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<(String, Vec<Cell>)>), CoreError> {
        let mut headers = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if i == 0 {
                headers = fields.iter().skip(1).map(|s| s.trim().to_string()).collect();
                continue;
            }
            let label = fields[0].trim().to_string();
            let cells = fields[1..]
                .iter()
                .map(|f| Cell::parse(f))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((label, cells));
        }
        Ok((headers, rows))
    }
}

/// Compare a computed table against its golden values with the table's
/// tolerances.
pub fn compare(
    id: TableId,
    computed: &TableData,
    golden_rows: &[(String, Vec<Cell>)],
) -> Result<Comparison, CoreError> {
    let tol = tolerances(id);
    let mut checks = Vec::new();
    if golden_rows.len() != computed.rows.len() {
        return Err(CoreError::Config(format!(
            "golden has {} rows, computed {}",
            golden_rows.len(),
            computed.rows.len()
        )));
    }
    for ((label, cells), (glabel, gcells)) in computed.rows.iter().zip(golden_rows) {
        if label != glabel {
            return Err(CoreError::Config(format!(
                "row label mismatch: {label} vs {glabel}"
            )));
        }
        if cells.len() != gcells.len() {
            return Err(CoreError::Config(format!(
                "row {label}: golden has {} cells, computed {}",
                gcells.len(),
                cells.len()
            )));
        }
        for (j, (c, g)) in cells.iter().zip(gcells).enumerate() {
            let col = computed.col_headers[j].clone();
            let is_rho_h = col.contains("rho_h");
            let (delta, status) = match (c, g) {
                (Cell::Empty, Cell::Empty) => (0.0, CheckStatus::Ok),
                (Cell::Factor(a), Cell::Factor(b)) => {
                    let d = (a - b).abs();
                    let primary = if is_rho_h { tol.rho_h } else { tol.factor };
                    let status = if d <= primary + 5e-9 {
                        CheckStatus::Ok
                    } else if tol.factor_flag.map(|f| d <= f + 5e-9).unwrap_or(false) {
                        CheckStatus::Flagged
                    } else {
                        CheckStatus::Failed
                    };
                    (d, status)
                }
                (Cell::FactorWeight(a, w), Cell::FactorWeight(b, v)) => {
                    let d = (a - b).abs();
                    let dw = (w - v).abs();
                    let status = if d <= tol.factor + 5e-9 && dw <= tol.weight + 5e-9 {
                        CheckStatus::Ok
                    } else {
                        CheckStatus::Failed
                    };
                    (d.max(dw), status)
                }
                (Cell::Iterations(a), Cell::Iterations(b)) => {
                    let d = a.abs_diff(*b);
                    let status = if d <= tol.iterations {
                        CheckStatus::Ok
                    } else if tol.iterations_flag.map(|f| d <= f).unwrap_or(false) {
                        CheckStatus::Flagged
                    } else {
                        CheckStatus::Failed
                    };
                    (d as f64, status)
                }
                _ => (f64::NAN, CheckStatus::Failed),
            };
            checks.push(CellCheck {
                row: label.clone(),
                col,
                computed: *c,
                golden: *g,
                delta,
                status,
            });
        }
    }
    let ok = checks.iter().filter(|c| c.status == CheckStatus::Ok).count();
    let flagged = checks.iter().filter(|c| c.status == CheckStatus::Flagged).count();
    let failed = checks.iter().filter(|c| c.status == CheckStatus::Failed).count();
    Ok(Comparison { checks, ok, flagged, failed })
}

/// Golden file path of a table.
pub fn golden_path(dir: &Path, id: TableId) -> PathBuf {
    dir.join(format!("{id}.csv"))
}

/// Load a golden table.
pub fn load_golden(dir: &Path, id: TableId) -> Result<Vec<(String, Vec<Cell>)>, CoreError> {
    let path = golden_path(dir, id);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CoreError::Config(format!(
            "missing golden {} ({e}); run with --write-goldens to create it",
            path.display()
        ))
    })?;
    let (_, rows) = TableData::parse_csv(&text)?;
    Ok(rows)
}
