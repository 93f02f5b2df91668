//! Config schema and drivers behind the `lfa-schwarz` binary, kept in a
//! library so integration tests can call them directly.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lfa_schwarz_core::discretization::{
    assemble_biot_stencils, assemble_poisson_stencils, BiotParams, GridSpec,
};
use lfa_schwarz_core::lfa::{
    default_window, sweep_rhos, AnalysisSetup, FactorReport, SweepSymmetry,
};
use lfa_schwarz_core::optimize::{optimize_weights, WeightSearchSpec};
use lfa_schwarz_core::report::{biot_assumptions, compare, load_golden, run_table, TableJob};
use lfa_schwarz_core::schwarz::{
    make_1d_blocks, make_biot_pressure_blocks, make_element_blocks, BlockPattern, DofRole,
    SchwarzVariant, WeightRule, WeightScheme,
};
use lfa_schwarz_core::solver::{
    build_hierarchy, count_iterations, measure_rho_h, periodic, CycleKind, CycleSpec, ProblemDef,
};

/// Schema of `lfa-schwarz run --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// "lfa" (default), "solve", "iterations" or "oracle"
    pub mode: Option<String>,
    /// "poisson1d", "poisson2d" or "biot"
    pub problem: String,
    pub p: Option<usize>,
    /// 1D interval blocks; element blocks when absent
    pub k: Option<usize>,
    pub ov: Option<usize>,
    /// "as" (default) or "ras"
    pub smoother: Option<String>,
    /// "natural" (default), a number, or a role map
    pub weights: Option<serde_json::Value>,
    pub nu: Option<u32>,
    pub nu1: Option<u32>,
    pub nu2: Option<u32>,
    /// "V" or "W"
    pub cycle: Option<String>,
    /// elements per dimension of the finest solver grid
    pub grid: Option<i64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    /// window enlargement factor for the oracle mode
    #[serde(rename = "L")]
    pub l: Option<i64>,
    // Biot parameters
    #[serde(rename = "K")]
    pub permeability: Option<f64>,
    pub h: Option<f64>,
    pub tau: Option<f64>,
    pub biot_modulus_inverse: Option<f64>,
    pub mu_f: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        match self.problem.as_str() {
            "poisson1d" | "poisson2d" | "biot" => {}
            other => bail!("field 'problem': expected poisson1d|poisson2d|biot, got {other:?}"),
        }
        if let Some(mode) = &self.mode {
            match mode.as_str() {
                "lfa" | "solve" | "iterations" | "oracle" => {}
                other => bail!("field 'mode': expected lfa|solve|iterations|oracle, got {other:?}"),
            }
        }
        if let Some(s) = &self.smoother {
            match s.as_str() {
                "as" | "ras" => {}
                other => bail!("field 'smoother': expected as|ras, got {other:?}"),
            }
        }
        if let Some(c) = &self.cycle {
            match c.as_str() {
                "V" | "W" | "v" | "w" => {}
                other => bail!("field 'cycle': expected V|W, got {other:?}"),
            }
        }
        if self.problem.starts_with("poisson") && self.p.is_none() {
            bail!("field 'p': required for Poisson problems");
        }
        if let (Some(k), Some(ov)) = (self.k, self.ov) {
            if ov >= k {
                bail!("fields 'k'/'ov': overlap must satisfy ov < k (got k={k}, ov={ov})");
            }
        }
        if self.k.is_some() != self.ov.is_some() {
            bail!("fields 'k'/'ov': both or neither must be given");
        }
        Ok(())
    }

    fn variant(&self) -> SchwarzVariant {
        match self.smoother.as_deref() {
            Some("ras") => SchwarzVariant::Restricted,
            _ => SchwarzVariant::Additive,
        }
    }

    fn rule(&self) -> Result<WeightRule> {
        let variant = self.variant();
        let scheme = match &self.weights {
            None => WeightScheme::Natural,
            Some(serde_json::Value::String(s)) if s == "natural" => WeightScheme::Natural,
            Some(serde_json::Value::Number(n)) => {
                WeightScheme::Uniform(n.as_f64().context("field 'weights': not a number")?)
            }
            Some(serde_json::Value::Object(map)) => {
                let mut roles = BTreeMap::new();
                for (key, value) in map {
                    let role = match key.as_str() {
                        "pressure" => DofRole::Pressure,
                        "disp_vertex" => DofRole::DispVertex,
                        "disp_edge" => DofRole::DispEdge,
                        "disp_cell" => DofRole::DispCell,
                        "scalar" => DofRole::Scalar,
                        other => bail!(
                            "field 'weights': unknown role {other:?} (expected pressure|disp_vertex|disp_edge|disp_cell|scalar)"
                        ),
                    };
                    roles.insert(
                        role,
                        value.as_f64().context("field 'weights': role weight not a number")?,
                    );
                }
                WeightScheme::PerRole(roles)
            }
            Some(other) => bail!("field 'weights': expected \"natural\", number or map, got {other}"),
        };
        Ok(WeightRule { variant, scheme })
    }

    fn biot_params(&self) -> BiotParams {
        let (mut params, _) = biot_assumptions(self.permeability.unwrap_or(1.0));
        if let Some(tau) = self.tau {
            params.time_step = tau;
        }
        if let Some(m) = self.biot_modulus_inverse {
            params.biot_modulus_inverse = m;
        }
        if let Some(mu) = self.mu_f {
            params.fluid_viscosity = mu;
        }
        params
    }

    fn pattern(&self) -> Result<(BlockPattern, serde_json::Value)> {
        let pattern = match self.problem.as_str() {
            "biot" => make_biot_pressure_blocks()?,
            _ => {
                let p = self.p.unwrap();
                let d = if self.problem == "poisson1d" { 1 } else { 2 };
                match (self.k, self.ov) {
                    (Some(k), Some(ov)) => {
                        if d != 1 {
                            bail!("interval blocks are one-dimensional; drop 'k'/'ov' for poisson2d");
                        }
                        make_1d_blocks(k, ov)?
                    }
                    _ => make_element_blocks(p, d)?,
                }
            }
        };
        let descr = pattern.descriptor(&self.rule()?);
        Ok((pattern, descr))
    }

    fn setup(&self) -> Result<AnalysisSetup> {
        let (pattern, descr) = self.pattern()?;
        let rule = self.rule()?;
        let (stencils, window_n) = match self.problem.as_str() {
            "biot" => {
                let h = self.h.unwrap_or(1.0 / 64.0);
                (assemble_biot_stencils(&self.biot_params(), h)?, [16, 16])
            }
            _ => {
                let d = if self.problem == "poisson1d" { 1 } else { 2 };
                let spec = GridSpec::new(d, self.h.unwrap_or(1.0), self.p.unwrap())?;
                let st = assemble_poisson_stencils(&spec)?;
                let wn = default_window(&pattern)?;
                (st, wn)
            }
        };
        let symmetry = match (self.problem.as_str(), self.variant()) {
            ("poisson1d", _) => SweepSymmetry::Central,
            (_, SchwarzVariant::Additive) => SweepSymmetry::Dihedral,
            (_, SchwarzVariant::Restricted) => SweepSymmetry::CentralSwap,
        };
        let label = serde_json::json!({
            "problem": self.problem,
            "p": self.p,
            "K": self.permeability,
            "blocks": descr,
        });
        Ok(AnalysisSetup {
            stencils,
            pattern,
            rule,
            window_n,
            equilibrate: true,
            symmetry,
            label,
        })
    }

    fn default_samples(&self) -> usize {
        match self.problem.as_str() {
            "poisson1d" => 32,
            "poisson2d" => 16,
            _ => 8,
        }
    }

    fn problem_def(&self) -> Result<ProblemDef> {
        let elements = self.grid.unwrap_or(match self.problem.as_str() {
            "poisson1d" => 512,
            "poisson2d" => 128,
            _ => 64,
        });
        Ok(match self.problem.as_str() {
            "biot" => ProblemDef::Biot {
                params: self.biot_params(),
                mesh_size: 1.0 / elements as f64,
            },
            "poisson1d" => {
                ProblemDef::Poisson(GridSpec::new(1, 1.0 / elements as f64, self.p.unwrap())?)
            }
            _ => ProblemDef::Poisson(GridSpec::new(2, 1.0 / elements as f64, self.p.unwrap())?),
        })
    }

    fn cycle_spec(&self) -> CycleSpec {
        let kind = match self.cycle.as_deref() {
            Some("W") | Some("w") => CycleKind::W,
            _ => CycleKind::V,
        };
        let (nu1, nu2) = self.splits();
        CycleSpec { kind, nu1, nu2 }
    }

    fn splits(&self) -> (u32, u32) {
        match (self.nu, self.nu1, self.nu2) {
            (Some(nu), None, None) => (nu, 0),
            (None, a, b) => (a.unwrap_or(1), b.unwrap_or(0)),
            (Some(_), _, _) => (self.nu1.unwrap_or(1), self.nu2.unwrap_or(0)),
        }
    }

    fn mode(&self) -> &str {
        if let Some(m) = &self.mode {
            return m;
        }
        if self.tol.is_some() {
            return "iterations";
        }
        if self.cycle.is_some() {
            return "solve";
        }
        "lfa"
    }
}

/// Result of `run --config`: a factor report, a measured factor with its
/// residual history, an iteration count, or an oracle self-check.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum RunOutput {
    Lfa {
        rho_2g: f64,
        report: FactorReport,
    },
    Solve {
        rho_h: f64,
        residual_ratios: Vec<f64>,
    },
    Iterations {
        iterations: usize,
        residual_history: Vec<f64>,
    },
    Oracle {
        lfa: f64,
        periodic: f64,
        difference: f64,
    },
}

pub fn run_single(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.mode() {
        "lfa" => {
            let setup = cfg.setup()?;
            let samples = cfg.samples.unwrap_or_else(|| cfg.default_samples());
            let (nu1, nu2) = cfg.splits();
            let report = sweep_rhos(&setup, samples, &[(nu1, nu2)])?.remove(0);
            Ok(RunOutput::Lfa { rho_2g: report.rho_2g, report })
        }
        "solve" => {
            let problem = cfg.problem_def()?;
            let (pattern, _) = cfg.pattern()?;
            let rule = cfg.rule()?;
            let elements = match &problem {
                ProblemDef::Poisson(spec) => (1.0 / spec.mesh_size).round() as i64,
                ProblemDef::Biot { mesh_size, .. } => (1.0 / mesh_size).round() as i64,
            };
            let hier = build_hierarchy(&problem, &pattern, &rule, elements, None)?;
            let (rho_h, ratios) =
                measure_rho_h(&hier, &cfg.cycle_spec(), 30, cfg.seed.unwrap_or(2024))?;
            Ok(RunOutput::Solve { rho_h, residual_ratios: ratios })
        }
        "iterations" => {
            let problem = cfg.problem_def()?;
            let (pattern, _) = cfg.pattern()?;
            let rule = cfg.rule()?;
            let elements = match &problem {
                ProblemDef::Poisson(spec) => (1.0 / spec.mesh_size).round() as i64,
                ProblemDef::Biot { mesh_size, .. } => (1.0 / mesh_size).round() as i64,
            };
            let hier = build_hierarchy(&problem, &pattern, &rule, elements, None)?;
            let (its, history) = count_iterations(
                &hier,
                &cfg.cycle_spec(),
                cfg.tol.unwrap_or(1e-10),
                cfg.seed.unwrap_or(2024),
            )?;
            Ok(RunOutput::Iterations { iterations: its, residual_history: history })
        }
        "oracle" => {
            let (lfa, per) = oracle_check(cfg)?;
            Ok(RunOutput::Oracle { lfa, periodic: per, difference: (lfa - per).abs() })
        }
        other => bail!("unknown mode {other:?}"),
    }
}

/// Oracle self-check: the spectral radius of the explicitly assembled
/// periodic two-grid matrix against the worst spectral radius of the
/// two-grid symbols over the represented frequencies.
pub fn oracle_check(cfg: &RunConfig) -> Result<(f64, f64)> {
    let setup = cfg.setup()?;
    let l = cfg.l.unwrap_or(2);
    let (nu1, nu2) = cfg.splits();
    let analyzer = AnalysisSetup { equilibrate: false, ..setup.clone() }.analyzer()?;
    // represented frequencies theta = 2 pi t / (L n h), t = -floor((L-1)/2)..ceil((L-1)/2)
    let mut lfa_max: f64 = 0.0;
    let dim = analyzer.window.dim();
    let trange: Vec<i64> = (0..l).map(|t| t - (l - 1) / 2).collect();
    let combos: Vec<[i64; 2]> = if dim == 1 {
        trange.iter().map(|&t| [t, 0]).collect()
    } else {
        trange
            .iter()
            .flat_map(|&a| trange.iter().map(move |&b| [a, b]))
            .collect()
    };
    for t in combos {
        let theta = [
            2.0 * std::f64::consts::PI * t[0] as f64
                / (l as f64 * analyzer.window.period_len(0)),
            if dim == 2 {
                2.0 * std::f64::consts::PI * t[1] as f64
                    / (l as f64 * analyzer.window.period_len(1))
            } else {
                0.0
            },
        ];
        let rhos = analyzer
            .rho_two_grid_represented(lfa_schwarz_core::lfa::Frequency(theta), &[(nu1, nu2)])?;
        lfa_max = lfa_max.max(rhos[0]);
    }
    // explicit periodic grid of L * window cells
    let cells = [
        l * analyzer.window.cells[0],
        if dim == 2 { l * analyzer.window.cells[1] } else { 1 },
    ];
    let grid = periodic::PeriodicGrid::new(analyzer.stencils.classes.clone(), cells);
    let per = periodic::two_grid_factor(
        &grid,
        &analyzer.stencils,
        &setup.pattern,
        &setup.rule,
        nu1,
        nu2,
    )?;
    Ok((lfa_max, per))
}

/// Schema of `lfa-schwarz optimize --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    /// "poisson1d" or "biot"
    pub problem: String,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub ov: Option<usize>,
    /// "ras" (default for poisson1d) or "as" (default for biot)
    pub smoother: Option<String>,
    pub bounds: Option<Vec<(f64, f64)>>,
    /// permeability scenarios of the robust Biot search
    #[serde(rename = "K")]
    pub permeabilities: Option<Vec<f64>>,
    pub nu: Option<u32>,
    pub samples_search: Option<usize>,
    pub samples_certificate: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct OptimizeOutput {
    pub weights: Vec<f64>,
    pub rho: f64,
    pub rho_natural: f64,
    pub evaluations: usize,
    pub improved: bool,
    /// per-frequency profile of the certified optimum
    pub profile: FactorReport,
}

pub fn run_optimize(cfg: &OptimizeConfig) -> Result<OptimizeOutput> {
    let nu = cfg.nu.unwrap_or(1);
    let (spec, best_setup_builder): (WeightSearchSpec, Box<dyn Fn(&WeightRule) -> AnalysisSetup>) =
        match cfg.problem.as_str() {
            "poisson1d" => {
                let k = cfg.k.context("field 'k': required for poisson1d")?;
                let ov = cfg.ov.context("field 'ov': required for poisson1d")?;
                let p = cfg.p.unwrap_or(1);
                let st = assemble_poisson_stencils(&GridSpec::new(1, 1.0, p)?)?;
                let pattern = make_1d_blocks(k, ov)?;
                let window_n = default_window(&pattern)?;
                let variant = match cfg.smoother.as_deref() {
                    Some("as") => SchwarzVariant::Additive,
                    _ => SchwarzVariant::Restricted,
                };
                let setup = AnalysisSetup {
                    stencils: st,
                    pattern,
                    rule: WeightRule::natural(variant),
                    window_n,
                    equilibrate: true,
                    symmetry: SweepSymmetry::Central,
                    label: serde_json::json!({"problem": "poisson1d", "k": k, "ov": ov}),
                };
                let s2 = setup.clone();
                (
                    WeightSearchSpec {
                        parameter_roles: vec![vec![DofRole::Scalar]],
                        bounds: cfg.bounds.clone().unwrap_or(vec![(0.0, 2.0)]),
                        variant,
                        scenarios: vec![setup],
                        search_samples: cfg.samples_search.unwrap_or(16),
                        certificate_samples: cfg.samples_certificate.unwrap_or(32),
                        nu1: nu,
                        nu2: 0,
                    },
                    Box::new(move |rule| AnalysisSetup { rule: rule.clone(), ..s2.clone() }),
                )
            }
            "biot" => {
                let ks = cfg.permeabilities.clone().unwrap_or(vec![1.0, 1e-6, 1e-12]);
                let mut scenarios = Vec::new();
                for &k in &ks {
                    let (params, h) = biot_assumptions(k);
                    let st = assemble_biot_stencils(&params, h)?;
                    scenarios.push(AnalysisSetup {
                        stencils: st,
                        pattern: make_biot_pressure_blocks()?,
                        rule: WeightRule::natural(SchwarzVariant::Additive),
                        // reduced window during search; certificate rebuilds
                        window_n: [8, 8],
                        equilibrate: true,
                        symmetry: SweepSymmetry::Dihedral,
                        label: serde_json::json!({"problem": "biot", "K": k}),
                    });
                }
                let s2 = scenarios.clone();
                (
                    WeightSearchSpec {
                        parameter_roles: vec![
                            vec![DofRole::DispVertex, DofRole::DispEdge],
                            vec![DofRole::DispCell],
                            vec![DofRole::Pressure],
                        ],
                        bounds: cfg.bounds.clone().unwrap_or(vec![(0.0, 2.0); 3]),
                        variant: SchwarzVariant::Additive,
                        scenarios,
                        search_samples: cfg.samples_search.unwrap_or(8),
                        certificate_samples: cfg.samples_certificate.unwrap_or(8),
                        nu1: nu,
                        nu2: 0,
                    },
                    Box::new(move |rule| AnalysisSetup { rule: rule.clone(), ..s2[0].clone() }),
                )
            }
            other => bail!("field 'problem': expected poisson1d|biot, got {other:?}"),
        };
    let result = optimize_weights(&spec)?;
    // per-frequency profile at the optimum (first scenario)
    let rule = match spec.parameter_roles.len() {
        1 => WeightRule { variant: spec.variant, scheme: WeightScheme::Uniform(result.weights[0]) },
        _ => {
            let mut map = BTreeMap::new();
            for (group, &w) in spec.parameter_roles.iter().zip(&result.weights) {
                for &role in group {
                    map.insert(role, w);
                }
            }
            WeightRule { variant: spec.variant, scheme: WeightScheme::PerRole(map) }
        }
    };
    let profile_setup = best_setup_builder(&rule);
    let profile = sweep_rhos(&profile_setup, spec.certificate_samples, &[(spec.nu1, spec.nu2)])?
        .remove(0);
    Ok(OptimizeOutput {
        weights: result.weights,
        rho: result.rho,
        rho_natural: result.rho_natural,
        evaluations: result.evaluations,
        improved: result.improved,
        profile,
    })
}

/// Table command driver: compute, render, compare against goldens.
pub struct TableOutcome {
    pub rendered: String,
    pub comparison: Option<lfa_schwarz_core::report::Comparison>,
    pub passed: bool,
}

pub fn run_table_command(
    job: &TableJob,
    format: &str,
    goldens_dir: &Path,
    write_goldens: bool,
) -> Result<TableOutcome> {
    let data = run_table(job)?;
    let rendered = match format {
        "csv" => data.to_csv(),
        "md" => data.to_markdown(),
        "json" => serde_json::to_string_pretty(&data.to_json())?,
        other => bail!("unknown format {other:?}; expected csv|md|json"),
    };
    if write_goldens {
        std::fs::create_dir_all(goldens_dir)?;
        let path = lfa_schwarz_core::report::golden_path(goldens_dir, job.id);
        std::fs::write(&path, data.to_csv())
            .with_context(|| format!("writing golden {}", path.display()))?;
        return Ok(TableOutcome { rendered, comparison: None, passed: true });
    }
    let golden = load_golden(goldens_dir, job.id)?;
    let cmp = compare(job.id, &data, &golden)?;
    let passed = cmp.passed();
    Ok(TableOutcome { rendered, comparison: Some(cmp), passed })
}

/// Honor the worker-count cap from the environment. Call once at startup.
pub fn init_threads() {
    if let Ok(n) = std::env::var("LFA_SCHWARZ_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}
