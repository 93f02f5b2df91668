//! Oracle equivalence: the window analysis against explicitly assembled
//! periodic-grid two-grid matrices. The periodic grid of L x window cells
//! represents exactly the frequencies 2 pi t / (L n h); the spectral radius
//! of its two-grid matrix (omitting the per-field constant directions) must
//! match the worst symbol spectral radius over those frequencies.

use lfa_schwarz_core::discretization::{
    assemble_biot_stencils, assemble_poisson_stencils, BiotParams, GridSpec,
};
use lfa_schwarz_core::lfa::{AnalysisSetup, Frequency, SweepSymmetry};
use lfa_schwarz_core::schwarz::{
    make_1d_blocks, make_biot_pressure_blocks, make_element_blocks, BlockPattern, SchwarzVariant,
    WeightRule,
};
use lfa_schwarz_core::solver::periodic::{two_grid_factor, PeriodicGrid};
use std::time::Instant;

fn check_oracle(
    setup: &AnalysisSetup,
    pattern: &BlockPattern,
    l: i64,
    nu1: u32,
    nu2: u32,
    tol: f64,
) -> (f64, f64) {
    let analyzer = setup.analyzer().unwrap();
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
    let mut lfa_max: f64 = 0.0;
    for t in combos {
        let theta = [
            2.0 * std::f64::consts::PI * t[0] as f64 / (l as f64 * analyzer.window.period_len(0)),
            if dim == 2 {
                2.0 * std::f64::consts::PI * t[1] as f64
                    / (l as f64 * analyzer.window.period_len(1))
            } else {
                0.0
            },
        ];
        let rho = analyzer.rho_two_grid_represented(Frequency(theta), &[(nu1, nu2)]).unwrap()[0];
        lfa_max = lfa_max.max(rho);
    }
    let cells = [
        l * analyzer.window.cells[0],
        if dim == 2 { l * analyzer.window.cells[1] } else { 1 },
    ];
    let grid = PeriodicGrid::new(analyzer.stencils.classes.clone(), cells);
    let per = two_grid_factor(&grid, &analyzer.stencils, pattern, &setup.rule, nu1, nu2).unwrap();
    assert!(
        (lfa_max - per).abs() < tol,
        "oracle mismatch: lfa {lfa_max:.10} vs periodic {per:.10}"
    );
    (lfa_max, per)
}

#[test]
fn poisson_1d_oracle() {
    let st = assemble_poisson_stencils(&GridSpec::new(1, 1.0, 1).unwrap()).unwrap();
    for k in [2usize, 3] {
        for variant in [SchwarzVariant::Additive, SchwarzVariant::Restricted] {
            let pattern = make_1d_blocks(k, 1).unwrap();
            let window_n = lfa_schwarz_core::lfa::default_window(&pattern).unwrap();
            let setup = AnalysisSetup {
                stencils: st.clone(),
                pattern: pattern.clone(),
                rule: WeightRule::natural(variant),
                window_n,
                equilibrate: false,
                symmetry: SweepSymmetry::Central,
                label: serde_json::json!({}),
            };
            for l in [2i64, 3] {
                let (lfa, per) = check_oracle(&setup, &pattern, l, 1, 0, 1e-8);
                println!("poisson1d k={k} {variant:?} L={l}: lfa={lfa:.8} periodic={per:.8}");
            }
        }
    }
}

#[test]
fn poisson_2d_oracle() {
    for p in [1usize, 2] {
        let st = assemble_poisson_stencils(&GridSpec::new(2, 1.0, p).unwrap()).unwrap();
        for variant in [SchwarzVariant::Additive, SchwarzVariant::Restricted] {
            let pattern = make_element_blocks(p, 2).unwrap();
            let window_n = lfa_schwarz_core::lfa::default_window(&pattern).unwrap();
            let setup = AnalysisSetup {
                stencils: st.clone(),
                pattern: pattern.clone(),
                rule: WeightRule::natural(variant),
                window_n,
                equilibrate: false,
                symmetry: SweepSymmetry::Central,
                label: serde_json::json!({}),
            };
            let (lfa, per) = check_oracle(&setup, &pattern, 2, 1, 0, 1e-8);
            println!("poisson2d p={p} {variant:?}: lfa={lfa:.8} periodic={per:.8}");
        }
    }
}

#[test]
fn biot_oracle() {
    let start = Instant::now();
    let params = BiotParams::default();
    let st = assemble_biot_stencils(&params, 1.0 / 64.0).unwrap();
    let pattern = make_biot_pressure_blocks().unwrap();
    let setup = AnalysisSetup {
        stencils: st,
        pattern: pattern.clone(),
        rule: WeightRule::natural(SchwarzVariant::Additive),
        window_n: [16, 16],
        equilibrate: false,
        symmetry: SweepSymmetry::Dihedral,
        label: serde_json::json!({}),
    };
    let (lfa, per) = check_oracle(&setup, &pattern, 2, 1, 0, 1e-8);
    println!(
        "biot 8x8-element window L=2: lfa={lfa:.8} periodic={per:.8} ({:.1?})",
        start.elapsed()
    );
}
