//! Structural invariants of the analysis machinery.

use lfa_schwarz_core::discretization::{
    assemble_biot_stencils, assemble_poisson_stencils, BiotParams, GridSpec,
};
use lfa_schwarz_core::lfa::{
    coarse_class_set, operator_symbol, prolongation_symbol, sweep_rhos, AnalysisSetup, Frequency,
    SweepSymmetry, TwoGridAnalyzer, Window,
};
use lfa_schwarz_core::linalg::{conj_transpose, eigenvalues, to_complex};
use lfa_schwarz_core::schwarz::{
    make_1d_blocks, make_biot_pressure_blocks, make_element_blocks, SchwarzVariant, WeightRule,
};
use lfa_schwarz_core::solver::periodic::{smoother_matrix, PeriodicGrid};

fn poisson_setup(
    d: usize,
    p: usize,
    variant: SchwarzVariant,
    k: Option<(usize, usize)>,
) -> AnalysisSetup {
    let st = assemble_poisson_stencils(&GridSpec::new(d, 1.0, p).unwrap()).unwrap();
    let pattern = match k {
        Some((k, ov)) => make_1d_blocks(k, ov).unwrap(),
        None => make_element_blocks(p, d).unwrap(),
    };
    let window_n = lfa_schwarz_core::lfa::default_window(&pattern).unwrap();
    AnalysisSetup {
        stencils: st,
        pattern,
        rule: WeightRule::natural(variant),
        window_n,
        equilibrate: false,
        symmetry: SweepSymmetry::Central,
        label: serde_json::json!({}),
    }
}

#[test]
fn galerkin_coarse_symbol_equals_rediscretized() {
    for (d, p) in [(1usize, 1usize), (1, 3), (2, 2)] {
        let fine_spec = GridSpec::new(d, 1.0, p).unwrap();
        let st = assemble_poisson_stencils(&fine_spec).unwrap();
        let n = 4 * p as i64;
        let wn = if d == 1 { [n, 1] } else { [n, n] };
        let w = Window::new(st.classes.clone(), wn, st.lattice_h).unwrap();
        let coarse_spec = GridSpec::new(d, 2.0, p).unwrap();
        let cst = assemble_poisson_stencils(&coarse_spec).unwrap();
        let wc_n = if d == 1 { [n / 2, 1] } else { [n / 2, n / 2] };
        let wc = Window::new(cst.classes.clone(), wc_n, cst.lattice_h).unwrap();
        for theta in [[0.31, 0.0], [0.31, -0.62]] {
            let theta = if d == 1 { [theta[0], 0.0] } else { theta };
            let f = Frequency(theta);
            let a = operator_symbol(&st, &w, f);
            let p_sym = prolongation_symbol(&w, f);
            let galerkin = conj_transpose(&p_sym).dot(&a).dot(&p_sym);
            let redisc = operator_symbol(&cst, &wc, f);
            let scale = redisc.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let err = (&galerkin - &redisc).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale, "d={d} p={p}: Galerkin mismatch {err:.3e}");
        }
    }
}

#[test]
fn galerkin_coarse_symbol_matches_rediscretized_biot() {
    let params = BiotParams { permeability: 1e-3, ..BiotParams::default() };
    let st = assemble_biot_stencils(&params, 1.0 / 64.0).unwrap();
    let w = Window::new(st.classes.clone(), [8, 8], st.lattice_h).unwrap();
    let cst = assemble_biot_stencils(&params, 2.0 / 64.0).unwrap();
    let wc = Window::new(cst.classes.clone(), [4, 4], cst.lattice_h).unwrap();
    let f = Frequency([1.3, -2.2]);
    let a = operator_symbol(&st, &w, f);
    let p_sym = prolongation_symbol(&w, f);
    let galerkin = conj_transpose(&p_sym).dot(&a).dot(&p_sym);
    let redisc = operator_symbol(&cst, &wc, f);
    let scale = redisc.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = (&galerkin - &redisc).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(err <= 1e-10 * scale, "Biot Galerkin mismatch {err:.3e}");
}

#[test]
fn window_enlargement_is_invariant() {
    // doubling the window while halving the sampling keeps the represented
    // harmonics, so the worst factor must agree to 1e-8
    let base = poisson_setup(1, 1, SchwarzVariant::Additive, Some((2, 1)));
    let rho6 = sweep_rhos(&base, 32, &[(1, 0)]).unwrap()[0].rho_2g;
    let mut big = base.clone();
    big.window_n = [12, 1];
    let rho12 = sweep_rhos(&big, 16, &[(1, 0)]).unwrap()[0].rho_2g;
    assert!(
        (rho6 - rho12).abs() < 1e-8,
        "window enlargement changed the factor: {rho6} vs {rho12}"
    );
}

#[test]
fn window_enlargement_is_invariant_for_biot() {
    let params = BiotParams::default();
    let st = assemble_biot_stencils(&params, 1.0 / 64.0).unwrap();
    let pattern = make_biot_pressure_blocks().unwrap();
    let mk = |wn: i64| AnalysisSetup {
        stencils: st.clone(),
        pattern: pattern.clone(),
        rule: WeightRule::natural(SchwarzVariant::Additive),
        window_n: [wn, wn],
        equilibrate: true,
        symmetry: SweepSymmetry::Dihedral,
        label: serde_json::json!({}),
    };
    // 4-element window at 8 samples covers the same harmonics as the
    // 8-element window at 4 samples
    let small = sweep_rhos(&mk(8), 8, &[(1, 0)]).unwrap()[0].rho_2g;
    let large = sweep_rhos(&mk(16), 4, &[(1, 0)]).unwrap()[0].rho_2g;
    assert!((small - large).abs() < 1e-8, "{small} vs {large}");
}

#[test]
fn sampling_doubling_is_stable() {
    let configs = vec![
        poisson_setup(1, 1, SchwarzVariant::Additive, Some((2, 1))),
        poisson_setup(1, 1, SchwarzVariant::Restricted, Some((4, 2))),
        poisson_setup(1, 3, SchwarzVariant::Additive, None),
        poisson_setup(2, 2, SchwarzVariant::Restricted, None),
    ];
    for (i, setup) in configs.iter().enumerate() {
        let lo = sweep_rhos(setup, 16, &[(1, 0)]).unwrap()[0].rho_2g;
        let hi = sweep_rhos(setup, 32, &[(1, 0)]).unwrap()[0].rho_2g;
        assert!((lo - hi).abs() < 0.005, "config {i}: {lo} vs {hi}");
    }
    // Biot at its default sampling
    let st = assemble_biot_stencils(&BiotParams::default(), 1.0 / 64.0).unwrap();
    let setup = AnalysisSetup {
        stencils: st,
        pattern: make_biot_pressure_blocks().unwrap(),
        rule: WeightRule::natural(SchwarzVariant::Additive),
        window_n: [8, 8],
        equilibrate: true,
        symmetry: SweepSymmetry::Dihedral,
        label: serde_json::json!({}),
    };
    let lo = sweep_rhos(&setup, 8, &[(1, 0)]).unwrap()[0].rho_2g;
    let hi = sweep_rhos(&setup, 16, &[(1, 0)]).unwrap()[0].rho_2g;
    assert!((lo - hi).abs() < 0.005, "biot: {lo} vs {hi}");
}

#[test]
fn equilibration_is_spectrum_neutral() {
    // at K = 1 both paths are well conditioned; smaller permeabilities push
    // the raw coarse-symbol singular values below the skip cutoff, which is
    // the reason the sweeps equilibrate by default
    let params = BiotParams { permeability: 1.0, ..BiotParams::default() };
    let st = assemble_biot_stencils(&params, 1.0 / 64.0).unwrap();
    let pattern = make_biot_pressure_blocks().unwrap();
    let mk = |eq: bool| AnalysisSetup {
        stencils: st.clone(),
        pattern: pattern.clone(),
        rule: WeightRule::natural(SchwarzVariant::Additive),
        window_n: [8, 8],
        equilibrate: eq,
        symmetry: SweepSymmetry::Dihedral,
        label: serde_json::json!({}),
    };
    let raw = sweep_rhos(&mk(false), 8, &[(1, 0)]).unwrap()[0].rho_2g;
    let scaled = sweep_rhos(&mk(true), 8, &[(1, 0)]).unwrap()[0].rho_2g;
    assert!((raw - scaled).abs() < 1e-9, "{raw} vs {scaled}");
}

#[test]
fn smoother_rho_is_invariant_under_origin_shift() {
    // shifting every block anchor by one pattern period is a relabeling of
    // the window origin; per-frequency smoother spectra must not move
    let st = assemble_poisson_stencils(&GridSpec::new(1, 1.0, 1).unwrap()).unwrap();
    let pattern = make_1d_blocks(3, 1).unwrap();
    let mut shifted = pattern.clone();
    for anchor in &mut shifted.anchors {
        for entry in &mut anchor.footprint {
            entry.1[0] += 1;
        }
        anchor.base[0] += 1;
    }
    let rule = WeightRule::natural(SchwarzVariant::Additive);
    let w = Window::new(st.classes.clone(), [4, 1], st.lattice_h).unwrap();
    for theta in [0.4, -1.1, 2.9] {
        let f = Frequency([theta, 0.0]);
        let s1 =
            lfa_schwarz_core::lfa::smoother_symbol(&st, &pattern, &rule, &w, f).unwrap();
        let s2 =
            lfa_schwarz_core::lfa::smoother_symbol(&st, &shifted, &rule, &w, f).unwrap();
        let mut m1: Vec<f64> = eigenvalues(&s1).unwrap().iter().map(|z| z.norm()).collect();
        let mut m2: Vec<f64> = eigenvalues(&s2).unwrap().iter().map(|z| z.norm()).collect();
        m1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        m2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in m1.iter().zip(&m2) {
            assert!((a - b).abs() < 1e-12, "theta={theta}: {a} vs {b}");
        }
    }
}

#[test]
fn periodic_smoother_spectrum_equals_symbol_union() {
    // explicit periodic one-sweep matrix vs union of the smoother-symbol
    // spectra over the represented frequencies (shared oracle, L = 2)
    let st = assemble_poisson_stencils(&GridSpec::new(1, 1.0, 1).unwrap()).unwrap();
    let pattern = make_1d_blocks(3, 1).unwrap();
    let rule = WeightRule::natural(SchwarzVariant::Additive);
    let l = 2i64;
    let n_window = 4i64;
    let grid = PeriodicGrid::new(st.classes.clone(), [l * n_window, 1]);
    let s_mat = smoother_matrix(&grid, &st, &pattern, &rule).unwrap();
    let mut mat_moduli: Vec<f64> = eigenvalues(&to_complex(&s_mat))
        .unwrap()
        .iter()
        .map(|z| z.norm())
        .collect();
    mat_moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let w = Window::new(st.classes.clone(), [n_window, 1], st.lattice_h).unwrap();
    let mut sym_moduli = Vec::new();
    for t in 0..l {
        let theta = 2.0 * std::f64::consts::PI * (t - (l - 1) / 2) as f64
            / (l as f64 * w.period_len(0));
        let f = Frequency([theta, 0.0]);
        let s = lfa_schwarz_core::lfa::smoother_symbol(&st, &pattern, &rule, &w, f).unwrap();
        sym_moduli.extend(eigenvalues(&s).unwrap().iter().map(|z| z.norm()));
    }
    sym_moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(mat_moduli.len(), sym_moduli.len());
    for (a, b) in mat_moduli.iter().zip(&sym_moduli) {
        assert!((a - b).abs() < 1e-8, "spectra differ: {a} vs {b}");
    }
}

#[test]
fn symmetry_reduction_matches_full_sweep() {
    let st = assemble_poisson_stencils(&GridSpec::new(2, 1.0, 2).unwrap()).unwrap();
    let pattern = make_element_blocks(2, 2).unwrap();
    let mk = |sym: SweepSymmetry, variant| AnalysisSetup {
        stencils: st.clone(),
        pattern: pattern.clone(),
        rule: WeightRule::natural(variant),
        window_n: [4, 4],
        equilibrate: true,
        symmetry: sym,
        label: serde_json::json!({}),
    };
    for (variant, sym) in [
        (SchwarzVariant::Additive, SweepSymmetry::Dihedral),
        (SchwarzVariant::Restricted, SweepSymmetry::CentralSwap),
    ] {
        let full = sweep_rhos(&mk(SweepSymmetry::None, variant), 8, &[(1, 0)]).unwrap()[0].clone();
        let fast = sweep_rhos(&mk(sym, variant), 8, &[(1, 0)]).unwrap()[0].clone();
        assert!((full.rho_2g - fast.rho_2g).abs() < 1e-10);
        for ((_, a), (_, b)) in full.per_freq.iter().zip(&fast.per_freq) {
            assert!((a - b).abs() < 1e-10, "per-frequency mismatch under symmetry");
        }
    }
}

#[test]
fn cgc_alone_does_not_converge() {
    // nu = 0: the coarse-grid correction projector has rho >= 1, reported
    // unclipped
    let setup = poisson_setup(1, 1, SchwarzVariant::Additive, Some((2, 1)));
    let analyzer = setup.analyzer().unwrap();
    let f = Frequency([0.4, 0.0]);
    let rhos = match analyzer.rho_two_grid(f, &[(0, 0)]).unwrap() {
        lfa_schwarz_core::lfa::FreqOutcome::Rho(r) => r,
        other => panic!("unexpected {other:?}"),
    };
    assert!(rhos[0] >= 1.0 - 1e-12, "CGC projector rho {}", rhos[0]);
}

#[test]
fn biot_window_class_count() {
    let cs = coarse_class_set(&lfa_schwarz_core::discretization::biot_class_set());
    assert_eq!(cs.len(), 9);
    assert_eq!(cs.period, [4, 4]);
}
