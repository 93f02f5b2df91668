//! Randomized structural properties.

use lfa_schwarz_core::discretization::{assemble_poisson_stencils, GridSpec};
use lfa_schwarz_core::lfa::{operator_symbol, Frequency, Window};
use lfa_schwarz_core::linalg::conj_transpose;
use lfa_schwarz_core::schwarz::{
    containing_instances, dof_weight, make_1d_interval_blocks, owner_instance, SchwarzVariant,
    WeightRule,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every (p, k, ov) interval pattern covers the lattice, its natural
    /// weights form an exact partition of unity, and restricted ownership
    /// picks exactly one block per dof.
    #[test]
    fn interval_patterns_cover_and_partition(
        p in 1usize..4,
        k in 2usize..8,
        ov_off in 1usize..7,
    ) {
        let ov = ov_off.min(k - 1);
        let pattern = make_1d_interval_blocks(p, k, ov).unwrap();
        let ras = WeightRule::natural(SchwarzVariant::Restricted);
        for c in 0..pattern.classes.len() {
            for m in 0..pattern.cell_period[0] {
                let inst = containing_instances(&pattern, c, [m, 0]);
                prop_assert!(!inst.is_empty(), "uncovered dof");
                // exact partition of unity via integer arithmetic
                let mut counts = Vec::new();
                let mut owners = 0;
                for &(r, shift) in &inst {
                    let anchor = &pattern.anchors[r];
                    for (t, &(ce, celle)) in anchor.footprint.iter().enumerate() {
                        let shifted = celle[0] + shift[0] * pattern.cell_period[0];
                        if ce == c && shifted == m {
                            counts.push(anchor.counts[t] as i64);
                            if dof_weight(&ras, anchor, t) == 1.0 {
                                owners += 1;
                            }
                        }
                    }
                }
                let l = counts.iter().fold(1i64, |a, &b| lfa_schwarz_core::schwarz::lcm(a, b));
                let total: i64 = counts.iter().map(|&cnt| l / cnt).sum();
                prop_assert_eq!(total, l, "partition of unity violated");
                prop_assert_eq!(owners, 1, "restricted ownership not unique");
                let _ = owner_instance(&pattern, c, [m, 0]);
            }
        }
    }

    /// Operator symbols of symmetric stencils are Hermitian at every
    /// frequency, and opposite frequencies give conjugate symbols.
    #[test]
    fn symbols_hermitian_and_centrally_symmetric(
        p in 1usize..4,
        theta in -3.0f64..3.0,
    ) {
        let st = assemble_poisson_stencils(&GridSpec::new(1, 1.0, p).unwrap()).unwrap();
        let n = 2 * p as i64;
        let w = Window::new(st.classes.clone(), [n, 1], st.lattice_h).unwrap();
        let a = operator_symbol(&st, &w, Frequency([theta, 0.0]));
        let ah = conj_transpose(&a);
        let herm_err: f64 = (&a - &ah).iter().map(|z| z.norm()).sum();
        prop_assert!(herm_err < 1e-10 * (1.0 + st.max_abs()), "not Hermitian: {}", herm_err);

        let b = operator_symbol(&st, &w, Frequency([-theta, 0.0]));
        let conj_err: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y.conj()).norm())
            .sum();
        prop_assert!(conj_err < 1e-12 * (1.0 + st.max_abs()), "not conjugate: {}", conj_err);
    }
}
