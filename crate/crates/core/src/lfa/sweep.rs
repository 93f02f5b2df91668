//! Frequency sweeps over Theta_nh and the asymptotic-factor report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{IVec, StencilSet};
use crate::error::CoreError;
use crate::lfa::symbols::{FreqOutcome, TwoGridAnalyzer};
use crate::lfa::{Frequency, Window};
use crate::schwarz::{BlockPattern, WeightRule};

/// Symmetry group used to reduce the frequency sample set. `Central`
/// (theta -> -theta) holds for every real-stencil configuration because the
/// symbols at opposite frequencies are entrywise conjugate. The larger
/// groups require the block pattern and weights to share the grid symmetry
/// (swap of the two axes, reflection of single axes) and are enabled per
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepSymmetry {
    None,
    Central,
    CentralSwap,
    Dihedral,
}

/// One two-grid analysis configuration: stencils, blocks, weights, window.
#[derive(Clone)]
pub struct AnalysisSetup {
    pub stencils: StencilSet,
    pub pattern: BlockPattern,
    pub rule: WeightRule,
    pub window_n: IVec,
    pub equilibrate: bool,
    pub symmetry: SweepSymmetry,
    /// Configuration snapshot recorded in reports.
    pub label: serde_json::Value,
}

impl AnalysisSetup {
    pub fn analyzer(&self) -> Result<TwoGridAnalyzer, CoreError> {
        TwoGridAnalyzer::new(
            &self.stencils,
            &self.pattern,
            &self.rule,
            self.window_n,
            self.equilibrate,
        )
    }
}

/// Per-frequency spectral radii, the asymptotic factor and the
/// configuration snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorReport {
    pub rho_2g: f64,
    pub per_freq: Vec<([f64; 2], f64)>,
    pub skipped: Vec<[f64; 2]>,
    pub config: serde_json::Value,
}

impl FactorReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization")
    }

    /// CSV rows: `theta_x,theta_y,rho` per retained frequency.
    pub fn per_freq_csv(&self) -> String {
        let mut out = String::from("theta_x,theta_y,rho\n");
        for (theta, rho) in &self.per_freq {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", theta[0], theta[1], rho));
        }
        out
    }
}

/// Midpoint sampling grid of Theta_nh = (-pi/nh, pi/nh]^d, avoiding
/// theta0 = 0 exactly; index order is row-major (y outer).
pub fn frequency_grid(window: &Window, samples_per_dim: usize) -> Vec<Frequency> {
    let s = samples_per_dim;
    let coord = |j: usize, i: usize| -> f64 {
        let half = std::f64::consts::PI / window.period_len(j);
        -half + (i as f64 + 0.5) * (2.0 * half / s as f64)
    };
    let mut out = Vec::new();
    if window.dim() == 1 {
        for i in 0..s {
            out.push(Frequency([coord(0, i), 0.0]));
        }
    } else {
        for iy in 0..s {
            for ix in 0..s {
                out.push(Frequency([coord(0, ix), coord(1, iy)]));
            }
        }
    }
    out
}

/// Orbits of the sample indices under the chosen symmetry group. Returns
/// (representative linear index, members) with deterministic order.
fn orbits(samples: usize, dim: usize, symmetry: SweepSymmetry) -> Vec<(usize, Vec<usize>)> {
    let s = samples;
    let linear = |ix: usize, iy: usize| iy * s + ix;
    let total = if dim == 1 { s } else { s * s };
    let group: Vec<fn((usize, usize), usize) -> (usize, usize)> = {
        fn id(i: (usize, usize), _s: usize) -> (usize, usize) {
            i
        }
        fn neg(i: (usize, usize), s: usize) -> (usize, usize) {
            (s - 1 - i.0, s - 1 - i.1)
        }
        fn swap(i: (usize, usize), _s: usize) -> (usize, usize) {
            (i.1, i.0)
        }
        fn negswap(i: (usize, usize), s: usize) -> (usize, usize) {
            (s - 1 - i.1, s - 1 - i.0)
        }
        fn negx(i: (usize, usize), s: usize) -> (usize, usize) {
            (s - 1 - i.0, i.1)
        }
        fn negy(i: (usize, usize), s: usize) -> (usize, usize) {
            (i.0, s - 1 - i.1)
        }
        fn swapnegx(i: (usize, usize), s: usize) -> (usize, usize) {
            (s - 1 - i.1, i.0)
        }
        fn swapnegy(i: (usize, usize), s: usize) -> (usize, usize) {
            (i.1, s - 1 - i.0)
        }
        match (dim, symmetry) {
            (_, SweepSymmetry::None) => vec![id as fn(_, _) -> _],
            (1, _) => vec![id, neg],
            (_, SweepSymmetry::Central) => vec![id, neg],
            (_, SweepSymmetry::CentralSwap) => vec![id, neg, swap, negswap],
            (_, SweepSymmetry::Dihedral) => {
                vec![id, neg, swap, negswap, negx, negy, swapnegx, swapnegy]
            }
        }
    };
    let mut seen = vec![false; total];
    let mut out = Vec::new();
    for idx in 0..total {
        if seen[idx] {
            continue;
        }
        let tup = if dim == 1 { (idx, 0) } else { (idx % s, idx / s) };
        let mut members: Vec<usize> = group
            .iter()
            .map(|g| {
                let m = g(tup, s);
                if dim == 1 {
                    m.0
                } else {
                    linear(m.0, m.1)
                }
            })
            .collect();
        members.sort_unstable();
        members.dedup();
        for &m in &members {
            seen[m] = true;
        }
        out.push((idx, members));
    }
    out
}

/// Sweep the sampled frequencies and take the worst spectral radius, one
/// result per requested (nu1, nu2) split. Shared machinery for
/// [`asymptotic_factor`] and multi-cycle table runs.
pub fn sweep_rhos(
    setup: &AnalysisSetup,
    samples_per_dim: usize,
    nus: &[(u32, u32)],
) -> Result<Vec<FactorReport>, CoreError> {
    let analyzer = setup.analyzer()?;
    let freqs = frequency_grid(&analyzer.window, samples_per_dim);
    let dim = analyzer.window.dim();
    let reps = orbits(samples_per_dim, dim, setup.symmetry);

    let rep_results: Vec<(usize, FreqOutcome)> = reps
        .par_iter()
        .map(|&(rep, _)| {
            let outcome = analyzer.rho_two_grid(freqs[rep], nus)?;
            Ok((rep, outcome))
        })
        .collect::<Result<_, CoreError>>()?;

    let total = freqs.len();
    let mut values: Vec<Option<Vec<f64>>> = vec![None; total];
    let mut skipped_flags = vec![false; total];
    for ((_, members), (_, outcome)) in reps.iter().zip(rep_results.iter()) {
        match outcome {
            FreqOutcome::Rho(rhos) => {
                for &m in members {
                    values[m] = Some(rhos.clone());
                }
            }
            FreqOutcome::Skipped => {
                for &m in members {
                    skipped_flags[m] = true;
                }
            }
        }
    }

    let skipped: Vec<[f64; 2]> = (0..total).filter(|&i| skipped_flags[i]).map(|i| freqs[i].0).collect();
    if skipped.len() * 100 > total {
        return Err(CoreError::Config(format!(
            "{} of {} frequencies skipped as coarse-singular; configuration problem",
            skipped.len(),
            total
        )));
    }

    let mut reports = Vec::with_capacity(nus.len());
    for (k, &(nu1, nu2)) in nus.iter().enumerate() {
        let per_freq: Vec<([f64; 2], f64)> = (0..total)
            .filter_map(|i| values[i].as_ref().map(|r| (freqs[i].0, r[k])))
            .collect();
        let rho_2g = per_freq.iter().map(|&(_, r)| r).fold(0.0, f64::max);
        let mut config = setup.label.clone();
        if let serde_json::Value::Object(ref mut map) = config {
            map.insert("nu1".into(), nu1.into());
            map.insert("nu2".into(), nu2.into());
            map.insert("samples_per_dim".into(), samples_per_dim.into());
            map.insert("window".into(), serde_json::json!([setup.window_n[0], setup.window_n[1]]));
        }
        reports.push(FactorReport { rho_2g, per_freq, skipped: skipped.clone(), config });
    }
    Ok(reports)
}

/// The asymptotic two-grid convergence factor: max over the sampled
/// frequencies of the spectral radius of the two-grid symbol.
pub fn asymptotic_factor(
    setup: &AnalysisSetup,
    samples_per_dim: usize,
    nu1: u32,
    nu2: u32,
) -> Result<FactorReport, CoreError> {
    if samples_per_dim < 8 {
        return Err(CoreError::Config(format!(
            "samples_per_dim must be at least 8, got {samples_per_dim}"
        )));
    }
    Ok(sweep_rhos(setup, samples_per_dim, &[(nu1, nu2)])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_partition_covers_all_samples() {
        for (dim, sym) in [
            (1, SweepSymmetry::Central),
            (2, SweepSymmetry::Central),
            (2, SweepSymmetry::CentralSwap),
            (2, SweepSymmetry::Dihedral),
            (2, SweepSymmetry::None),
        ] {
            let s = 8;
            let reps = orbits(s, dim, sym);
            let total = if dim == 1 { s } else { s * s };
            let mut seen = vec![0usize; total];
            for (_, members) in &reps {
                for &m in members {
                    seen[m] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1), "dim={dim}, {sym:?}: {seen:?}");
        }
    }

    #[test]
    fn midpoint_grid_is_symmetric_and_avoids_zero() {
        let st = crate::discretization::assemble_poisson_stencils(
            &crate::discretization::GridSpec::new(1, 1.0, 1).unwrap(),
        )
        .unwrap();
        let w = Window::new(st.classes.clone(), [6, 1], st.lattice_h).unwrap();
        let g = frequency_grid(&w, 32);
        assert_eq!(g.len(), 32);
        for (i, f) in g.iter().enumerate() {
            assert!(f.0[0] != 0.0);
            let mirror = g[31 - i].0[0];
            assert!((f.0[0] + mirror).abs() < 1e-14);
        }
        let max = g.iter().map(|f| f.0[0]).fold(0.0, f64::max);
        assert!(max < std::f64::consts::PI / 6.0);
    }
}
