use std::time::Instant;

use proptest::prelude::*;
use quasiloc::hull::{sample_hull, Cutoff, SpectralWeight};
use quasiloc::lattice::{LRectangle, LatticeBox};
use quasiloc::msa::{
    check_msa_assumptions, eigen_decays, resonance_census, scale_sequence, sparsity_scan, Assumption,
    CensusConfig, EnergyGrid, MsaOptions, MsaParams, MsaSetup, Selector,
};
use quasiloc::operator::{assemble, FiniteOperator};
use quasiloc::stats::median;
use quasiloc::torus::{FrequencyMatrix, TorusPoint};

fn stretched() -> SpectralWeight {
    SpectralWeight::exponential(1.0, 0.4, 1, Cutoff::default()).unwrap()
}

fn setup(g: f64, seed: u64) -> MsaSetup {
    MsaSetup {
        hull: sample_hull(&stretched(), seed),
        alpha: FrequencyMatrix::golden_mean(),
        omega: TorusPoint::origin(1),
        g,
    }
}

fn params() -> MsaParams {
    MsaParams { m: 1.0, b: 0.5, gamma: 1.6, j: 2, l0: 10, r: 0.5 }
}

fn opts(k_max: usize, energies: EnergyGrid) -> MsaOptions {
    MsaOptions { k_max, energies, ..MsaOptions::default() }
}

#[test]
fn free_chain_outside_band_passes() {
    let start = Instant::now();
    let cert = check_msa_assumptions(&params(), &setup(0.0, 1), &opts(1, EnergyGrid::Explicit(vec![-6.0, -5.0, 5.0, 7.5])))
        .unwrap();
    assert_eq!(cert.ladder, vec![10, 39, 351, 11816]);
    assert_eq!(cert.window.intervals()[0], (-11816, 11816));
    assert!(cert.overall);
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn free_chain_mid_band_fails_with_witness() {
    let cert =
        check_msa_assumptions(&params(), &setup(0.0, 1), &opts(1, EnergyGrid::Explicit(vec![0.0, 5.0]))).unwrap();
    assert!(!cert.overall);
    assert!(!cert.passed(Assumption::SingularSparse));
    let fail = cert.failures().find(|c| c.assumption == Assumption::SingularSparse).unwrap();
    assert_eq!(fail.energy, 0.0);
    let w = fail.witness.as_ref().unwrap();
    assert_eq!(w.members.len(), 2);
    for m in &w.members {
        assert_eq!(m.rect.cardinality(), 11);
        assert!(m.rect.is_subset_of(&w.container));
        // E = 0 is an eigenvalue of the free chain on 11 sites
        assert!(m.value.is_infinite() || m.value > (-15.0f64).exp());
    }
    assert!(w.members[0].rect.intersection(&w.members[1].rect).is_none());
}

#[test]
fn strong_coupling_passes_at_first_scale() {
    let start = Instant::now();
    let cert = check_msa_assumptions(&params(), &setup(1e6, 3), &opts(0, EnergyGrid::Uniform(32))).unwrap();
    assert_eq!(cert.energies.len(), 32);
    assert_eq!(cert.window.cardinality(), 703);
    for c in cert.failures() {
        println!("{c:?}");
    }
    assert!(cert.overall);
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn chain_path_matches_generic_path() {
    let p = MsaParams { m: 0.3, b: 0.5, gamma: 1.6, j: 2, l0: 3, r: 0.5 };
    for (g, seed) in [(0.5, 1), (2.0, 2), (4.0, 3)] {
        let s = setup(g, seed);
        let base = MsaOptions { k_max: 0, energies: EnergyGrid::SpectrumAdapted { fill: 8 }, ..MsaOptions::default() };
        let fast = check_msa_assumptions(&p, &s, &base).unwrap();
        let slow = check_msa_assumptions(&p, &s, &MsaOptions { general_path: true, ..base.clone() }).unwrap();
        assert_eq!(fast.energies, slow.energies);
        assert_eq!(fast.checks.len(), slow.checks.len());
        for (a, b) in fast.checks.iter().zip(&slow.checks) {
            assert_eq!((a.assumption, a.k, a.passed, a.bad_count), (b.assumption, b.k, b.passed, b.bad_count));
        }
    }
}

#[test]
fn window_too_small_reports_feasible_depth() {
    let mut o = opts(1, EnergyGrid::Explicit(vec![5.0]));
    o.window = Some(LatticeBox::new(vec![(-400, 400)]).unwrap());
    match check_msa_assumptions(&params(), &setup(0.0, 1), &o) {
        Err(quasiloc::Error::WindowTooSmall { max_feasible }) => assert_eq!(max_feasible, Some(0)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn enlarging_energy_grid_never_restores_a_pass() {
    let p = MsaParams { m: 0.5, b: 0.5, gamma: 1.6, j: 2, l0: 4, r: 0.5 };
    let s = setup(1.0, 5);
    let small = check_msa_assumptions(&p, &s, &opts(0, EnergyGrid::Explicit(vec![-0.3, 0.2]))).unwrap();
    let big = check_msa_assumptions(&p, &s, &opts(0, EnergyGrid::Explicit(vec![-0.3, 0.2, 1.1, 2.5]))).unwrap();
    if !small.overall {
        assert!(!big.overall);
    }
}

#[test]
fn two_dimensional_certificate_runs() {
    let s = MsaSetup {
        hull: sample_hull(&SpectralWeight::exponential(1.0, 0.4, 2, Cutoff::Fixed(6)).unwrap(), 4),
        alpha: FrequencyMatrix::new(2, 2, vec![0.618_033_988_749_895, 0.0, 0.0, 0.414_213_562_373_095]).unwrap(),
        omega: TorusPoint::origin(2),
        g: 1e6,
    };
    let p = MsaParams { m: 1.0, b: 0.5, gamma: 1.6, j: 2, l0: 2, r: 0.5 };
    let o = MsaOptions { k_max: 0, energies: EnergyGrid::Uniform(3), outer_stride: 2, ..MsaOptions::default() };
    let cert = check_msa_assumptions(&p, &s, &o).unwrap();
    assert_eq!(cert.window.cardinality(), 11 * 11);
    assert_eq!(cert.checks.len(), 3 * 3);
    assert!(cert.cross_checks[0].residual.is_some_and(|r| r < 1e-8));
}

fn census(g: f64, seeds: u64, k_max: usize) -> CensusConfig {
    CensusConfig {
        weight: stretched(),
        alpha: FrequencyMatrix::golden_mean(),
        omega: TorusPoint::origin(1),
        g,
        l: 20,
        r: 0.5,
        k_max,
        seeds: (0..seeds).collect(),
    }
}

#[test]
fn census_decreases_in_k() {
    let report = resonance_census(&census(10.0, 500, 4)).unwrap();
    println!("{report:?}");
    assert!(report.is_monotone());
    assert!(report.frequencies[0] > report.frequencies[3]);
    let slope = report.log_slope.expect("at least two positive frequencies");
    assert!(slope < 0.0);
}

#[test]
fn census_without_disorder_is_deterministic() {
    let report = resonance_census(&census(0.0, 20, 3)).unwrap();
    assert!(report.frequencies.iter().all(|&f| f == 0.0));
}

#[test]
fn decay_mass_grows_with_coupling() {
    let start = Instant::now();
    let b = LatticeBox::new(vec![(0, 199)]).unwrap();
    let hull = sample_hull(&stretched(), 11);
    let mut medians = Vec::new();
    for g in [0.1, 1.0, 10.0, 50.0] {
        let h = assemble(&b, &TorusPoint::origin(1), &FrequencyMatrix::golden_mean(), &hull, g).unwrap();
        let masses: Vec<f64> =
            eigen_decays(&h, &Selector::MidSpectrum(20), None).unwrap().iter().map(|r| r.fitted_mass).collect();
        medians.push(median(&masses));
    }
    println!("{medians:?}");
    for w in medians.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "{medians:?}");
    }
    assert!(medians[3] >= 1.0);
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn strong_coupling_states_decay_fast() {
    let b = LatticeBox::new(vec![(0, 199)]).unwrap();
    let h = assemble(&b, &TorusPoint::origin(1), &FrequencyMatrix::golden_mean(), &sample_hull(&stretched(), 2), 1e6)
        .unwrap();
    for r in eigen_decays(&h, &Selector::Centered(20), None).unwrap() {
        assert!(r.fitted_mass >= 5.0, "{r:?}");
    }
}

#[test]
fn no_eigenvalue_in_window_is_an_error() {
    let b = LatticeBox::new(vec![(0, 9)]).unwrap();
    let h = FiniteOperator::from_potential(&b, vec![0.0; 10], 0.0).unwrap();
    assert!(eigen_decays(&h, &Selector::Window { lo: 3.0, hi: 4.0 }, None).is_err());
}

fn brute_force_disjoint(boxes: &[LatticeBox], j: usize) -> bool {
    let n = boxes.len();
    (0u32..1 << n).filter(|m| m.count_ones() as usize == j).any(|mask| {
        let chosen: Vec<&LatticeBox> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &boxes[i]).collect();
        chosen.iter().enumerate().all(|(a, x)| chosen[a + 1..].iter().all(|y| x.intersection(y).is_none()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sparsity_matches_exhaustive(
        corners in prop::collection::btree_set((0i64..12, 0i64..12, 0usize..2), 0..=20),
        flags in prop::collection::vec(any::<bool>(), 20),
        j in 1usize..=3,
    ) {
        let window = LatticeBox::new(vec![(0, 20), (0, 20)]).unwrap();
        let rects: Vec<LRectangle> = corners.iter().map(|&(x, y, s)| LRectangle::at(&[x, y], 3, s).unwrap()).collect();
        let out = sparsity_scan(&window, &rects, |r| flags[rects.iter().position(|q| q == r).unwrap()], j);
        let bad: Vec<LatticeBox> = rects.iter().enumerate().filter(|(i, _)| flags[*i]).map(|(_, r)| r.rect().clone()).collect();
        prop_assert_eq!(out.passed, !brute_force_disjoint(&bad, j));
        if !out.passed {
            prop_assert_eq!(out.witness.len(), j);
        }
    }

    #[test]
    fn ladder_strictly_increases(l0 in 2u64..200, gamma in 1.05f64..3.0) {
        match scale_sequence(l0, gamma, 4) {
            Ok(ladder) => prop_assert!(ladder.windows(2).all(|w| w[1] > w[0])),
            Err(quasiloc::Error::LadderStalls { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn census_inclusion(g in 0.5f64..20.0, seed in 0u64..1000) {
        let mut cfg = census(g, 5, 4);
        cfg.l = 8;
        cfg.seeds = (seed..seed + 5).collect();
        prop_assert!(resonance_census(&cfg).unwrap().is_monotone());
    }
}
