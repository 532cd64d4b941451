use std::collections::BTreeSet;

use proptest::prelude::*;
use quasiloc::hull::{covariance, Cutoff, SpectralWeight};
use quasiloc::lattice::{are_disjoint, boundary, box_inner_boundary, BoxDifference, LatticeBox, Region, Site, SiteSet};
use quasiloc::torus::{diophantine_profile, shift, torus_dist, FrequencyMatrix, TorusPoint};
use quasiloc::Error;

fn boxes(d: usize) -> impl Strategy<Value = LatticeBox> {
    prop::collection::vec((-6i64..6, 0i64..5), d).prop_map(|iv| {
        LatticeBox::new(iv.into_iter().map(|(a, w)| (a, a + w)).collect()).unwrap()
    })
}

fn site_set(b: &LatticeBox) -> BTreeSet<Site> {
    b.sites().into_iter().collect()
}

/// Boundary pairs from a scan of every ordered pair of sites in an enlarged box.
fn brute_boundary(inside: &BTreeSet<Site>, hull: &LatticeBox) -> Vec<(Site, Site)> {
    let grown = LatticeBox::new(hull.intervals().iter().map(|&(a, b)| (a - 1, b + 1)).collect()).unwrap();
    let all = grown.sites();
    let mut out = Vec::new();
    for u in inside {
        for v in &all {
            let dist: i64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
            if dist == 1 && !inside.contains(v) {
                out.push((u.clone(), v.clone()));
            }
        }
    }
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn box_boundary_matches_site_scan(b in (1usize..=3).prop_flat_map(boxes)) {
        let set = site_set(&b);
        let got = boundary(&b, None).unwrap();
        prop_assert_eq!(&got.pairs, &brute_boundary(&set, &b));
        let inner: BTreeSet<Site> = got.inner().into_iter().collect();
        let direct: BTreeSet<Site> = box_inner_boundary(&b).into_iter().collect();
        prop_assert_eq!(inner, direct);
    }

    #[test]
    fn difference_boundary_matches_site_scan(outer in boxes(2), inner in boxes(2)) {
        let Ok(diff) = BoxDifference::new(outer.clone(), Some(inner.clone())) else { return Ok(()) };
        let set: BTreeSet<Site> = site_set(&outer).difference(&site_set(&inner)).cloned().collect();
        prop_assert_eq!(diff.sites().into_iter().collect::<BTreeSet<_>>(), set.clone());
        if set.is_empty() {
            return Ok(());
        }
        prop_assert_eq!(boundary(&diff, None).unwrap().pairs, brute_boundary(&set, &outer));
        let as_set = SiteSet::new(2, set.iter().cloned()).unwrap();
        prop_assert_eq!(boundary(&as_set, Some(&outer)).unwrap().pairs.len(),
            brute_boundary(&set, &outer).iter().filter(|(_, v)| outer.contains(v)).count());
    }

    #[test]
    fn disjointness_matches_site_sets(d in 1usize..=3, seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut pick = || -> LatticeBox {
            use rand::Rng;
            LatticeBox::new((0..d).map(|_| { let a = rng.gen_range(-4..4); (a, a + rng.gen_range(0..4)) }).collect()).unwrap()
        };
        let (a, b) = (pick(), pick());
        let brute = site_set(&a).is_disjoint(&site_set(&b));
        prop_assert_eq!(are_disjoint(&a, &b), brute);
        match a.intersection(&b) {
            None => prop_assert!(brute),
            Some(c) => prop_assert_eq!(site_set(&c), site_set(&a).intersection(&site_set(&b)).cloned().collect()),
        }
    }

    #[test]
    fn shift_is_a_group_action(w in 0.0f64..1.0, x in -50i64..50, y in -50i64..50) {
        let alpha = FrequencyMatrix::golden_mean();
        let omega = TorusPoint::new(vec![w]).unwrap();
        let two_step = shift(&shift(&omega, &alpha, &[x]).unwrap(), &alpha, &[y]).unwrap();
        let one_step = shift(&omega, &alpha, &[x + y]).unwrap();
        prop_assert!(torus_dist(&two_step, &one_step) < 1e-12);
        prop_assert!(torus_dist(&shift(&omega, &alpha, &[0]).unwrap(), &omega) == 0.0);
    }

    #[test]
    fn torus_distance_is_a_metric(a in prop::collection::vec(0.0f64..1.0, 2),
                                  b in prop::collection::vec(0.0f64..1.0, 2),
                                  c in prop::collection::vec(0.0f64..1.0, 2)) {
        let (a, b, c) = (TorusPoint::new(a).unwrap(), TorusPoint::new(b).unwrap(), TorusPoint::new(c).unwrap());
        prop_assert!(torus_dist(&a, &a) == 0.0);
        prop_assert_eq!(torus_dist(&a, &b), torus_dist(&b, &a));
        prop_assert!(torus_dist(&a, &b) <= 0.5);
        prop_assert!(torus_dist(&a, &c) <= torus_dist(&a, &b) + torus_dist(&b, &c) + 1e-15);
        let whole = a.offset(&[1.0, -3.0]);
        prop_assert!(torus_dist(&a, &whole) < 1e-12);
    }

    #[test]
    fn covariance_is_stationary(a in 0.0f64..1.0, b in 0.0f64..1.0, x in -40i64..40) {
        let w = SpectralWeight::exponential(1.0, 0.4, 1, Cutoff::Fixed(40)).unwrap();
        let alpha = FrequencyMatrix::golden_mean();
        let (p, q) = (TorusPoint::new(vec![a]).unwrap(), TorusPoint::new(vec![b]).unwrap());
        let base = covariance(&w, &p, &q);
        let moved = covariance(&w, &shift(&p, &alpha, &[x]).unwrap(), &shift(&q, &alpha, &[x]).unwrap());
        prop_assert!((base - moved).abs() < 1e-10);
        prop_assert!((base - covariance(&w, &q, &p)).abs() < 1e-14);
        prop_assert!(base <= covariance(&w, &p, &p) + 1e-14);
    }
}

#[test]
fn golden_mean_diophantine_exponent() {
    let fit = diophantine_profile(&FrequencyMatrix::golden_mean(), 10_000).unwrap();
    assert!((0.8..=1.2).contains(&fit.fitted_a), "{}", fit.fitted_a);
    assert!(fit.r_squared >= 0.9, "{}", fit.r_squared);
    // records fall on Fibonacci numbers
    let ls: Vec<u64> = fit.records.iter().map(|r| r.l).collect();
    assert_eq!(&ls[..6], &[1, 2, 3, 5, 8, 13]);
}

#[test]
fn rational_frequency_is_resonant() {
    let alpha = FrequencyMatrix::new(1, 1, vec![0.5]).unwrap();
    assert_eq!(diophantine_profile(&alpha, 100), Err(Error::ResonantFrequency { witness: vec![2] }));
}
