use std::time::Instant;

use quasiloc::hull::{Cutoff, SpectralWeight};
use quasiloc::interp::bump::RECONSTRUCTION_POINTS;
use quasiloc::interp::{
    build_bump, conditional_variance_grid, fit_eta, variance_sweep, Majorant,
};
use quasiloc::torus::TorusPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lorentzian_weight(cutoff: usize) -> SpectralWeight {
    SpectralWeight::from_radial_fn(1, cutoff, |t, r| t.sqrt().exp() / (1.0 + (r * r) as f64)).unwrap()
}

#[test]
fn sandwich_chain() {
    let start = Instant::now();
    let w = lorentzian_weight(64);
    let reports = variance_sweep(&w, &Majorant::sqrt(), &[0.5, 0.25, 0.125], 256, 1e-10).unwrap();
    for r in &reports {
        println!("{r:?}");
        assert!(r.chain_holds(0.05), "{r:?}");
    }
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn bump_support_and_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [Majorant::sqrt(), Majorant::exponential(1.0, 0.4).unwrap()] {
        for eps in [0.5, 0.25] {
            let b = build_bump(&m, eps, 1, None).unwrap();
            assert_eq!(b.j_cut, b.k0 + 40);
            assert!(b.half_support() <= eps);
            assert_eq!(b.ghat(&[0.0]), 1.0);
            let grid = b.reconstruct_1d(RECONSTRUCTION_POINTS);
            let g0 = b.g_1d(0.0);
            let gmax = grid.iter().fold(0.0f64, |a, p| a.max(p.1.abs()));
            assert!(g0 >= gmax * (1.0 - 1e-12), "max g must sit at the origin");
            for &(xi, g) in &grid {
                if xi.abs() > eps {
                    assert!(g.abs() <= 1e-6 * gmax, "eps {eps}: g({xi}) = {g}");
                }
            }
            let top = b.decay_range();
            for _ in 0..1000 {
                let lam = rng.gen_range(0.0..=top);
                let log_g = b.ghat_1d(lam).abs().ln();
                assert!(log_g <= b.log_decay_bound(lam).unwrap(), "lambda {lam}");
            }
        }
    }
}

#[test]
fn nested_grids_refine() {
    let w = lorentzian_weight(32);
    let c = TorusPoint::origin(1);
    for eps in [0.25, 0.125] {
        let coarse = conditional_variance_grid(&w, &c, eps, 32, 1e-10).unwrap();
        let fine = conditional_variance_grid(&w, &c, eps, 64, 1e-10).unwrap();
        assert!(fine <= coarse + 1e-9, "{fine} > {coarse}");
    }
}

#[test]
fn monotone_in_epsilon() {
    let w = lorentzian_weight(32);
    let c = TorusPoint::origin(1);
    let vals: Vec<f64> = [0.0625, 0.125, 0.25, 0.375]
        .iter()
        .map(|&e| conditional_variance_grid(&w, &c, e, 64, 1e-10).unwrap())
        .collect();
    assert!(vals.windows(2).all(|p| p[0] <= p[1] + 1e-9), "{vals:?}");
}

#[test]
fn stretched_exponential_exponent() {
    let w = SpectralWeight::exponential(1.0, 0.4, 1, Cutoff::default()).unwrap();
    let c = TorusPoint::origin(1);
    let curve: Vec<(f64, f64)> = (1..=5)
        .map(|k| {
            let eps = 2f64.powi(-k);
            (eps, conditional_variance_grid(&w, &c, eps, 256, 1e-10).unwrap() / w.variance())
        })
        .collect();
    let eta = fit_eta(&curve).unwrap();
    let target = 0.4 / 0.6;
    assert!((eta - target).abs() <= 0.25 * target, "eta = {eta}");
}

#[test]
fn analytic_bound_grows_with_epsilon() {
    let w = lorentzian_weight(64);
    let m = Majorant::sqrt();
    let vals: Vec<f64> = (1..=12)
        .map(|k| quasiloc::interp::var_bound(&w, &m, 0.5 * 0.75f64.powi(12 - k), 1).unwrap())
        .collect();
    assert!(vals.windows(2).all(|p| p[0] <= p[1]));
}
