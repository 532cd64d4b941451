use nalgebra::DMatrix;
use quasiloc::lattice::{BoxDifference, LatticeBox, Region};
use quasiloc::operator::{green, resolvent_identity_residual, resolvent_norm, FiniteOperator, Resolvent};
use quasiloc::stats::linear_fit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_operator<R: Region>(region: &R, rng: &mut ChaCha8Rng, spread: f64) -> FiniteOperator {
    let n = region.sites().len();
    let pot = (0..n).map(|_| rng.gen_range(-spread..spread)).collect();
    FiniteOperator::from_potential(region, pot, 1.0).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, d: usize, max_side: i64) -> LatticeBox {
    LatticeBox::new(
        (0..d)
            .map(|_| {
                let a = rng.gen_range(-5..5);
                (a, a + rng.gen_range(1..max_side))
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn free_chain_green_decay_rate() {
    let b = LatticeBox::new(vec![(0, 100)]).unwrap();
    let h = FiniteOperator::from_potential(&b, vec![0.0; 101], 0.0).unwrap();
    let pairs: Vec<_> = (0..=90).map(|x| (vec![x], vec![0])).collect();
    let q = green(&h, 5.0, &pairs).unwrap();
    let xs: Vec<f64> = (0..=90).map(f64::from).collect();
    let ys: Vec<f64> = q.values.iter().map(|v| -v.abs().ln()).collect();
    let rate = linear_fit(&xs, &ys).slope;
    // G(0, x) ~ mu^x with mu = (5 - sqrt 21) / 2 the root of mu + 1/mu = 5 inside the unit disk
    let mu = (5.0 - 21f64.sqrt()) / 2.0;
    assert!((mu + 1.0 / mu - 5.0).abs() < 1e-12);
    assert!((rate - 1.5668).abs() <= 0.01 * 1.5668, "{rate}");
    assert!((rate + mu.ln()).abs() < 1e-6, "{rate}");
}

#[test]
fn columns_match_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in [1, 2, 3] {
        for _ in 0..5 {
            let b = random_box(&mut rng, d, if d == 3 { 4 } else { 8 });
            let h = random_operator(&b, &mut rng, 3.0);
            let e = rng.gen_range(-1.0..1.0);
            let n = h.len();
            let Some(inv) = (h.dense() - DMatrix::identity(n, n) * e).try_inverse() else { continue };
            let mut r = Resolvent::new(&h, e).unwrap();
            for j in 0..n {
                let col = r.column(j).to_vec();
                for i in 0..n {
                    assert!((col[i] - inv[(i, j)]).abs() <= 1e-9 * (1.0 + inv[(i, j)].abs()));
                }
            }
        }
    }
}

#[test]
fn resolvent_identity_on_nested_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    while done < 20 {
        let d = 1 + done % 2;
        let outer = random_box(&mut rng, d, if d == 1 { 100 } else { 10 });
        if outer.cardinality() > 100 || outer.cardinality() < 4 {
            continue;
        }
        let iv: Vec<(i64, i64)> = outer
            .intervals()
            .iter()
            .map(|&(a, b)| {
                let lo = rng.gen_range(a..=b);
                (lo, rng.gen_range(lo..=b))
            })
            .collect();
        let s = LatticeBox::new(iv).unwrap();
        let h = random_operator(&outer, &mut rng, 4.0);
        let e = rng.gen_range(-2.0..2.0);
        let sites = s.sites();
        let x = &sites[rng.gen_range(0..sites.len())];
        let y = &sites[rng.gen_range(0..sites.len())];
        let Ok(res) = resolvent_identity_residual(&h, &s, e, x, y) else { continue };
        assert!(res < 1e-8, "{res} on {s:?} in {outer:?}");
        done += 1;
    }
}

#[test]
fn identity_holds_on_box_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let outer = LatticeBox::new(vec![(0, 7), (0, 7)]).unwrap();
    let s = BoxDifference::new(
        LatticeBox::new(vec![(1, 6), (1, 6)]).unwrap(),
        Some(LatticeBox::new(vec![(3, 4), (2, 6)]).unwrap()),
    )
    .unwrap();
    let h = random_operator(&outer, &mut rng, 4.0);
    let res = resolvent_identity_residual(&h, &s, 0.37, &[1, 1], &[6, 5]).unwrap();
    assert!(res < 1e-8, "{res}");
}

#[test]
fn norm_is_inverse_spectral_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..50 {
        let b = random_box(&mut rng, 1 + k % 2, 9);
        let h = random_operator(&b, &mut rng, 3.0);
        let e = rng.gen_range(-4.0..4.0);
        let n = h.len();
        let inv = (h.dense() - DMatrix::identity(n, n) * e).try_inverse().unwrap();
        let op_norm = inv.singular_values().max();
        let got = resolvent_norm(&h, e);
        assert!((got - op_norm).abs() <= 1e-8 * op_norm, "{got} vs {op_norm}");
    }
}
