//! The torus `T^nu = (R/Z)^nu`, the shift action `x -> omega + alpha x`,
//! and empirical Diophantine profiles of the frequency matrix.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduces `x` into `[0, 1)`.
pub fn reduce(x: f64) -> f64 {
    let mut r = x - x.round_ties_even();
    if r < 0.0 {
        r += 1.0;
    }
    if r >= 1.0 {
        r = 0.0;
    }
    r
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round_ties_even()).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("a torus point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("torus coordinates must be finite".into()));
        }
        Ok(Self(coords.into_iter().map(reduce).collect()))
    }

    pub fn origin(nu: usize) -> Self {
        Self(vec![0.0; nu])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Coordinatewise `self + delta` reduced mod 1.
    pub fn offset(&self, delta: &[f64]) -> TorusPoint {
        TorusPoint(self.0.iter().zip(delta).map(|(a, b)| reduce(a + b)).collect())
    }
}

/// The `nu x d` frequency matrix, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    nu: usize,
    d: usize,
    entries: Vec<f64>,
}

impl FrequencyMatrix {
    pub fn new(nu: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        if nu == 0 || d == 0 {
            return Err(Error::InvalidParameter("nu and d must be positive".into()));
        }
        if entries.len() != nu * d {
            return Err(Error::DimensionMismatch { expected: nu * d, found: entries.len() });
        }
        if entries.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("frequency entries must be finite".into()));
        }
        Ok(Self { nu, d, entries })
    }

    /// The golden mean `(sqrt 5 - 1) / 2` as a `1 x 1` matrix.
    pub fn golden_mean() -> Self {
        Self { nu: 1, d: 1, entries: vec![(5f64.sqrt() - 1.0) / 2.0] }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.d + col]
    }

    /// The unreduced vector `alpha x`.
    pub fn apply(&self, x: &[i64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: x.len() });
        }
        Ok((0..self.nu)
            .map(|i| (0..self.d).map(|j| self.get(i, j) * x[j] as f64).sum())
            .collect())
    }
}

/// `T^x omega = omega + alpha x (mod 1)`.
pub fn shift(omega: &TorusPoint, alpha: &FrequencyMatrix, x: &[i64]) -> Result<TorusPoint> {
    if omega.dim() != alpha.nu() {
        return Err(Error::DimensionMismatch { expected: alpha.nu(), found: omega.dim() });
    }
    let ax = alpha.apply(x)?;
    Ok(omega.offset(&ax))
}

/// l-infinity distance on the torus; lies in `[0, 1/2]`.
pub fn torus_dist(a: &TorusPoint, b: &TorusPoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| dist_to_int(x - y))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineRecord {
    pub l: u64,
    pub min_dist: f64,
    pub witness: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineFit {
    /// `(L, min_{0 < |x| <= L} dist(alpha x, Z^nu))` for `L = 1..=L_max`.
    pub samples: Vec<(u64, f64)>,
    /// The Ls at which the running minimum strictly drops.
    pub records: Vec<DiophantineRecord>,
    pub fitted_a: f64,
    pub fitted_c: f64,
    pub r_squared: f64,
    pub exact: bool,
}

/// Above this `L_max` the one-frequency, one-dimensional case uses exact
/// continued-fraction arithmetic instead of a brute-force scan.
pub const EXACT_PATH_THRESHOLD: u64 = 100_000;

/// Brute-force (or, for `nu = d = 1` and large `L_max`, continued-fraction) profile of
/// `min_{0 < |x|_1 <= L} dist(alpha x, Z^nu)`, with a power-law fit on the record points.
pub fn diophantine_profile(alpha: &FrequencyMatrix, l_max: u64) -> Result<DiophantineFit> {
    if l_max < 2 {
        return Err(Error::InvalidParameter("L_max must be at least 2".into()));
    }
    if alpha.nu() == 1 && alpha.d() == 1 && l_max > EXACT_PATH_THRESHOLD {
        return exact_profile(alpha.get(0, 0), l_max);
    }
    brute_force_profile(alpha, l_max)
}

/// Half of the l1 sphere of radius `r`: one representative of each `{x, -x}`.
fn half_sphere(d: usize, r: i64) -> Vec<Vec<i64>> {
    fn rec(prefix: &mut Vec<i64>, d: usize, left: i64, leading_done: bool, out: &mut Vec<Vec<i64>>) {
        let axis = prefix.len();
        if axis + 1 == d {
            // last coordinate absorbs the remaining radius
            let choices: Vec<i64> = if left == 0 {
                vec![0]
            } else if leading_done {
                vec![left, -left]
            } else {
                vec![left]
            };
            for c in choices {
                prefix.push(c);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for mag in 0..=left {
            let signs: &[i64] = if mag == 0 {
                &[0]
            } else if leading_done {
                &[1, -1]
            } else {
                &[1]
            };
            for &s in signs {
                prefix.push(s * mag);
                rec(prefix, d, left - mag, leading_done || mag > 0, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(d), d, r, false, &mut out);
    out
}

fn brute_force_profile(alpha: &FrequencyMatrix, l_max: u64) -> Result<DiophantineFit> {
    let shells: Vec<(f64, Vec<i64>)> = (1..=l_max as i64)
        .into_par_iter()
        .map(|r| {
            let mut best = (f64::INFINITY, Vec::new());
            for x in half_sphere(alpha.d(), r) {
                let ax = alpha.apply(&x).expect("dimension checked");
                let dist = ax.iter().map(|&v| dist_to_int(v)).fold(0.0, f64::max);
                let scale = ax.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                if dist <= 8.0 * f64::EPSILON * scale {
                    return (0.0, x);
                }
                if dist < best.0 {
                    best = (dist, x);
                }
            }
            best
        })
        .collect();

    let mut samples = Vec::with_capacity(l_max as usize);
    let mut records = Vec::new();
    let mut running = f64::INFINITY;
    for (i, (dist, witness)) in shells.into_iter().enumerate() {
        let l = i as u64 + 1;
        if dist == 0.0 {
            return Err(Error::ResonantFrequency { witness });
        }
        if dist < running {
            running = dist;
            records.push(DiophantineRecord { l, min_dist: dist, witness });
        }
        samples.push((l, running));
    }
    finish_fit(samples, records, false)
}

fn exact_profile(alpha: f64, l_max: u64) -> Result<DiophantineFit> {
    let exact = BigRational::from_float(alpha)
        .ok_or_else(|| Error::InvalidParameter("alpha must be finite".into()))?;
    let frac = &exact - exact.floor();
    // Convergent denominators of frac(alpha); min over q <= L of ||q alpha|| is attained at
    // the largest such denominator.
    let mut denominators: Vec<BigInt> = Vec::new();
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let mut rest = frac.clone();
    denominators.push(q.clone());
    let bound = BigInt::from(l_max);
    while !rest.is_zero() {
        let inv = rest.recip();
        let a = inv.floor().to_integer();
        rest = &inv - BigRational::from_integer(a.clone());
        let next = &a * &q + &q_prev;
        q_prev = std::mem::replace(&mut q, next);
        if q > bound {
            break;
        }
        denominators.push(q.clone());
    }
    let nearest = |qd: &BigInt| -> BigRational {
        let v = &exact * BigRational::from_integer(qd.clone());
        (&v - v.round()).abs()
    };

    let mut records = Vec::new();
    let mut running: Option<BigRational> = None;
    for qd in &denominators {
        let dist = nearest(qd);
        if dist.is_zero() {
            return Err(Error::ResonantFrequency { witness: vec![qd.to_i64().unwrap_or(i64::MAX)] });
        }
        if running.as_ref().is_none_or(|r| &dist < r) {
            let l = qd.to_u64().expect("bounded by l_max");
            records.push(DiophantineRecord { l, min_dist: dist.to_f64().unwrap_or(0.0), witness: vec![l as i64] });
            running = Some(dist);
        }
    }
    let mut samples = Vec::with_capacity(l_max as usize);
    let mut next = 0usize;
    let mut current = f64::INFINITY;
    for l in 1..=l_max {
        while next < records.len() && records[next].l <= l {
            current = records[next].min_dist;
            next += 1;
        }
        samples.push((l, current));
    }
    finish_fit(samples, records, true)
}

fn finish_fit(samples: Vec<(u64, f64)>, records: Vec<DiophantineRecord>, exact: bool) -> Result<DiophantineFit> {
    if records.len() < 2 {
        return Err(Error::InvalidParameter("fewer than two record points; increase L_max".into()));
    }
    let xs: Vec<f64> = records.iter().map(|r| (r.l as f64).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.min_dist.ln()).collect();
    let fit = crate::stats::linear_fit(&xs, &ys);
    Ok(DiophantineFit {
        samples,
        records,
        fitted_a: -fit.slope,
        fitted_c: fit.intercept.exp(),
        r_squared: fit.r_squared,
        exact,
    })
}
