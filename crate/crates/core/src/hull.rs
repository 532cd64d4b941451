//! Stationary Gaussian processes on `T^nu` built from a spectral weight `W`:
//!
//! ```text
//! v(omega) = sum_{l in 2 pi Z^nu} (g_l cos<omega, l> + h_l sin<omega, l>) / sqrt(W(l))
//! ```
//!
//! with independent standard normal `g_l`, `h_l`. Only modes `l = 2 pi n` with
//! `|n|_inf <= cutoff` are retained; the variance carried by the discarded modes is
//! reported as `tail`. Norms of frequencies are l-infinity throughout, matching the
//! torus metric.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeBox;
use crate::torus::{torus_dist, TorusPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `W(l) = c (1 + |l|)^(nu + delta)`.
    Power { c: f64, delta: f64 },
    /// `W(l) = c exp(c |l|^zeta)`.
    Exponential { c: f64, zeta: f64 },
    /// `W(2 pi n) = values[|n|_inf]`; modes beyond the table are absent.
    Table { values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Fixed(usize),
    /// Smallest cutoff whose tail is at most `rel_tol` times the total variance, capped at `max`.
    Auto { rel_tol: f64, max: usize },
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::Auto { rel_tol: 1e-8, max: 4096 }
    }
}

/// Number of `n in Z^nu` with `|n|_inf = r`.
pub fn shell_count(nu: usize, r: usize) -> f64 {
    if r == 0 {
        1.0
    } else {
        ((2 * r + 1) as f64).powi(nu as i32) - ((2 * r - 1) as f64).powi(nu as i32)
    }
}

// Shells summed explicitly before the integral tail estimate takes over (power kind).
const POWER_EXPLICIT_SHELLS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWeight {
    kind: WeightKind,
    nu: usize,
    cutoff: usize,
    tail: f64,
    variance: f64,
    #[serde(skip)]
    half_modes: Vec<(Vec<i64>, f64)>,
}

impl SpectralWeight {
    pub fn new(kind: WeightKind, nu: usize, cutoff: Cutoff) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        match &kind {
            WeightKind::Power { c, delta } => {
                if !(*c > 0.0 && *delta > 0.0) {
                    return Err(Error::InvalidParameter("power weight needs c > 0 and delta > 0".into()));
                }
            }
            WeightKind::Exponential { c, zeta } => {
                if !(*c > 0.0 && *zeta > 0.0) {
                    return Err(Error::InvalidParameter("exponential weight needs c > 0 and zeta > 0".into()));
                }
            }
            WeightKind::Table { values } => {
                if values.is_empty() {
                    return Err(Error::NoModes);
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidParameter("table weights must be positive and finite".into()));
                }
            }
        }
        let mut w = SpectralWeight { kind, nu, cutoff: 0, tail: 0.0, variance: 0.0, half_modes: Vec::new() };
        let total = w.total_variance();
        let cutoff = match cutoff {
            Cutoff::Fixed(c) => c,
            Cutoff::Auto { rel_tol, max } => {
                let mut acc = 0.0;
                let mut chosen = max;
                for r in 0..=max {
                    acc += w.shell_mass(r);
                    if total - acc <= rel_tol * total {
                        chosen = r;
                        break;
                    }
                }
                chosen
            }
        };
        if let WeightKind::Table { values } = &w.kind {
            if cutoff >= values.len() {
                return Err(Error::InvalidParameter(format!(
                    "cutoff {cutoff} exceeds the table (largest radius {})",
                    values.len() - 1
                )));
            }
        }
        w.cutoff = cutoff;
        w.variance = (0..=cutoff).map(|r| w.shell_mass(r)).sum();
        w.tail = match &w.kind {
            WeightKind::Table { values } => ((cutoff + 1)..values.len()).map(|r| w.shell_mass(r)).sum(),
            _ => w.tail_from(cutoff + 1),
        };
        w.half_modes = half_modes(nu, cutoff).into_iter().map(|n| {
            let inv = 1.0 / w.eval(&n);
            (n, inv)
        }).collect();
        Ok(w)
    }

    pub fn power(c: f64, delta: f64, nu: usize, cutoff: Cutoff) -> Result<Self> {
        Self::new(WeightKind::Power { c, delta }, nu, cutoff)
    }

    pub fn exponential(c: f64, zeta: f64, nu: usize, cutoff: Cutoff) -> Result<Self> {
        Self::new(WeightKind::Exponential { c, zeta }, nu, cutoff)
    }

    /// Radial table indexed by `|n|_inf`.
    pub fn table(values: Vec<f64>, nu: usize, cutoff: Cutoff) -> Result<Self> {
        Self::new(WeightKind::Table { values }, nu, cutoff)
    }

    /// Radial table `W(2 pi n) = f(2 pi |n|_inf, |n|_inf)` for `|n|_inf <= cutoff`.
    pub fn from_radial_fn(nu: usize, cutoff: usize, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let values = (0..=cutoff).map(|r| f(2.0 * PI * r as f64, r)).collect();
        Self::table(values, nu, Cutoff::Fixed(cutoff))
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Variance carried by the discarded modes.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `sum_{|n| <= cutoff} 1 / W(2 pi n)`, the variance of the truncated process.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `W` at `|l|_inf = 2 pi r`.
    pub fn radial(&self, r: usize) -> f64 {
        let t = 2.0 * PI * r as f64;
        match &self.kind {
            WeightKind::Power { c, delta } => c * (1.0 + t).powf(self.nu as f64 + delta),
            WeightKind::Exponential { c, zeta } => c * (c * t.powf(*zeta)).exp(),
            WeightKind::Table { values } => values.get(r).copied().unwrap_or(f64::INFINITY),
        }
    }

    /// `W(2 pi n)`.
    pub fn eval(&self, n: &[i64]) -> f64 {
        self.radial(n.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0))
    }

    /// Representatives `n` of `{n, -n}` with `|n|_inf <= cutoff` (the origin included),
    /// each paired with `1 / W(2 pi n)`.
    pub fn half_modes(&self) -> &[(Vec<i64>, f64)] {
        &self.half_modes
    }

    /// All retained `n`, lexicographic.
    pub fn modes(&self) -> Vec<Vec<i64>> {
        let c = self.cutoff as i64;
        LatticeBox::cube(&vec![0; self.nu], c).map(|b| b.sites()).unwrap_or_default()
    }

    fn shell_mass(&self, r: usize) -> f64 {
        shell_count(self.nu, r) / self.radial(r)
    }

    fn tail_from(&self, start: usize) -> f64 {
        match &self.kind {
            WeightKind::Table { values } => (start..values.len()).map(|r| self.shell_mass(r)).sum(),
            WeightKind::Exponential { .. } => {
                let mut acc = 0.0;
                let mut r = start;
                loop {
                    let term = self.shell_mass(r);
                    acc += term;
                    if term == 0.0 || (term < 1e-18 * acc && r > start + 8) || r > start + 10_000_000 {
                        break;
                    }
                    r += 1;
                }
                acc
            }
            WeightKind::Power { c, delta } => {
                let end = start + POWER_EXPLICIT_SHELLS;
                let explicit: f64 = (start..end).map(|r| self.shell_mass(r)).sum();
                // shell(r) <= 2 nu (3r)^(nu-1) and W >= c (2 pi r)^(nu+delta)
                let nu = self.nu as f64;
                let integral = 2.0 * nu * 3f64.powf(nu - 1.0)
                    / (c * (2.0 * PI).powf(nu + delta) * delta)
                    * ((end - 1) as f64).powf(-delta);
                explicit + integral
            }
        }
    }

    fn total_variance(&self) -> f64 {
        match &self.kind {
            WeightKind::Table { values } => (0..values.len()).map(|r| self.shell_mass(r)).sum(),
            _ => self.shell_mass(0) + self.tail_from(1),
        }
    }
}

fn half_modes(nu: usize, cutoff: usize) -> Vec<Vec<i64>> {
    let c = cutoff as i64;
    LatticeBox::cube(&vec![0; nu], c)
        .map(|b| b.sites())
        .unwrap_or_default()
        .into_iter()
        .filter(|n| match n.iter().find(|&&x| x != 0) {
            None => true,
            Some(&x) => x > 0,
        })
        .collect()
}

/// `E v(a) v(b) = sum_{|n| <= cutoff} cos<a - b, 2 pi n> / W(2 pi n)`.
pub fn covariance(w: &SpectralWeight, a: &TorusPoint, b: &TorusPoint) -> f64 {
    let delta: Vec<f64> = a.coords().iter().zip(b.coords()).map(|(x, y)| x - y).collect();
    covariance_at(w, &delta)
}

/// Covariance as a function of the (unreduced) separation.
pub fn covariance_at(w: &SpectralWeight, delta: &[f64]) -> f64 {
    w.half_modes()
        .iter()
        .map(|(n, inv)| {
            if n.iter().all(|&x| x == 0) {
                *inv
            } else {
                let phase: f64 = n.iter().zip(delta).map(|(&k, &x)| k as f64 * x).sum();
                2.0 * inv * (2.0 * PI * phase).cos()
            }
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoeff {
    pub n: Vec<i64>,
    pub g: f64,
    pub h: f64,
}

/// A truncated realization of the process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullSample {
    seed: Option<u64>,
    weight: SpectralWeight,
    coeffs: Vec<ModeCoeff>,
    /// `(n, cos amplitude, sin amplitude)` over half-modes, with `n` and `-n` merged.
    #[serde(skip)]
    folded: Vec<(Vec<i64>, f64, f64)>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent `(g, h)` for mode `n`, a pure function of `(seed, n)`.
pub fn mode_normals(seed: u64, n: &[i64]) -> (f64, f64) {
    let mut key = splitmix64(seed);
    for &c in n {
        key = splitmix64(key ^ c as u64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let g: f64 = StandardNormal.sample(&mut rng);
    let h: f64 = StandardNormal.sample(&mut rng);
    (g, h)
}

/// Draws one realization; the coefficients of a mode do not depend on the cutoff.
pub fn sample_hull(w: &SpectralWeight, seed: u64) -> HullSample {
    let coeffs = w
        .modes()
        .into_iter()
        .map(|n| {
            let (g, h) = mode_normals(seed, &n);
            ModeCoeff { n, g, h }
        })
        .collect();
    HullSample::assemble(Some(seed), w.clone(), coeffs)
}

impl HullSample {
    /// Realization with prescribed coefficients; unspecified retained modes are zero.
    pub fn with_coefficients(w: &SpectralWeight, coeffs: Vec<ModeCoeff>) -> Result<Self> {
        for c in &coeffs {
            if c.n.len() != w.nu() {
                return Err(Error::DimensionMismatch { expected: w.nu(), found: c.n.len() });
            }
            if c.n.iter().any(|x| x.unsigned_abs() as usize > w.cutoff()) {
                return Err(Error::InvalidParameter(format!("mode {:?} beyond the cutoff", c.n)));
            }
        }
        Ok(Self::assemble(None, w.clone(), coeffs))
    }

    fn assemble(seed: Option<u64>, weight: SpectralWeight, coeffs: Vec<ModeCoeff>) -> Self {
        let mut s = HullSample { seed, weight, coeffs, folded: Vec::new() };
        s.refold();
        s
    }

    fn refold(&mut self) {
        use std::collections::HashMap;
        let by_mode: HashMap<&[i64], (f64, f64)> =
            self.coeffs.iter().map(|c| (c.n.as_slice(), (c.g, c.h))).collect();
        self.folded = self
            .weight
            .half_modes()
            .iter()
            .map(|(n, inv)| {
                let amp = inv.sqrt();
                let (g, h) = by_mode.get(n.as_slice()).copied().unwrap_or((0.0, 0.0));
                if n.iter().all(|&x| x == 0) {
                    (n.clone(), g * amp, 0.0)
                } else {
                    let neg: Vec<i64> = n.iter().map(|x| -x).collect();
                    let (gm, hm) = by_mode.get(neg.as_slice()).copied().unwrap_or((0.0, 0.0));
                    (n.clone(), (g + gm) * amp, (h - hm) * amp)
                }
            })
            .collect();
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn weight(&self) -> &SpectralWeight {
        &self.weight
    }

    pub fn coeffs(&self) -> &[ModeCoeff] {
        &self.coeffs
    }

    pub fn nu(&self) -> usize {
        self.weight.nu()
    }

    /// Truncated series at `omega` by direct summation.
    pub fn eval(&self, omega: &TorusPoint) -> Result<f64> {
        if omega.dim() != self.nu() {
            return Err(Error::DimensionMismatch { expected: self.nu(), found: omega.dim() });
        }
        let x = omega.coords();
        Ok(self
            .folded
            .iter()
            .map(|(n, a, b)| {
                let phase: f64 = 2.0 * PI * n.iter().zip(x).map(|(&k, &t)| k as f64 * t).sum::<f64>();
                let (s, c) = phase.sin_cos();
                a * c + b * s
            })
            .sum())
    }

    /// Values on the grid `{k / grid_n}^nu` (lexicographic in `k`) via FFT.
    pub fn eval_grid(&self, grid_n: usize) -> Vec<f64> {
        let nu = self.nu();
        let total = grid_n.pow(nu as u32);
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        let n_i = grid_n as i64;
        for c in &self.coeffs {
            let amp = 1.0 / self.weight.eval(&c.n).sqrt();
            let mut idx = 0usize;
            for &k in &c.n {
                idx = idx * grid_n + k.rem_euclid(n_i) as usize;
            }
            data[idx] += Complex64::new(c.g * amp, -c.h * amp);
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(grid_n);
        // axis-wise transforms on the row-major array
        for axis in 0..nu {
            let stride = grid_n.pow((nu - 1 - axis) as u32);
            let block = stride * grid_n;
            let mut line = vec![Complex64::new(0.0, 0.0); grid_n];
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + offset + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[start + offset + k * stride] = *v;
                    }
                }
            }
        }
        data.into_iter().map(|z| z.re).collect()
    }
}

/// `v(omega)`; see [`HullSample::eval`].
pub fn eval_hull(h: &HullSample, omega: &TorusPoint) -> Result<f64> {
    h.eval(omega)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub kappa: f64,
    pub sup_norm: f64,
    /// Largest `|v(a) - v(b)| / dist(a, b)^kappa` over the tested pairs.
    pub holder_const: f64,
    pub grid_step: f64,
    /// `sup_norm + holder_const`.
    pub total: f64,
    pub adjacent_only: bool,
}

/// Above this many pairs only grid neighbours are compared.
pub const HOLDER_PAIR_LIMIT: usize = 1_000_000;

pub fn holder_estimate(h: &HullSample, kappa: f64, grid_n: usize) -> Result<HolderReport> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter("kappa must lie in (0, 1]".into()));
    }
    if grid_n < 8 {
        return Err(Error::InvalidParameter("grid_n must be at least 8".into()));
    }
    let nu = h.nu();
    let values = h.eval_grid(grid_n);
    let m = values.len();
    let sup_norm = values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let grid = LatticeBox::new(vec![(0, grid_n as i64 - 1); nu])?;
    let points: Vec<TorusPoint> = grid
        .sites()
        .into_iter()
        .map(|k| TorusPoint::new(k.iter().map(|&c| c as f64 / grid_n as f64).collect()).expect("finite"))
        .collect();
    let pairs = m * (m - 1) / 2;
    let adjacent_only = pairs > HOLDER_PAIR_LIMIT;
    let holder_const = if adjacent_only {
        let step = 1.0 / grid_n as f64;
        (0..m)
            .into_par_iter()
            .map(|i| {
                let mut best = 0.0f64;
                let mut rest = i;
                for axis in (0..nu).rev() {
                    let stride = grid_n.pow((nu - 1 - axis) as u32);
                    let coord = rest % grid_n;
                    rest /= grid_n;
                    let j = i - coord * stride + ((coord + 1) % grid_n) * stride;
                    best = best.max((values[i] - values[j]).abs() / step.powf(kappa));
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    } else {
        (0..m)
            .into_par_iter()
            .map(|i| {
                let mut best = 0.0f64;
                for j in (i + 1)..m {
                    let d = torus_dist(&points[i], &points[j]);
                    best = best.max((values[i] - values[j]).abs() / d.powf(kappa));
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    };
    Ok(HolderReport {
        kappa,
        sup_norm,
        holder_const,
        grid_step: 1.0 / grid_n as f64,
        total: sup_norm + holder_const,
        adjacent_only,
    })
}
