use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use super::majorant::Majorant;
use crate::error::{Error, Result};

/// Levels searched for `k0` before giving up.
pub const K0_BUDGET: u32 = 1_000_000;
/// Factors kept beyond `k0` when no cutoff is requested.
pub const DEFAULT_EXTRA_FACTORS: u32 = 40;
/// Points per axis of the reconstruction grid.
pub const RECONSTRUCTION_POINTS: usize = 4096;

/// Compactly supported `g` on `R^nu` with
/// `g_hat(lambda) = prod_r prod_{j=k0}^{j_cut} sinc(e lambda_r / R_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierDecayFunction {
    pub majorant: Majorant,
    pub epsilon: f64,
    pub nu: usize,
    pub k0: u32,
    pub j_cut: u32,
    pub radii: Vec<f64>,
    /// `g_hat` (one axis) at `m * 2 pi / period`, `0 <= m < RECONSTRUCTION_POINTS / 2`.
    #[serde(skip)]
    spectrum: Vec<f64>,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

pub fn build_bump(m: &Majorant, epsilon: f64, nu: usize, j_cut: Option<u32>) -> Result<FourierDecayFunction> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if nu == 0 {
        return Err(Error::InvalidParameter("nu must be positive".into()));
    }
    let target = epsilon / E;
    let mut k0 = None;
    for j in 1..=K0_BUDGET {
        let r = m.radius(j)?;
        if r > 0.0 && m.s_of(r)? <= target {
            k0 = Some(j);
            break;
        }
    }
    let k0 = k0.ok_or(Error::K0NotFound { budget: K0_BUDGET })?;
    let j_cut = match j_cut {
        None => k0 + DEFAULT_EXTRA_FACTORS,
        Some(j) if j < k0 + 8 => {
            return Err(Error::InvalidParameter(format!("j_cut = {j} must be at least k0 + 8 = {}", k0 + 8)))
        }
        Some(j) => j,
    };
    let radii = (k0..=j_cut).map(|j| m.radius(j)).collect::<Result<Vec<_>>>()?;
    let mut f = FourierDecayFunction {
        majorant: m.clone(),
        epsilon,
        nu,
        k0,
        j_cut,
        radii,
        spectrum: Vec::new(),
    };
    let step = f.frequency_step();
    f.spectrum = (0..RECONSTRUCTION_POINTS / 2).map(|k| f.ghat_1d(k as f64 * step)).collect();
    Ok(f)
}

impl FourierDecayFunction {
    /// One-axis factor of `g_hat`.
    pub fn ghat_1d(&self, x: f64) -> f64 {
        self.radii.iter().map(|r| sinc(E * x / r)).product()
    }

    pub fn ghat(&self, lambda: &[f64]) -> f64 {
        lambda.iter().map(|&x| self.ghat_1d(x)).product()
    }

    /// `sum_j e / R_j`; `g` vanishes outside `[-h, h]^nu`.
    pub fn half_support(&self) -> f64 {
        self.radii.iter().map(|r| E / r).sum()
    }

    /// Period of the reconstruction grid, `8 epsilon`.
    pub fn period(&self) -> f64 {
        8.0 * self.epsilon
    }

    fn frequency_step(&self) -> f64 {
        2.0 * PI / self.period()
    }

    /// One-axis `g` from the discrete inverse cosine transform of `g_hat`.
    pub fn g_1d(&self, xi: f64) -> f64 {
        let step = self.frequency_step();
        let tail: f64 = self.spectrum[1..]
            .iter()
            .enumerate()
            .map(|(k, s)| s * (xi * (k + 1) as f64 * step).cos())
            .sum();
        (self.spectrum[0] + 2.0 * tail) / self.period()
    }

    pub fn g(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|&x| self.g_1d(x)).product()
    }

    pub fn g_zero(&self) -> f64 {
        self.g_1d(0.0).powi(self.nu as i32)
    }

    /// `(xi_k, g_1d(xi_k))` on `xi_k = -4 epsilon + k period / n`.
    pub fn reconstruct_1d(&self, n: usize) -> Vec<(f64, f64)> {
        let p = self.period();
        (0..n)
            .map(|k| {
                let xi = -p / 2.0 + k as f64 * p / n as f64;
                (xi, self.g_1d(xi))
            })
            .collect()
    }

    /// `log` of `e M(S^-1(epsilon / e)) / M(|lambda|)`.
    pub fn log_decay_bound(&self, norm: f64) -> Result<f64> {
        let t = self.majorant.s_inverse(self.epsilon / E)?;
        Ok(1.0 + self.majorant.log_m(t) - self.majorant.log_m(norm))
    }

    pub fn decay_bound(&self, norm: f64) -> Result<f64> {
        Ok(self.log_decay_bound(norm)?.exp())
    }

    /// Largest `|lambda|` for which the decay bound is asserted.
    pub fn decay_range(&self) -> f64 {
        *self.radii.last().expect("at least nine factors")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_majorant_at_one_half() {
        let b = build_bump(&Majorant::sqrt(), 0.5, 1, None).unwrap();
        assert_eq!(b.k0, 11);
        assert_eq!(b.j_cut, 51);
        assert_eq!(b.radii[0], 121.0);
        let tail: f64 = (11..=51).map(|j| E / (j * j) as f64).sum();
        assert!((b.half_support() - tail).abs() < 1e-12);
        assert!(b.half_support() <= 0.2588 + 1e-4);
    }

    #[test]
    fn ghat_at_zero_is_one() {
        for eps in [0.5, 0.1] {
            let b = build_bump(&Majorant::exponential(1.0, 0.4).unwrap(), eps, 2, None).unwrap();
            assert_eq!(b.ghat(&[0.0, 0.0]), 1.0);
        }
    }

    #[test]
    fn argument_checks() {
        let m = Majorant::sqrt();
        assert!(build_bump(&m, 1.5, 1, None).is_err());
        assert!(build_bump(&m, 0.5, 1, Some(15)).is_err());
        assert!(build_bump(&m, 0.5, 1, Some(19)).is_ok());
    }

    #[test]
    fn reconstruction_integrates_to_one() {
        let b = build_bump(&Majorant::sqrt(), 0.5, 1, None).unwrap();
        let grid = b.reconstruct_1d(RECONSTRUCTION_POINTS);
        let h = b.period() / RECONSTRUCTION_POINTS as f64;
        let mass: f64 = grid.iter().map(|p| p.1).sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
    }
}
