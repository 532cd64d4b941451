use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bump::{build_bump, FourierDecayFunction};
use super::majorant::Majorant;
use crate::error::{Error, Result};
use crate::hull::{covariance_at, shell_count, SpectralWeight};
use crate::lattice::LatticeBox;
use crate::stats::linear_fit;
use crate::torus::TorusPoint;

/// Default jitter, relative to the unconditional variance.
pub const DEFAULT_JITTER: f64 = 1e-10;
pub const DEFAULT_SLACK: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub epsilon: f64,
    /// Conditional variance given grid observations outside the `epsilon`-ball.
    pub grid_upper: f64,
    /// Bump quotient `g(0)^2 / sum g_hat^2 W`.
    pub karhunen_lower: f64,
    /// Closed-form lower bound, see [`var_bound`].
    pub analytic_bound: f64,
    pub cutoff: usize,
    /// Absolute jitter added to the observation covariance.
    pub jitter: f64,
    pub unconditional: f64,
}

impl VarianceReport {
    /// `analytic <= (1+s) karhunen` and `karhunen <= (1+s) grid`.
    pub fn chain_holds(&self, slack: f64) -> bool {
        self.analytic_bound <= (1.0 + slack) * self.karhunen_lower
            && self.karhunen_lower <= (1.0 + slack) * self.grid_upper
    }
}

fn check_epsilon(m: &Majorant, epsilon: f64) -> Result<()> {
    let bound = m.eps_max()?;
    if !(epsilon > 0.0 && epsilon <= bound) {
        return Err(Error::EpsilonHypothesis { epsilon, bound });
    }
    Ok(())
}

/// `K = sum over retained l of W(l) / M(|l|)`.
pub fn k_constant(w: &SpectralWeight, m: &Majorant) -> f64 {
    (0..=w.cutoff())
        .map(|r| shell_count(w.nu(), r) * (w.radial(r).ln() - m.log_m(2.0 * PI * r as f64)).exp())
        .sum()
}

fn karhunen_quotient(w: &SpectralWeight, bump: &FourierDecayFunction, scale: f64) -> f64 {
    let nu = w.nu() as i32;
    let g0 = scale * bump.g_1d(0.0).powi(nu);
    let axis: Vec<f64> = (0..=w.cutoff()).map(|k| bump.ghat_1d(2.0 * PI * k as f64)).collect();
    let denom: f64 = w
        .half_modes()
        .iter()
        .map(|(n, inv)| {
            let mult = if n.iter().all(|&x| x == 0) { 1.0 } else { 2.0 };
            let gh: f64 = scale * n.iter().map(|&k| axis[k.unsigned_abs() as usize]).product::<f64>();
            mult * gh * gh / inv
        })
        .sum();
    g0 * g0 / denom
}

/// Lower bound on the conditional variance from the bump built with `sqrt(M)`.
pub fn karhunen_lower_bound(w: &SpectralWeight, m: &Majorant, epsilon: f64) -> Result<f64> {
    check_epsilon(m, epsilon)?;
    let bump = build_bump(&m.half(), epsilon, w.nu(), None)?;
    Ok(karhunen_quotient(w, &bump, 1.0))
}

/// `1 / (e^2 4^nu K epsilon^(2 nu) M(S^-1(2 epsilon / e)))`.
pub fn var_bound(w: &SpectralWeight, m: &Majorant, epsilon: f64, nu: usize) -> Result<f64> {
    check_epsilon(m, epsilon)?;
    if nu != w.nu() {
        return Err(Error::DimensionMismatch { expected: w.nu(), found: nu });
    }
    let k = k_constant(w, m);
    let t = m.s_inverse(2.0 * epsilon / E)?;
    let nu = nu as i32;
    let log_den = 2.0 + (4f64.powi(nu) * k * epsilon.powi(2 * nu)).ln() + m.log_m(t);
    Ok((-log_den).exp())
}

/// `Var v(center)` given the values at `obs`, with `jitter * Var` added to the
/// observation covariance.
pub fn conditional_variance_points(
    w: &SpectralWeight,
    center: &TorusPoint,
    obs: &[TorusPoint],
    jitter: f64,
) -> Result<f64> {
    let n = obs.len();
    let diff = |a: &TorusPoint, b: &TorusPoint| -> Vec<f64> {
        a.coords().iter().zip(b.coords()).map(|(x, y)| x - y).collect()
    };
    let cov = DMatrix::from_fn(n, n, |i, j| covariance_at(w, &diff(&obs[i], &obs[j])));
    let row = DVector::from_fn(n, |i, _| covariance_at(w, &diff(&obs[i], center)));
    solve_conditional(w.variance(), cov, row, jitter)
}

fn solve_conditional(var: f64, mut cov: DMatrix<f64>, row: DVector<f64>, jitter: f64) -> Result<f64> {
    if !(jitter >= 0.0) {
        return Err(Error::InvalidParameter("jitter must be nonnegative".into()));
    }
    if row.is_empty() {
        return Ok(var);
    }
    let abs = jitter * var;
    for i in 0..cov.nrows() {
        cov[(i, i)] += abs;
    }
    let chol = cov.cholesky().ok_or(Error::IllConditioned { jitter })?;
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
    if jitter == 0.0 && min_pivot <= 1e-13 * var {
        return Err(Error::IllConditioned { jitter });
    }
    let x = l.solve_lower_triangular(&row).ok_or(Error::IllConditioned { jitter })?;
    Ok(var - x.norm_squared())
}

/// Grid points `center + k / grid_n` at torus distance at least `epsilon` from `center`.
pub fn observation_grid(center: &TorusPoint, epsilon: f64, grid_n: usize) -> Vec<Vec<i64>> {
    let nu = center.dim();
    let g = grid_n as i64;
    LatticeBox::new(vec![(0, g - 1); nu])
        .map(|b| b.sites())
        .unwrap_or_default()
        .into_iter()
        .filter(|k| {
            let d = k.iter().map(|&c| c.min(g - c)).max().unwrap_or(0) as f64 / grid_n as f64;
            d >= epsilon - 1e-12
        })
        .collect()
}

/// Conditional variance of `v(center)` given `v` on the grid points outside the
/// `epsilon`-ball. Grids with `grid_n` dividing `grid_n'` are nested.
pub fn conditional_variance_grid(
    w: &SpectralWeight,
    center: &TorusPoint,
    epsilon: f64,
    grid_n: usize,
    jitter: f64,
) -> Result<f64> {
    if grid_n < 4 {
        return Err(Error::InvalidParameter("grid_n must be at least 4".into()));
    }
    if center.dim() != w.nu() {
        return Err(Error::DimensionMismatch { expected: w.nu(), found: center.dim() });
    }
    let nu = w.nu();
    let g = grid_n as i64;
    let obs = observation_grid(center, epsilon, grid_n);
    // covariance depends only on the lag modulo the grid
    let lag_box = LatticeBox::new(vec![(0, g - 1); nu])?;
    let lags: Vec<f64> = lag_box
        .sites()
        .par_iter()
        .map(|k| {
            let d: Vec<f64> = k.iter().map(|&c| c as f64 / grid_n as f64).collect();
            covariance_at(w, &d)
        })
        .collect();
    let lag_index = |a: &[i64], b: &[i64]| -> usize {
        a.iter().zip(b).fold(0usize, |acc, (x, y)| acc * grid_n + (x - y).rem_euclid(g) as usize)
    };
    let zero = vec![0i64; nu];
    let n = obs.len();
    let cov = DMatrix::from_fn(n, n, |i, j| lags[lag_index(&obs[i], &obs[j])]);
    let row = DVector::from_fn(n, |i, _| lags[lag_index(&obs[i], &zero)]);
    solve_conditional(w.variance(), cov, row, jitter)
}

/// Slope of `log log(1/V)` against `log(1/epsilon)`.
pub fn fit_eta(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 4 {
        return Err(Error::InvalidParameter("fit_eta needs at least four points".into()));
    }
    if curve.windows(2).any(|p| !(p[1].0 < p[0].0)) {
        return Err(Error::InvalidParameter("epsilons must be strictly decreasing".into()));
    }
    if let Some(&(eps, v)) = curve.iter().find(|p| !(p.1 > 0.0 && p.1 < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "variance {v} at epsilon {eps} must lie in (0, 1); normalize by the unconditional variance"
        )));
    }
    let xs: Vec<f64> = curve.iter().map(|p| (1.0 / p.0).ln()).collect();
    let ys: Vec<f64> = curve.iter().map(|p| (1.0 / p.1).ln().ln()).collect();
    Ok(linear_fit(&xs, &ys).slope)
}

/// One report per `epsilon`, in input order, conditioning at the origin.
pub fn variance_sweep(
    w: &SpectralWeight,
    m: &Majorant,
    epsilons: &[f64],
    grid_n: usize,
    jitter: f64,
) -> Result<Vec<VarianceReport>> {
    let center = TorusPoint::origin(w.nu());
    epsilons
        .par_iter()
        .map(|&epsilon| {
            Ok(VarianceReport {
                epsilon,
                grid_upper: conditional_variance_grid(w, &center, epsilon, grid_n, jitter)?,
                karhunen_lower: karhunen_lower_bound(w, m, epsilon)?,
                analytic_bound: var_bound(w, m, epsilon, w.nu())?,
                cutoff: w.cutoff(),
                jitter: jitter * w.variance(),
                unconditional: w.variance(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::Cutoff;

    fn sqrt_weight(cutoff: usize) -> SpectralWeight {
        SpectralWeight::from_radial_fn(1, cutoff, |t, r| (t.sqrt()).exp() / (1.0 + (r * r) as f64)).unwrap()
    }

    #[test]
    fn k_constant_sums_lorentzian() {
        let w = sqrt_weight(20_000);
        let k = k_constant(&w, &Majorant::sqrt());
        let exact = PI / PI.tanh();
        // discarded tail 2 sum_{n > N} 1/(1+n^2) < 2/N
        assert!((k - exact).abs() < 2.0 / 20_000.0 + 1e-12, "{k} vs {exact}");
    }

    #[test]
    fn homogeneity_of_the_quotient() {
        let w = sqrt_weight(64);
        let bump = build_bump(&Majorant::sqrt().half(), 0.25, 1, None).unwrap();
        let a = karhunen_quotient(&w, &bump, 1.0);
        for c in [1e-3, -2.0, 17.0] {
            assert!((karhunen_quotient(&w, &bump, c) - a).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn analytic_bound_closed_form() {
        let w = sqrt_weight(64);
        let m = Majorant::sqrt();
        let k = k_constant(&w, &m);
        let expect = 1.0 / (E * E * 4.0 * k * 0.25 * (2.0 * E).exp());
        let got = var_bound(&w, &m, 0.5, 1).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn epsilon_hypothesis_is_enforced() {
        let w = sqrt_weight(16);
        let m = Majorant::sqrt();
        assert!(matches!(var_bound(&w, &m, 0.6, 1), Err(Error::EpsilonHypothesis { .. })));
        assert!(matches!(karhunen_lower_bound(&w, &m, 0.0), Err(Error::EpsilonHypothesis { .. })));
    }

    #[test]
    fn finite_rank_process_is_determined() {
        let w = SpectralWeight::table(vec![1.0, 1.0], 1, Cutoff::Fixed(1)).unwrap();
        let v = conditional_variance_grid(&w, &TorusPoint::origin(1), 0.25, 8, 1e-10).unwrap();
        assert!(v.abs() <= 1e-6, "{v}");
        assert!(matches!(
            conditional_variance_grid(&w, &TorusPoint::origin(1), 0.25, 8, 0.0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn no_observations_leave_the_variance() {
        let w = sqrt_weight(8);
        let v = conditional_variance_points(&w, &TorusPoint::origin(1), &[], 0.0).unwrap();
        assert_eq!(v, w.variance());
    }

    #[test]
    fn grid_path_matches_point_path() {
        let w = sqrt_weight(16);
        let c = TorusPoint::new(vec![0.3]).unwrap();
        let pts: Vec<TorusPoint> = observation_grid(&c, 0.2, 16)
            .into_iter()
            .map(|k| TorusPoint::new(vec![0.3 + k[0] as f64 / 16.0]).unwrap())
            .collect();
        let a = conditional_variance_grid(&w, &c, 0.2, 16, 1e-10).unwrap();
        let b = conditional_variance_points(&w, &c, &pts, 1e-10).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn eta_of_exact_curves() {
        let eps: Vec<f64> = (1..=6).map(|k| 2f64.powi(-k)).collect();
        let c1: Vec<(f64, f64)> = eps.iter().map(|&e| (e, (-1.0 / e).exp())).collect();
        assert!((fit_eta(&c1).unwrap() - 1.0).abs() < 0.01);
        let c2: Vec<(f64, f64)> = eps.iter().map(|&e| (e, (-2.0 * e.powf(-0.5)).exp())).collect();
        assert!((fit_eta(&c2).unwrap() - 0.5).abs() < 0.01);
        assert!(fit_eta(&[(0.5, 0.1), (0.25, 0.0), (0.125, 0.01), (0.1, 0.001)]).is_err());
    }
}
