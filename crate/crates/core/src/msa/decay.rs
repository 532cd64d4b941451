//! Exponential decay rate of eigenfunctions of a finite operator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{l1_dist, Site};
use crate::operator::tridiag::{self, TridiagLu};
use crate::operator::FiniteOperator;
use crate::stats::linear_fit;

/// Sites closer than this to the boundary of the region are left out of the fit.
pub const BOUNDARY_MARGIN: usize = 5;
/// Shell amplitudes at or below this value are left out of the fit.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// 0-based index in increasing order.
    Index(usize),
    /// Every eigenvalue in `[lo, hi]`.
    Window { lo: f64, hi: f64 },
    /// The `n` eigenvalues around the middle of the spectrum.
    MidSpectrum(usize),
    /// The `n` eigenstates whose maximum-modulus sites lie closest to the centre of the region.
    Centered(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub eigenvalue: f64,
    pub index: usize,
    pub center: Site,
    /// Minus the least-squares slope of `ln max |psi|` against the shell radius.
    pub fitted_mass: f64,
    pub residual: f64,
    /// `(radius, max |psi| on the l1 shell)` for every nonempty shell.
    pub profile: Vec<(u64, f64)>,
    pub shells_fitted: usize,
    /// Fewer than two shells were usable; `fitted_mass` is then the lower bound
    /// `ln(amp_0 / AMPLITUDE_FLOOR)` implied by the next shell falling below the floor.
    pub floor_limited: bool,
}

/// Decay report of the first selected eigenstate (the one nearest the middle of a window).
pub fn eigen_decay(h: &FiniteOperator, selector: &Selector, center: Option<&[i64]>) -> Result<DecayReport> {
    let sel = match selector {
        Selector::Window { lo, hi } => {
            let mid = 0.5 * (lo + hi);
            let ev = h.eigenvalues();
            let k = in_window(&ev, *lo, *hi)
                .min_by(|&a, &b| (ev[a] - mid).abs().total_cmp(&(ev[b] - mid).abs()))
                .ok_or(Error::NoEigenvalue)?;
            Selector::Index(k)
        }
        Selector::MidSpectrum(_) => Selector::MidSpectrum(1),
        Selector::Centered(_) => Selector::Centered(1),
        Selector::Index(k) => Selector::Index(*k),
    };
    eigen_decays(h, &sel, center)?.into_iter().next().ok_or(Error::NoEigenvalue)
}

/// Decay reports of all selected eigenstates, in increasing eigenvalue order.
pub fn eigen_decays(h: &FiniteOperator, selector: &Selector, center: Option<&[i64]>) -> Result<Vec<DecayReport>> {
    if let Some(c) = center {
        if !h.contains(c) {
            return Err(Error::InvalidParameter(format!("center {c:?} is not a site of the operator")));
        }
    }
    let ev = h.eigenvalues();
    let n = ev.len();
    let indices: Vec<usize> = match selector {
        Selector::Index(k) => {
            if *k >= n {
                return Err(Error::NoEigenvalue);
            }
            vec![*k]
        }
        Selector::Window { lo, hi } => in_window(&ev, *lo, *hi).collect(),
        Selector::MidSpectrum(count) => {
            let count = (*count).min(n);
            let start = (n - count) / 2;
            (start..start + count).collect()
        }
        Selector::Centered(_) => (0..n).collect(),
    };
    if indices.is_empty() {
        return Err(Error::NoEigenvalue);
    }
    let depth = boundary_depth(h);
    let dense = (!h.is_chain()).then(|| h.eigen_decomposition());
    let mut reports = indices
        .into_iter()
        .map(|k| {
            let psi = match &dense {
                Some((_, vecs)) => vecs.column(k).iter().copied().collect(),
                None => chain_eigenvector(h.potential(), ev[k]),
            };
            report(h, &depth, ev[k], k, &psi, center)
        })
        .collect::<Vec<_>>();
    if let Selector::Centered(count) = selector {
        let mid = region_center(h);
        reports.sort_by_key(|r| (l1_dist(&r.center, &mid), r.index));
        reports.truncate(*count);
        reports.sort_by_key(|r| r.index);
    }
    Ok(reports)
}

fn in_window(ev: &[f64], lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
    (0..ev.len()).filter(move |&k| ev[k] >= lo && ev[k] <= hi)
}

fn region_center(h: &FiniteOperator) -> Site {
    let d = h.dim();
    (0..d)
        .map(|a| {
            let lo = h.sites().iter().map(|x| x[a]).min().unwrap_or(0);
            let hi = h.sites().iter().map(|x| x[a]).max().unwrap_or(0);
            (lo + hi).div_euclid(2)
        })
        .collect()
}

/// Graph distance of every site to the nearest site with a neighbour outside the region.
fn boundary_depth(h: &FiniteOperator) -> Vec<usize> {
    let n = h.len();
    let mut adj = vec![Vec::new(); n];
    for (i, j) in h.edges() {
        adj[i].push(j);
        adj[j].push(i);
    }
    let full = 2 * h.dim();
    let mut depth = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if adj[i].len() < full {
            depth[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if depth[j] == usize::MAX {
                depth[j] = depth[i] + 1;
                queue.push_back(j);
            }
        }
    }
    depth
}

/// Unit eigenvector of a chain by inverse iteration at a bisection eigenvalue.
fn chain_eigenvector(diag: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let scale = diag.iter().fold(1.0f64, |m, a| m.max(a.abs()));
    let mut shift = lambda;
    let lu = loop {
        if let Some(lu) = TridiagLu::new(diag, shift) {
            break lu;
        }
        shift += 4.0 * f64::EPSILON * scale;
    };
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_749_895).fract()).collect();
    for _ in 0..3 {
        lu.solve_in_place(&mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    debug_assert!(tridiag::spectral_distance(diag, lambda) < 1e-6 * scale);
    v
}

fn report(h: &FiniteOperator, depth: &[usize], eigenvalue: f64, index: usize, psi: &[f64], center: Option<&[i64]>) -> DecayReport {
    let sites = h.sites();
    let center: Site = match center {
        Some(c) => c.to_vec(),
        None => {
            let k = (0..psi.len()).max_by(|&a, &b| psi[a].abs().total_cmp(&psi[b].abs())).expect("nonempty");
            sites[k].clone()
        }
    };
    let radius = sites.iter().map(|x| l1_dist(x, &center) as usize).max().unwrap_or(0);
    let mut profile = vec![f64::NAN; radius + 1];
    let mut interior = vec![0.0f64; radius + 1];
    let mut has_interior = vec![false; radius + 1];
    for (i, x) in sites.iter().enumerate() {
        let r = l1_dist(x, &center) as usize;
        let a = psi[i].abs();
        profile[r] = if profile[r].is_nan() { a } else { profile[r].max(a) };
        if depth[i] >= BOUNDARY_MARGIN {
            interior[r] = interior[r].max(a);
            has_interior[r] = true;
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..=radius)
        .filter(|&r| has_interior[r] && interior[r] > AMPLITUDE_FLOOR)
        .map(|r| (r as f64, interior[r].ln()))
        .unzip();
    let (fitted_mass, residual, floor_limited) = if xs.len() >= 2 {
        let fit = linear_fit(&xs, &ys);
        (-fit.slope, fit.rms_residual, false)
    } else {
        let amp0 = ys.first().map_or(AMPLITUDE_FLOOR, |y| y.exp());
        ((amp0 / AMPLITUDE_FLOOR).ln(), 0.0, true)
    };
    DecayReport {
        eigenvalue,
        index,
        center,
        fitted_mass,
        residual,
        profile: profile.into_iter().enumerate().filter(|(_, a)| !a.is_nan()).map(|(r, a)| (r as u64, a)).collect(),
        shells_fitted: xs.len(),
        floor_limited,
    }
}
