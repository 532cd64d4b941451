//! Monte-Carlo frequency of simultaneous resonances in disjoint slabs.
//!
//! The box `[-L, L]^d` is cut along the first axis into `k_max` slabs `s_1, ..., s_{k_max}`.
//! For a hull seed the event of order `k` is that a single energy `E` puts an eigenvalue of
//! every `H_{s_1}, ..., H_{s_k}` within `delta = g exp(-L^r)` of `E`, i.e. `||G_E[H_{s_i}]||`
//! exceeds `exp(L^r) / g` for each of them. The supremum over `E` is taken exactly from the
//! merged spectra, so the event of order `k + 1` implies the one of order `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{sample_hull, SpectralWeight};
use crate::lattice::LatticeBox;
use crate::operator::{assemble, FiniteOperator};
use crate::stats::linear_fit;
use crate::torus::{FrequencyMatrix, TorusPoint};

#[derive(Clone, Debug)]
pub struct CensusConfig {
    pub weight: SpectralWeight,
    pub alpha: FrequencyMatrix,
    pub omega: TorusPoint,
    pub g: f64,
    /// Half-width of the box.
    pub l: u64,
    pub r: f64,
    /// Largest number of simultaneous resonances examined.
    pub k_max: usize,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub l: u64,
    pub g: f64,
    pub delta: f64,
    pub slabs: Vec<LatticeBox>,
    pub samples: usize,
    /// Seeds for which the event of order `k` occurs, `k = 1..=k_max`.
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
    /// Least-squares slope of `ln(frequency)` against `k` over positive frequencies.
    pub log_slope: Option<f64>,
}

impl CensusReport {
    pub fn is_monotone(&self) -> bool {
        self.counts.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Splits `[-l, l]^d` along the first axis into `k` slabs of nearly equal width.
pub fn slabs(d: usize, l: u64, k: usize) -> Result<Vec<LatticeBox>> {
    let width = 2 * l + 1;
    if k == 0 || k as u64 > width {
        return Err(Error::InvalidParameter(format!("cannot cut {width} sites into {k} slabs")));
    }
    let l = l as i64;
    let mut out = Vec::with_capacity(k);
    let mut start = -l;
    for i in 0..k as u64 {
        let size = (width / k as u64 + u64::from(i < width % k as u64)) as i64;
        let mut iv = vec![(-l, l); d];
        iv[0] = (start, start + size - 1);
        out.push(LatticeBox::new(iv)?);
        start += size;
    }
    Ok(out)
}

/// Largest `k` such that eigenvalues from slabs `1..=k` fit in an interval shorter
/// than `2 delta`. `spectra[i]` must be sorted.
pub fn simultaneous_order(spectra: &[Vec<f64>], delta: f64) -> usize {
    if !(delta > 0.0) {
        return 0;
    }
    let mut order = 0;
    for k in 1..=spectra.len() {
        if min_spread(&spectra[..k]) < 2.0 * delta {
            order = k;
        } else {
            break;
        }
    }
    order
}

/// Smallest `max - min` over choices of one eigenvalue from every spectrum.
fn min_spread(spectra: &[Vec<f64>]) -> f64 {
    let mut merged: Vec<(f64, usize)> =
        spectra.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&e| (e, i))).collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = spectra.len();
    let mut counts = vec![0usize; k];
    let mut covered = 0;
    let mut lo = 0;
    let mut best = f64::INFINITY;
    for hi in 0..merged.len() {
        let label = merged[hi].1;
        if counts[label] == 0 {
            covered += 1;
        }
        counts[label] += 1;
        while covered == k {
            best = best.min(merged[hi].0 - merged[lo].0);
            let first = merged[lo].1;
            counts[first] -= 1;
            if counts[first] == 0 {
                covered -= 1;
            }
            lo += 1;
        }
    }
    best
}

pub fn resonance_census(cfg: &CensusConfig) -> Result<CensusReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidParameter("census needs at least one seed".into()));
    }
    if !(cfg.r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be positive, got {}", cfg.r)));
    }
    let pieces = slabs(cfg.alpha.d(), cfg.l, cfg.k_max)?;
    let delta = cfg.g.abs() * (-(cfg.l as f64).powf(cfg.r)).exp();
    let orders = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let hull = sample_hull(&cfg.weight, seed);
            let spectra = pieces
                .iter()
                .map(|s| Ok(assemble(s, &cfg.omega, &cfg.alpha, &hull, cfg.g)?.eigenvalues()))
                .collect::<Result<Vec<_>>>()?;
            Ok(simultaneous_order(&spectra, delta))
        })
        .collect::<Result<Vec<usize>>>()?;
    let counts: Vec<usize> = (1..=cfg.k_max).map(|k| orders.iter().filter(|&&o| o >= k).count()).collect();
    let n = cfg.seeds.len() as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let (ks, logs): (Vec<f64>, Vec<f64>) = frequencies
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0.0)
        .map(|(i, f)| ((i + 1) as f64, f.ln()))
        .unzip();
    let log_slope = (ks.len() >= 2).then(|| linear_fit(&ks, &logs).slope);
    Ok(CensusReport { l: cfg.l, g: cfg.g, delta, slabs: pieces, samples: cfg.seeds.len(), counts, frequencies, log_slope })
}

/// Operator on one slab, exposed for inspection of individual census samples.
pub fn slab_operator(cfg: &CensusConfig, seed: u64, slab: &LatticeBox) -> Result<FiniteOperator> {
    assemble(slab, &cfg.omega, &cfg.alpha, &sample_hull(&cfg.weight, seed), cfg.g)
}
