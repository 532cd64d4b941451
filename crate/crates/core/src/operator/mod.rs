//! Restrictions `H_B` of `H = g v(T^x omega) + Delta` to finite regions, their
//! resolvents, and the regularity and resonance predicates built on them.

pub mod predicates;
pub mod tridiag;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::HullSample;
use crate::lattice::{neighbours, LatticeBox, Region, Site};
use crate::torus::{shift, FrequencyMatrix, TorusPoint};

pub use predicates::{
    combes_thomas_check, is_regular, is_resonant, resolvent_identity_residual, CombesThomasReport,
    RegularityVerdict, ResonanceVerdict, SubsetFamily, WorstPair,
};

/// Default bound on the number of sites of an assembled operator.
pub const DEFAULT_SITE_LIMIT: usize = 20_000;
/// Green's function queries fail above this condition estimate.
pub const CONDITION_LIMIT: f64 = 1e14;

/// `H` restricted to a finite set of sites; the hopping is the unit nearest-neighbour
/// Laplacian and the diagonal holds `g v(T^x omega)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteOperator {
    dim: usize,
    sites: Vec<Site>,
    potential: Vec<f64>,
    coupling: f64,
    #[serde(skip)]
    index: HashMap<Site, usize>,
}

/// Builds `H_B` for `B = region`, evaluating the hull at `T^x omega`.
pub fn assemble<R: Region + ?Sized>(
    region: &R,
    omega: &TorusPoint,
    alpha: &FrequencyMatrix,
    hull: &HullSample,
    g: f64,
) -> Result<FiniteOperator> {
    assemble_with_limit(region, omega, alpha, hull, g, DEFAULT_SITE_LIMIT)
}

pub fn assemble_with_limit<R: Region + ?Sized>(
    region: &R,
    omega: &TorusPoint,
    alpha: &FrequencyMatrix,
    hull: &HullSample,
    g: f64,
    limit: usize,
) -> Result<FiniteOperator> {
    if region.dim() != alpha.d() {
        return Err(Error::DimensionMismatch { expected: alpha.d(), found: region.dim() });
    }
    if hull.nu() != alpha.nu() {
        return Err(Error::DimensionMismatch { expected: alpha.nu(), found: hull.nu() });
    }
    let sites = region.sites();
    if sites.len() > limit {
        return Err(Error::BoxTooLarge { sites: sites.len(), limit });
    }
    let potential = sites
        .iter()
        .map(|x| Ok(g * hull.eval(&shift(omega, alpha, x)?)?))
        .collect::<Result<Vec<f64>>>()?;
    FiniteOperator::from_parts(region.dim(), sites, potential, g)
}

/// Diagonal values `g v(T^x omega)` over a box, lexicographic.
pub fn potential_on_box(
    b: &LatticeBox,
    omega: &TorusPoint,
    alpha: &FrequencyMatrix,
    hull: &HullSample,
    g: f64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    b.sites().par_iter().map(|x| Ok(g * hull.eval(&shift(omega, alpha, x)?)?)).collect()
}

impl FiniteOperator {
    /// Operator on `region` with the given diagonal (already multiplied by the coupling).
    pub fn from_potential<R: Region + ?Sized>(region: &R, potential: Vec<f64>, coupling: f64) -> Result<Self> {
        let sites = region.sites();
        if sites.len() != potential.len() {
            return Err(Error::DimensionMismatch { expected: sites.len(), found: potential.len() });
        }
        Self::from_parts(region.dim(), sites, potential, coupling)
    }

    fn from_parts(dim: usize, sites: Vec<Site>, potential: Vec<f64>, coupling: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let index = sites.iter().enumerate().map(|(i, x)| (x.clone(), i)).collect();
        Ok(Self { dim, sites, potential, coupling, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.index.contains_key(x)
    }

    /// `H_s` for `s` contained in the current sites.
    pub fn restrict<R: Region + ?Sized>(&self, r: &R) -> Result<FiniteOperator> {
        let sites = r.sites();
        let potential = sites
            .iter()
            .map(|x| {
                self.index_of(x).map(|i| self.potential[i]).ok_or_else(|| {
                    Error::InvalidParameter(format!("site {x:?} lies outside the operator's region"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::from_parts(self.dim, sites, potential, self.coupling)
    }

    /// Sites form a single run of consecutive integers (`d = 1`).
    pub fn is_chain(&self) -> bool {
        self.dim == 1 && self.sites.windows(2).all(|w| w[1][0] == w[0][0] + 1)
    }

    /// Hopping pairs `(i, j)`, `i < j`, between sites at graph distance one.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, x) in self.sites.iter().enumerate() {
            for y in neighbours(x) {
                if let Some(j) = self.index_of(&y) {
                    if i < j {
                        out.push((i, j));
                    }
                }
            }
        }
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&DVector::from_vec(self.potential.clone()));
        for (i, j) in self.edges() {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        m
    }

    /// Gershgorin interval containing the spectrum.
    pub fn spectral_hull(&self) -> (f64, f64) {
        let lo = self.potential.iter().fold(f64::INFINITY, |m, &a| m.min(a));
        let hi = self.potential.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a));
        let off = if self.len() > 1 { 2.0 * self.dim as f64 } else { 0.0 };
        (lo - off, hi + off)
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.is_chain() {
            return tridiag::eigenvalues(&self.potential);
        }
        let mut ev: Vec<f64> = self.dense().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Eigenvalues in increasing order with unit eigenvectors as columns.
    pub fn eigen_decomposition(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.dense());
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.len(), self.len(), |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// `dist(E, sigma(H))`.
    pub fn spectral_distance(&self, energy: f64) -> f64 {
        if self.is_chain() {
            return tridiag::spectral_distance(&self.potential, energy);
        }
        self.eigenvalues().iter().fold(f64::INFINITY, |m, l| m.min((l - energy).abs()))
    }

    /// True iff `H` has an eigenvalue in `(E - delta, E + delta)`.
    pub fn has_eigenvalue_near(&self, energy: f64, delta: f64) -> bool {
        if self.is_chain() {
            return tridiag::has_eigenvalue_near(&self.potential, energy, delta);
        }
        self.spectral_distance(energy) < delta
    }
}

/// `||(H - E)^-1|| = 1 / dist(E, sigma(H))`.
pub fn resolvent_norm(h: &FiniteOperator, energy: f64) -> f64 {
    1.0 / h.spectral_distance(energy)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenQuery {
    pub energy: f64,
    pub pairs: Vec<(Site, Site)>,
    pub values: Vec<f64>,
    /// `||H - E||_1` times the largest column 1-norm of the inverse among the solved columns.
    pub condition_estimate: f64,
}

enum Factor {
    Chain(tridiag::TridiagLu),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Columns of `(H - E)^-1`, factoring once.
pub struct Resolvent<'a> {
    h: &'a FiniteOperator,
    energy: f64,
    factor: Factor,
    cache: HashMap<usize, Vec<f64>>,
}

impl<'a> Resolvent<'a> {
    pub fn new(h: &'a FiniteOperator, energy: f64) -> Result<Self> {
        let singular = || Error::ResonantEnergy { energy, condition: f64::INFINITY };
        let factor = if h.is_chain() {
            Factor::Chain(tridiag::TridiagLu::new(&h.potential, energy).ok_or_else(singular)?)
        } else {
            let n = h.len();
            let m = h.dense() - DMatrix::identity(n, n) * energy;
            let lu = m.lu();
            if !lu.is_invertible() {
                return Err(singular());
            }
            Factor::Dense(lu)
        };
        Ok(Self { h, energy, factor, cache: HashMap::new() })
    }

    pub fn column(&mut self, j: usize) -> &[f64] {
        let factor = &self.factor;
        let n = self.h.len();
        self.cache.entry(j).or_insert_with(|| match factor {
            Factor::Chain(lu) => lu.column(j),
            Factor::Dense(lu) => {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                lu.solve(&e).expect("invertible").iter().copied().collect()
            }
        })
    }

    /// `G(x, y)`.
    pub fn entry(&mut self, x: &[i64], y: &[i64]) -> Result<f64> {
        let i = self.h.index_of(x).ok_or_else(|| Error::InvalidParameter(format!("site {x:?} not in region")))?;
        let j = self.h.index_of(y).ok_or_else(|| Error::InvalidParameter(format!("site {y:?} not in region")))?;
        Ok(self.column(j)[i])
    }

    pub fn condition_estimate(&self) -> f64 {
        let norm = self
            .h
            .potential
            .iter()
            .map(|a| (a - self.energy).abs() + 2.0 * self.h.dim as f64)
            .fold(0.0, f64::max);
        let inv = self.cache.values().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        norm * inv
    }

    pub fn check(&self) -> Result<()> {
        let cond = self.condition_estimate();
        if !cond.is_finite() || cond > CONDITION_LIMIT {
            return Err(Error::ResonantEnergy { energy: self.energy, condition: cond });
        }
        Ok(())
    }
}

/// Requested entries of `G_E[H] = (H - E)^-1`.
pub fn green(h: &FiniteOperator, energy: f64, pairs: &[(Site, Site)]) -> Result<GreenQuery> {
    let mut r = Resolvent::new(h, energy)?;
    let values = pairs.iter().map(|(x, y)| r.entry(x, y)).collect::<Result<Vec<f64>>>()?;
    r.check()?;
    Ok(GreenQuery { energy, pairs: pairs.to_vec(), values, condition_estimate: r.condition_estimate() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::{Cutoff, ModeCoeff, SpectralWeight};

    fn free(b: &LatticeBox) -> FiniteOperator {
        FiniteOperator::from_potential(b, vec![0.0; b.cardinality()], 0.0).unwrap()
    }

    #[test]
    fn small_free_spectra() {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        let two = free(&LatticeBox::new(vec![(0, 1)]).unwrap());
        assert!(close(&two.eigenvalues(), &[-1.0, 1.0]));
        let three = free(&LatticeBox::new(vec![(0, 2)]).unwrap());
        assert!(close(&three.eigenvalues(), &[-2f64.sqrt(), 0.0, 2f64.sqrt()]));
        let square = free(&LatticeBox::new(vec![(0, 1), (0, 1)]).unwrap());
        assert!(close(&square.eigenvalues(), &[-2.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn assembled_matrix_structure() {
        let w = SpectralWeight::table(vec![1.0, 1.0], 1, Cutoff::Fixed(1)).unwrap();
        let hull = HullSample::with_coefficients(&w, vec![ModeCoeff { n: vec![1], g: 1.0, h: 0.0 }]).unwrap();
        let alpha = FrequencyMatrix::new(1, 2, vec![0.25, 0.5]).unwrap();
        let b = LatticeBox::new(vec![(0, 2), (-1, 1)]).unwrap();
        let h = assemble(&b, &TorusPoint::origin(1), &alpha, &hull, 3.0).unwrap();
        let m = h.dense();
        assert_eq!(m, m.transpose());
        for (i, x) in h.sites().iter().enumerate() {
            let want = 3.0 * (2.0 * std::f64::consts::PI * (0.25 * x[0] as f64 + 0.5 * x[1] as f64)).cos();
            assert!((m[(i, i)] - want).abs() < 1e-12);
            for (j, y) in h.sites().iter().enumerate() {
                if i != j {
                    let adjacent = crate::lattice::l1_dist(x, y) == 1;
                    assert_eq!(m[(i, j)], if adjacent { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn size_limit() {
        let w = SpectralWeight::table(vec![1.0], 1, Cutoff::Fixed(0)).unwrap();
        let hull = HullSample::with_coefficients(&w, vec![]).unwrap();
        let alpha = FrequencyMatrix::golden_mean();
        let b = LatticeBox::new(vec![(0, 99)]).unwrap();
        let r = assemble_with_limit(&b, &TorusPoint::origin(1), &alpha, &hull, 1.0, 50);
        assert_eq!(r, Err(Error::BoxTooLarge { sites: 100, limit: 50 }));
    }

    #[test]
    fn single_site_green() {
        let b = LatticeBox::new(vec![(4, 4)]).unwrap();
        let h = FiniteOperator::from_potential(&b, vec![2.5], 1.0).unwrap();
        let q = green(&h, 0.5, &[(vec![4], vec![4])]).unwrap();
        assert!((q.values[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eigenvalue_energy_is_rejected() {
        let h = free(&LatticeBox::new(vec![(0, 2)]).unwrap());
        assert!(matches!(green(&h, 0.0, &[(vec![0], vec![2])]), Err(Error::ResonantEnergy { .. })));
    }

    #[test]
    fn restriction_keeps_potential() {
        let b = LatticeBox::new(vec![(0, 4)]).unwrap();
        let h = FiniteOperator::from_potential(&b, vec![0.0, 1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        let s = h.restrict(&LatticeBox::new(vec![(2, 3)]).unwrap()).unwrap();
        assert_eq!(s.potential(), &[2.0, 3.0]);
        assert!(h.restrict(&LatticeBox::new(vec![(3, 5)]).unwrap()).is_err());
    }
}
