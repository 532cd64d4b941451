use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tridiag, FiniteOperator, Resolvent};
use crate::error::{Error, Result};
use crate::lattice::{
    boundary, box_inner_boundary, enumerate_rectangles, l1_dist, BoxDifference, LRectangle, LatticeBox, Region,
    Site, Strip,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub x: Site,
    pub y: Site,
    pub g_abs: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub rect: LRectangle,
    pub energy: f64,
    pub m: f64,
    pub b: f64,
    pub is_regular: bool,
    /// `E` hit the spectrum of `H_R` (the resolvent could not be formed).
    pub resonant: bool,
    /// Pair with the largest `|G|` among the tested ones.
    pub worst: Option<WorstPair>,
    pub pairs_tested: usize,
}

fn check_mb(m: f64, b: f64) -> Result<()> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidParameter(format!("b must lie in (0, 1), got {b}")));
    }
    Ok(())
}

/// `exp(-m (L + L^b))`.
pub fn regularity_threshold(scale: u64, m: f64, b: f64) -> f64 {
    let l = scale as f64;
    (-m * (l + l.powf(b))).exp()
}

fn restricted(h: &FiniteOperator, r: &LatticeBox) -> Result<FiniteOperator> {
    if h.len() == r.cardinality() && h.sites().first() == Some(&r.lower()) && h.sites().last() == Some(&r.upper())
    {
        Ok(h.clone())
    } else {
        h.restrict(r)
    }
}

/// `|G(x, y)|` over inner-boundary pairs at distance at least `L`; `None` when `E`
/// lies in the spectrum.
fn boundary_pairs(hr: &FiniteOperator, r: &LRectangle, energy: f64) -> Option<Vec<(Site, Site, f64)>> {
    let scale = r.scale() as i64;
    if hr.is_chain() {
        // the only pair is the two endpoints, where |G| = 1 / |det(H - E)|
        let log_det = tridiag::log_abs_det(hr.potential(), energy);
        if log_det == f64::NEG_INFINITY {
            return None;
        }
        let g = (-log_det).exp();
        let (a, z) = (r.rect().lower(), r.rect().upper());
        return Some(vec![(a.clone(), z.clone(), g), (z, a, g)]);
    }
    let inner = box_inner_boundary(r.rect());
    let mut res = Resolvent::new(hr, energy).ok()?;
    let mut out = Vec::new();
    for y in &inner {
        for x in &inner {
            if l1_dist(x, y) >= scale {
                out.push((x.clone(), y.clone(), res.entry(x, y).ok()?.abs()));
            }
        }
    }
    res.check().ok()?;
    Some(out)
}

/// Tests `|G_E[H_R](x, y)| <= exp(-m (L + L^b))` for all inner-boundary pairs of `R`
/// at distance at least `L`. `h` must contain `R`.
pub fn is_regular(h: &FiniteOperator, r: &LRectangle, energy: f64, m: f64, b: f64) -> Result<RegularityVerdict> {
    check_mb(m, b)?;
    let hr = restricted(h, r.rect())?;
    let threshold = regularity_threshold(r.scale(), m, b);
    let mut verdict = RegularityVerdict {
        rect: r.clone(),
        energy,
        m,
        b,
        is_regular: false,
        resonant: false,
        worst: None,
        pairs_tested: 0,
    };
    match boundary_pairs(&hr, r, energy) {
        None => verdict.resonant = true,
        Some(pairs) => {
            verdict.pairs_tested = pairs.len();
            verdict.is_regular = pairs.iter().all(|p| p.2 <= threshold);
            verdict.worst = pairs
                .into_iter()
                .max_by(|a, b| a.2.total_cmp(&b.2))
                .map(|(x, y, g_abs)| WorstPair { x, y, g_abs, threshold });
        }
    }
    Ok(verdict)
}

/// Subsets `s` of the box on which `||G_E[H_s]||` is examined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetFamily {
    /// Every subinterval of a one-dimensional box. A box difference in `d = 1` is a union
    /// of at most two intervals and `H_s` is the direct sum over them, so this decides
    /// resonance over all boxes and box differences.
    Exhaustive1d,
    /// The box, its `L`-rectangles, the annuli left by strips of width `L + 1`, and
    /// `random` random box differences.
    Sampled { random: usize, seed: u64 },
    Explicit(Vec<BoxDifference>),
}

impl Default for SubsetFamily {
    fn default() -> Self {
        SubsetFamily::Sampled { random: 32, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceVerdict {
    pub resonant: bool,
    /// `exp(m L^b / (16 J))`; resonance means a resolvent norm above it.
    pub threshold: f64,
    pub witness: Option<BoxDifference>,
    pub witness_norm: Option<f64>,
    pub subsets_tested: usize,
    /// Nonresonance followed from the Gershgorin interval of `H_B` alone.
    pub gershgorin_certified: bool,
}

/// `exp(m L^b / (16 J))`.
pub fn resonance_threshold(m: f64, b: f64, scale: u64, j: u32) -> f64 {
    (m * (scale as f64).powf(b) / (16.0 * j as f64)).exp()
}

fn bounding_box(h: &FiniteOperator) -> Result<LatticeBox> {
    let d = h.dim();
    let mut iv = vec![(i64::MAX, i64::MIN); d];
    for x in h.sites() {
        for (k, &c) in x.iter().enumerate() {
            iv[k].0 = iv[k].0.min(c);
            iv[k].1 = iv[k].1.max(c);
        }
    }
    let b = LatticeBox::new(iv)?;
    if b.cardinality() != h.len() {
        return Err(Error::InvalidParameter("resonance tests need an operator on a box".into()));
    }
    Ok(b)
}

/// Maximal runs of consecutive sites of a one-dimensional region.
fn runs_1d(sites: &[Site]) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::new();
    for x in sites {
        match out.last_mut() {
            Some(run) if run.1 + 1 == x[0] => run.1 = x[0],
            _ => out.push((x[0], x[0])),
        }
    }
    out
}

fn subset_near(h: &FiniteOperator, s: &BoxDifference, energy: f64, delta: f64) -> Result<Option<bool>> {
    let sites = s.sites();
    if sites.is_empty() {
        return Ok(None);
    }
    if h.dim() == 1 {
        for (a, z) in runs_1d(&sites) {
            let i = h.index_of(&[a]).ok_or_else(|| Error::InvalidParameter(format!("site {a} outside the box")))?;
            let diag = &h.potential()[i..=i + (z - a) as usize];
            if tridiag::has_eigenvalue_near(diag, energy, delta) {
                return Ok(Some(true));
            }
        }
        return Ok(Some(false));
    }
    Ok(Some(h.restrict(s)?.has_eigenvalue_near(energy, delta)))
}

fn sampled_family(b: &LatticeBox, scale: u64, random: usize, seed: u64) -> Result<Vec<BoxDifference>> {
    let mut out = vec![BoxDifference::new(b.clone(), None)?];
    for r in enumerate_rectangles(b, scale, 1)?.rects {
        if r.rect() != b {
            out.push(BoxDifference::new(r.rect().clone(), None)?);
        }
    }
    for axis in 0..b.dim() {
        let (lo, hi) = b.intervals()[axis];
        let width = scale + 1;
        if (hi - lo + 1) as u64 <= width {
            continue;
        }
        for start in lo..=(hi - width as i64 + 1) {
            out.push(Strip::new(b, axis, start, width)?.complement());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |lo: i64, hi: i64| {
        let a = rng.gen_range(lo..=hi);
        let z = rng.gen_range(lo..=hi);
        (a.min(z), a.max(z))
    };
    for _ in 0..random {
        let outer = LatticeBox::new(b.intervals().iter().map(|&(lo, hi)| pick(lo, hi)).collect())?;
        let inner = LatticeBox::new(outer.intervals().iter().map(|&(lo, hi)| pick(lo, hi)).collect())?;
        out.push(BoxDifference::new(outer, Some(inner))?);
    }
    Ok(out)
}

/// Looks for `s` in the family with `||G_E[H_s]|| > exp(m L^b / (16 J))`.
pub fn is_resonant(
    h: &FiniteOperator,
    energy: f64,
    m: f64,
    b: f64,
    scale: u64,
    j: u32,
    family: &SubsetFamily,
) -> Result<ResonanceVerdict> {
    check_mb(m, b)?;
    if j == 0 {
        return Err(Error::InvalidParameter("J must be positive".into()));
    }
    let threshold = resonance_threshold(m, b, scale, j);
    let delta = 1.0 / threshold;
    let mut verdict = ResonanceVerdict {
        resonant: false,
        threshold,
        witness: None,
        witness_norm: None,
        subsets_tested: 0,
        gershgorin_certified: false,
    };
    let (lo, hi) = h.spectral_hull();
    if energy <= lo - delta || energy >= hi + delta {
        verdict.gershgorin_certified = true;
        return Ok(verdict);
    }
    let bx = bounding_box(h)?;
    match family {
        SubsetFamily::Exhaustive1d => {
            if h.dim() != 1 {
                return Err(Error::InvalidParameter("exhaustive interval family needs d = 1".into()));
            }
            if let Some((a, z, tested)) = first_resonant_interval(h.potential(), energy, delta) {
                let lo = bx.lower()[0];
                let s = LatticeBox::new(vec![(lo + a as i64, lo + z as i64)])?;
                verdict.subsets_tested = tested;
                verdict.witness_norm = Some(1.0 / tridiag::spectral_distance(&h.potential()[a..=z], energy));
                verdict.witness = Some(BoxDifference::new(s, None)?);
                verdict.resonant = true;
            } else {
                let n = h.len();
                verdict.subsets_tested = n * (n + 1) / 2;
            }
        }
        SubsetFamily::Sampled { random, seed } => {
            let fam = sampled_family(&bx, scale, *random, *seed)?;
            scan_family(h, &fam, energy, delta, &mut verdict)?;
        }
        SubsetFamily::Explicit(fam) => {
            for s in fam {
                if !s.sites().iter().all(|x| h.contains(x)) {
                    return Err(Error::InvalidParameter("family member leaves the box".into()));
                }
            }
            scan_family(h, fam, energy, delta, &mut verdict)?;
        }
    }
    Ok(verdict)
}

fn scan_family(
    h: &FiniteOperator,
    fam: &[BoxDifference],
    energy: f64,
    delta: f64,
    verdict: &mut ResonanceVerdict,
) -> Result<()> {
    for s in fam {
        match subset_near(h, s, energy, delta)? {
            None => continue,
            Some(hit) => {
                verdict.subsets_tested += 1;
                if hit {
                    let hs = h.restrict(s)?;
                    verdict.resonant = true;
                    verdict.witness_norm = Some(1.0 / hs.spectral_distance(energy));
                    verdict.witness = Some(s.clone());
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

/// First subinterval `[a, z]` (index range, smallest `a`, then smallest `z`) with an
/// eigenvalue in `(E - delta, E + delta)`, and the number of intervals examined.
pub fn first_resonant_interval(diag: &[f64], energy: f64, delta: f64) -> Option<(usize, usize, usize)> {
    let mut tested = 0;
    for a in 0..diag.len() {
        if let Some(z) = shortest_resonant_from(diag, a, diag.len() - 1, energy, delta) {
            return Some((a, z, tested + (z - a + 1)));
        }
        tested += diag.len() - a;
    }
    None
}

/// Smallest `z` in `[a, z_max]` such that `diag[a..=z]` has an eigenvalue within
/// `delta` of `E`, by incremental Sturm sequences at `E -/+ delta`.
pub fn shortest_resonant_from(diag: &[f64], a: usize, z_max: usize, energy: f64, delta: f64) -> Option<usize> {
    let floor = f64::MIN_POSITIVE.max(1e-300);
    let (lo, hi) = (energy - delta, energy + delta);
    let (mut p_lo, mut p_hi) = (1.0f64, 1.0f64);
    let (mut c_lo, mut c_hi) = (0usize, 0usize);
    for z in a..=z_max {
        let first = z == a;
        let mut q_lo = diag[z] - lo - if first { 0.0 } else { 1.0 / p_lo };
        let mut q_hi = diag[z] - hi - if first { 0.0 } else { 1.0 / p_hi };
        // an eigenvalue exactly at E - delta counts as outside, one at E + delta too
        if q_lo.abs() < floor {
            q_lo = -floor;
        }
        if q_hi.abs() < floor {
            q_hi = floor;
        }
        if q_lo < 0.0 {
            c_lo += 1;
        }
        if q_hi < 0.0 {
            c_hi += 1;
        }
        p_lo = q_lo;
        p_hi = q_hi;
        if c_hi > c_lo {
            return Some(z);
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombesThomasReport {
    pub verdict: RegularityVerdict,
    /// `dist(E, sigma(H_R))`.
    pub distance: f64,
    pub precondition_met: bool,
    /// Every tested pair obeys `|G(x,y)| <= (2/dist) exp(-mu |x-y|)`, `mu = ln(1 + dist/(4d))`.
    pub bound_holds: bool,
    /// The bound alone already certifies regularity.
    pub bound_implies_regular: bool,
}

/// Measures `dist(E, sigma(H_R))`, checks the Combes-Thomas decay estimate on the tested
/// pairs and computes the regularity verdict directly.
pub fn combes_thomas_check(
    h: &FiniteOperator,
    r: &LRectangle,
    energy: f64,
    m: f64,
    b: f64,
    min_distance: f64,
) -> Result<CombesThomasReport> {
    check_mb(m, b)?;
    let hr = restricted(h, r.rect())?;
    let distance = hr.spectral_distance(energy);
    let verdict = is_regular(&hr, r, energy, m, b)?;
    let d = hr.dim() as f64;
    let mu = (1.0 + distance / (4.0 * d)).ln();
    let bound = |k: i64| 2.0 / distance * (-mu * k as f64).exp();
    let pairs = boundary_pairs(&hr, r, energy).unwrap_or_default();
    let bound_holds = distance > 0.0 && pairs.iter().all(|(x, y, g)| *g <= bound(l1_dist(x, y)) * (1.0 + 1e-9));
    let threshold = regularity_threshold(r.scale(), m, b);
    Ok(CombesThomasReport {
        verdict,
        distance,
        precondition_met: distance >= min_distance,
        bound_holds,
        bound_implies_regular: distance > 0.0 && bound(r.scale() as i64) <= threshold,
    })
}

/// Relative mismatch in
/// `G_B(x,y) = G_s(x,y) - sum_{(u,u') in boundary(s), u' in B} G_s(x,u) G_B(u',y)`
/// for `x, y` in `s`, where `s` is contained in the region of `h`.
pub fn resolvent_identity_residual<R: Region + ?Sized>(
    h: &FiniteOperator,
    s: &R,
    energy: f64,
    x: &[i64],
    y: &[i64],
) -> Result<f64> {
    if !(s.contains(x) && s.contains(y)) {
        return Err(Error::InvalidParameter("x and y must lie in s".into()));
    }
    let hs = h.restrict(s)?;
    let mut g_big = Resolvent::new(h, energy)?;
    let mut g_small = Resolvent::new(&hs, energy)?;
    let lhs = g_big.entry(x, y)?;
    let mut rhs = g_small.entry(x, y)?;
    for (u, v) in boundary(s, None)?.pairs {
        if h.contains(&v) {
            rhs -= g_small.entry(x, &u)? * g_big.entry(&v, y)?;
        }
    }
    Ok((lhs - rhs).abs() / lhs.abs().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(diag: Vec<f64>) -> FiniteOperator {
        let b = LatticeBox::new(vec![(0, diag.len() as i64 - 1)]).unwrap();
        FiniteOperator::from_potential(&b, diag, 1.0).unwrap()
    }

    #[test]
    fn free_chain_regularity() {
        let h = chain(vec![0.0; 11]);
        let r = LRectangle::at(&[0], 10, 0).unwrap();
        let v = is_regular(&h, &r, 5.0, 1.0, 0.5).unwrap();
        assert!(v.is_regular);
        let w = v.worst.unwrap();
        assert!(w.g_abs < (-17.0f64).exp() * 1.2 && w.g_abs > (-17.5f64).exp());
        assert!(!is_regular(&h, &r, 0.0, 1.0, 0.5).unwrap().is_regular);
        // 0 is an eigenvalue of the 11-site path
        assert!(is_regular(&h, &r, 0.0, 1.0, 0.5).unwrap().resonant);
        assert!(!is_regular(&h, &r, 0.3, 1.0, 0.5).unwrap().is_regular);
    }

    #[test]
    fn chain_path_matches_dense_path() {
        let b = LatticeBox::new(vec![(0, 7), (0, 0)]).unwrap();
        let diag: Vec<f64> = (0..8).map(|k| (k as f64 * 1.3).sin() * 3.0).collect();
        let h2 = FiniteOperator::from_potential(&b, diag.clone(), 1.0).unwrap();
        let h1 = chain(diag);
        for e in [-4.5, 0.25, 3.9] {
            let r1 = LRectangle::at(&[0], 7, 0).unwrap();
            let v1 = is_regular(&h1, &r1, e, 0.2, 0.5).unwrap();
            let mut res = Resolvent::new(&h2, e).unwrap();
            let g = res.entry(&[0, 0], &[7, 0]).unwrap().abs();
            assert!((v1.worst.unwrap().g_abs - g).abs() < 1e-10 * g);
        }
    }

    #[test]
    fn resonance_threshold_semantics() {
        let h = chain(vec![0.0; 3]);
        // sigma = {-sqrt 2, 0, sqrt 2}; E = 0.01 sits at distance 0.01
        let fam = SubsetFamily::Explicit(vec![BoxDifference::new(LatticeBox::new(vec![(0, 2)]).unwrap(), None).unwrap()]);
        // threshold e^{m L^b / 16J}: with m = 64, L = 4, b = 0.5, J = 1 it is e^8 ~ 2981
        let v = is_resonant(&h, 0.01, 64.0, 0.5, 4, 1, &fam).unwrap();
        assert!(!v.resonant);
        let v = is_resonant(&h, 1e-4, 64.0, 0.5, 4, 1, &fam).unwrap();
        assert!(v.resonant);
        assert!((v.witness_norm.unwrap() - 1e4).abs() < 1e-6);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let diag: Vec<f64> = (0..14).map(|k| ((k * k) as f64 * 0.7).cos() * 2.0).collect();
        let h = chain(diag.clone());
        for e in [-1.0, 0.1, 0.8, 2.5] {
            let v = is_resonant(&h, e, 8.0, 0.5, 4, 1, &SubsetFamily::Exhaustive1d).unwrap();
            let delta = 1.0 / v.threshold;
            let mut brute = false;
            for a in 0..diag.len() {
                for z in a..diag.len() {
                    let hs = chain(diag[a..=z].to_vec());
                    let dist = hs.dense().symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, l| m.min((l - e).abs()));
                    brute |= dist < delta;
                }
            }
            assert_eq!(v.resonant, brute, "E = {e}");
        }
    }

    #[test]
    fn far_energy_is_certified() {
        let h = chain(vec![0.0; 5]);
        let v = is_resonant(&h, 10.0, 1.0, 0.5, 2, 1, &SubsetFamily::default()).unwrap();
        assert!(!v.resonant && v.gershgorin_certified);
    }

    #[test]
    fn combes_thomas_far_from_spectrum() {
        let h = chain(vec![0.0; 11]);
        let r = LRectangle::at(&[0], 10, 0).unwrap();
        let rep = combes_thomas_check(&h, &r, 1e6, 1.0, 0.5, 10.0).unwrap();
        assert!(rep.precondition_met && rep.bound_holds && rep.verdict.is_regular && rep.bound_implies_regular);
        let near = 2.0 * (std::f64::consts::PI / 12.0).cos() + 0.1;
        let rep = combes_thomas_check(&h, &r, near, 1.0, 0.5, 1.0).unwrap();
        assert!(!rep.precondition_met);
        assert!((rep.distance - 0.1).abs() < 1e-9);
        assert!(rep.bound_holds);
    }
}
