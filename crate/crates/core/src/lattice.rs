//! Geometry of `Z^d`: boxes, L-rectangles, strips, boundaries.
//!
//! Distances between lattice sites use the graph (l1) metric. Sites of a box
//! are always listed in lexicographic order, and that order is the matrix
//! index order used by [`crate::operator`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site in `Z^d`.
pub type Site = Vec<i64>;

/// Graph distance on `Z^d`.
pub fn l1_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Product of `d` inclusive integer intervals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeBox {
    intervals: Vec<(i64, i64)>,
}

impl LatticeBox {
    pub fn new(intervals: Vec<(i64, i64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidParameter("a box needs at least one axis".into()));
        }
        if let Some((a, b)) = intervals.iter().find(|(a, b)| a > b) {
            return Err(Error::InvalidParameter(format!("interval [{a}, {b}] is empty")));
        }
        Ok(Self { intervals })
    }

    /// `[c - half, c + half]` along every axis.
    pub fn cube(center: &[i64], half: i64) -> Result<Self> {
        Self::new(center.iter().map(|&c| (c - half, c + half)).collect())
    }

    /// Box with the given lower corner and per-axis cardinalities.
    pub fn from_corner(lower: &[i64], sides: &[u64]) -> Result<Self> {
        if lower.len() != sides.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: sides.len() });
        }
        if sides.contains(&0) {
            return Err(Error::InvalidParameter("zero side length".into()));
        }
        Self::new(lower.iter().zip(sides).map(|(&a, &s)| (a, a + s as i64 - 1)).collect())
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.intervals
    }

    pub fn lower(&self) -> Site {
        self.intervals.iter().map(|iv| iv.0).collect()
    }

    pub fn upper(&self) -> Site {
        self.intervals.iter().map(|iv| iv.1).collect()
    }

    /// Cardinality of the interval along `axis`.
    pub fn side(&self, axis: usize) -> u64 {
        let (a, b) = self.intervals[axis];
        (b - a + 1) as u64
    }

    pub fn sides(&self) -> Vec<u64> {
        (0..self.dim()).map(|i| self.side(i)).collect()
    }

    pub fn cardinality(&self) -> usize {
        self.intervals.iter().map(|(a, b)| (b - a + 1) as usize).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim() && self.intervals.iter().zip(x).all(|(&(a, b), &v)| a <= v && v <= b)
    }

    pub fn is_subset_of(&self, other: &LatticeBox) -> bool {
        self.dim() == other.dim()
            && self
                .intervals
                .iter()
                .zip(&other.intervals)
                .all(|(&(a, b), &(c, e))| c <= a && b <= e)
    }

    pub fn intersection(&self, other: &LatticeBox) -> Option<LatticeBox> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut out = Vec::with_capacity(self.dim());
        for (&(a, b), &(c, e)) in self.intervals.iter().zip(&other.intervals) {
            let lo = a.max(c);
            let hi = b.min(e);
            if lo > hi {
                return None;
            }
            out.push((lo, hi));
        }
        Some(LatticeBox { intervals: out })
    }

    /// Lexicographic position of `x`, or `None` when `x` lies outside.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for (axis, &(a, b)) in self.intervals.iter().enumerate() {
            idx = idx * (b - a + 1) as usize + (x[axis] - a) as usize;
        }
        Some(idx)
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.cardinality());
        let mut cur = self.lower();
        loop {
            out.push(cur.clone());
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < self.intervals[axis].1 {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = self.intervals[axis].0;
            }
        }
    }

    /// Graph distance from `x` to the inner boundary of the box.
    ///
    /// For `x` inside the box this is the distance to the nearest face.
    pub fn depth(&self, x: &[i64]) -> i64 {
        self.intervals
            .iter()
            .zip(x)
            .map(|(&(a, b), &v)| (v - a).min(b - v))
            .min()
            .unwrap_or(0)
    }

    pub fn translate(&self, shift: &[i64]) -> LatticeBox {
        LatticeBox {
            intervals: self.intervals.iter().zip(shift).map(|(&(a, b), &s)| (a + s, b + s)).collect(),
        }
    }
}

impl std::fmt::Display for LatticeBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.intervals.iter().map(|(a, b)| format!("[{a},{b}]")).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// True iff the two boxes share no site.
pub fn are_disjoint(a: &LatticeBox, b: &LatticeBox) -> bool {
    a.intersection(b).is_none()
}

/// A finite subset of `Z^d`.
pub trait Region {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[i64]) -> bool;
    /// Sites in lexicographic order.
    fn sites(&self) -> Vec<Site>;
}

impl Region for LatticeBox {
    fn dim(&self) -> usize {
        LatticeBox::dim(self)
    }
    fn contains(&self, x: &[i64]) -> bool {
        LatticeBox::contains(self, x)
    }
    fn sites(&self) -> Vec<Site> {
        LatticeBox::sites(self)
    }
}

/// `outer \ inner`, a member of the family of box differences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDifference {
    pub outer: LatticeBox,
    pub inner: Option<LatticeBox>,
}

impl BoxDifference {
    pub fn new(outer: LatticeBox, inner: Option<LatticeBox>) -> Result<Self> {
        if let Some(inner) = &inner {
            if inner.dim() != outer.dim() {
                return Err(Error::DimensionMismatch { expected: outer.dim(), found: inner.dim() });
            }
        }
        Ok(Self { outer, inner })
    }

    pub fn cardinality(&self) -> usize {
        let removed = self
            .inner
            .as_ref()
            .and_then(|i| i.intersection(&self.outer))
            .map_or(0, |i| i.cardinality());
        self.outer.cardinality() - removed
    }
}

impl Region for BoxDifference {
    fn dim(&self) -> usize {
        self.outer.dim()
    }
    fn contains(&self, x: &[i64]) -> bool {
        self.outer.contains(x) && !self.inner.as_ref().is_some_and(|i| i.contains(x))
    }
    fn sites(&self) -> Vec<Site> {
        self.outer.sites().into_iter().filter(|x| self.contains(x)).collect()
    }
}

/// An explicit set of sites.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SiteSet {
    dim: usize,
    sites: BTreeSet<Site>,
}

impl SiteSet {
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let sites: BTreeSet<Site> = sites.into_iter().collect();
        if let Some(bad) = sites.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Ok(Self { dim, sites })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

impl Region for SiteSet {
    fn dim(&self) -> usize {
        self.dim
    }
    fn contains(&self, x: &[i64]) -> bool {
        self.sites.contains(x)
    }
    fn sites(&self) -> Vec<Site> {
        self.sites.iter().cloned().collect()
    }
}

/// Ordered pairs `(u, u')` with `u` inside, `u'` outside and `|u - u'| = 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub pairs: Vec<(Site, Site)>,
}

impl Boundary {
    /// Projection on the first coordinate (the inner boundary), sorted, without repeats.
    pub fn inner(&self) -> Vec<Site> {
        let set: BTreeSet<&Site> = self.pairs.iter().map(|(u, _)| u).collect();
        set.into_iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Nearest neighbours of `x` in `Z^d`, ordered by axis then direction.
pub fn neighbours(x: &[i64]) -> impl Iterator<Item = Site> + '_ {
    (0..x.len()).flat_map(move |axis| {
        [-1i64, 1].into_iter().map(move |step| {
            let mut y = x.to_vec();
            y[axis] += step;
            y
        })
    })
}

/// Boundary of `s`; with `ambient`, only pairs whose outer site lies in `ambient`.
pub fn boundary<R: Region + ?Sized>(s: &R, ambient: Option<&LatticeBox>) -> Result<Boundary> {
    let sites = s.sites();
    if sites.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut pairs = Vec::new();
    for u in &sites {
        for v in neighbours(u) {
            if s.contains(&v) {
                continue;
            }
            if ambient.is_some_and(|amb| !amb.contains(&v)) {
                continue;
            }
            pairs.push((u.clone(), v));
        }
    }
    pairs.sort();
    Ok(Boundary { pairs })
}

/// Inner boundary of a box, computed directly from its faces.
pub fn box_inner_boundary(b: &LatticeBox) -> Vec<Site> {
    b.sites().into_iter().filter(|x| b.depth(x) == 0).collect()
}

/// A box with `d - 1` sides of cardinality `2L + 1` and one (`short_axis`) of `L + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LRectangle {
    rect: LatticeBox,
    scale: u64,
    short_axis: usize,
}

impl LRectangle {
    pub fn new(rect: LatticeBox, scale: u64, short_axis: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::InvalidParameter("L must be positive".into()));
        }
        if short_axis >= rect.dim() {
            return Err(Error::InvalidParameter(format!("short axis {short_axis} out of range")));
        }
        for axis in 0..rect.dim() {
            let want = if axis == short_axis { scale + 1 } else { 2 * scale + 1 };
            if rect.side(axis) != want {
                return Err(Error::InvalidParameter(format!(
                    "axis {axis} has cardinality {}, expected {want}",
                    rect.side(axis)
                )));
            }
        }
        Ok(Self { rect, scale, short_axis })
    }

    /// L-rectangle with the given lower corner.
    pub fn at(lower: &[i64], scale: u64, short_axis: usize) -> Result<Self> {
        let sides = Self::sides_for(lower.len(), scale, short_axis);
        Self::new(LatticeBox::from_corner(lower, &sides)?, scale, short_axis)
    }

    pub fn sides_for(dim: usize, scale: u64, short_axis: usize) -> Vec<u64> {
        (0..dim).map(|a| if a == short_axis { scale + 1 } else { 2 * scale + 1 }).collect()
    }

    pub fn rect(&self) -> &LatticeBox {
        &self.rect
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn short_axis(&self) -> usize {
        self.short_axis
    }
}

/// Sites of `r` whose graph distance to the inner boundary is at least `dist_min`.
pub fn inner_points_at_distance(r: &LRectangle, dist_min: u64) -> Vec<Site> {
    r.rect.sites().into_iter().filter(|x| r.rect.depth(x) >= dist_min as i64).collect()
}

/// Sub-box of `parent` that agrees with it on every axis but `axis`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strip {
    parent: LatticeBox,
    rect: LatticeBox,
    axis: usize,
    width: u64,
}

impl Strip {
    pub fn new(parent: &LatticeBox, axis: usize, start: i64, width: u64) -> Result<Self> {
        if axis >= parent.dim() {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        if width == 0 {
            return Err(Error::InvalidParameter("strip width must be positive".into()));
        }
        let mut intervals = parent.intervals().to_vec();
        intervals[axis] = (start, start + width as i64 - 1);
        let rect = LatticeBox::new(intervals)?;
        if !rect.is_subset_of(parent) {
            return Err(Error::InvalidParameter(format!("strip {rect} leaves its parent {parent}")));
        }
        Ok(Self { parent: parent.clone(), rect, axis, width })
    }

    pub fn rect(&self) -> &LatticeBox {
        &self.rect
    }

    pub fn parent(&self) -> &LatticeBox {
        &self.parent
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    /// The annulus `parent \ strip`.
    pub fn complement(&self) -> BoxDifference {
        BoxDifference { outer: self.parent.clone(), inner: Some(self.rect.clone()) }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RectangleScan {
    pub rects: Vec<LRectangle>,
    /// Set when no L-rectangle fits into the window.
    pub window_too_small: bool,
}

/// All L-rectangles inside `window` whose lower corners lie on the `stride`-sublattice
/// anchored at the window's lower corner. Short axes are taken in increasing order, and
/// within one short axis corners are listed lexicographically.
pub fn enumerate_rectangles(window: &LatticeBox, scale: u64, stride: u64) -> Result<RectangleScan> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    if scale == 0 {
        return Err(Error::InvalidParameter("L must be positive".into()));
    }
    let d = window.dim();
    let mut rects = Vec::new();
    for short in 0..d {
        let sides = LRectangle::sides_for(d, scale, short);
        if sides.iter().zip(window.sides()).any(|(&s, w)| s > w) {
            continue;
        }
        // Lower corners form a box of feasible positions, thinned by the stride.
        let counts: Vec<i64> = sides
            .iter()
            .zip(window.sides())
            .map(|(&s, w)| ((w - s) / stride) as i64 + 1)
            .collect();
        let corner_box = LatticeBox::new(counts.iter().map(|&c| (0, c - 1)).collect())?;
        for step in corner_box.sites() {
            let lower: Vec<i64> = window
                .lower()
                .iter()
                .zip(&step)
                .map(|(&a, &k)| a + k * stride as i64)
                .collect();
            rects.push(LRectangle::at(&lower, scale, short)?);
        }
    }
    let window_too_small = rects.is_empty();
    Ok(RectangleScan { rects, window_too_small })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(iv: &[(i64, i64)]) -> LatticeBox {
        LatticeBox::new(iv.to_vec()).unwrap()
    }

    #[test]
    fn interval_boundary() {
        let b = boundary(&bx(&[(0, 2)]), None).unwrap();
        assert_eq!(b.pairs, vec![(vec![0], vec![-1]), (vec![2], vec![3])]);
        assert_eq!(b.inner(), vec![vec![0], vec![2]]);
    }

    #[test]
    fn single_site_in_plane_has_four_pairs() {
        let b = boundary(&bx(&[(0, 0), (0, 0)]), None).unwrap();
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn ambient_filter_keeps_exits_into_ambient() {
        let s = bx(&[(0, 1), (0, 1)]);
        let amb = bx(&[(0, 3), (0, 1)]);
        let all = boundary(&s, None).unwrap();
        assert_eq!(all.len(), 8);
        let kept = boundary(&s, Some(&amb)).unwrap();
        assert_eq!(kept.pairs, vec![(vec![1, 0], vec![2, 0]), (vec![1, 1], vec![2, 1])]);
    }

    #[test]
    fn empty_region_is_an_error() {
        let empty = SiteSet::new(2, Vec::new()).unwrap();
        assert_eq!(boundary(&empty, None), Err(Error::EmptyRegion));
        let hollow = BoxDifference::new(bx(&[(0, 1)]), Some(bx(&[(-1, 3)]))).unwrap();
        assert_eq!(boundary(&hollow, None), Err(Error::EmptyRegion));
    }

    #[test]
    fn inner_points() {
        let r = LRectangle::new(bx(&[(0, 10)]), 10, 0).unwrap();
        assert_eq!(inner_points_at_distance(&r, 0).len(), 11);
        assert_eq!(inner_points_at_distance(&r, 4), vec![vec![4], vec![5], vec![6]]);
        let sq = LRectangle::new(bx(&[(0, 4), (0, 2)]), 2, 1).unwrap();
        assert!(inner_points_at_distance(&sq, 3).is_empty());
    }

    #[test]
    fn disjointness() {
        assert!(are_disjoint(&bx(&[(0, 1)]), &bx(&[(2, 3)])));
        assert!(!are_disjoint(&bx(&[(0, 2)]), &bx(&[(2, 4)])));
        assert!(are_disjoint(&bx(&[(0, 1), (0, 5)]), &bx(&[(2, 3), (4, 9)])));
    }

    #[test]
    fn rectangle_scan_in_one_dimension() {
        let one = enumerate_rectangles(&bx(&[(0, 10)]), 10, 1).unwrap();
        assert_eq!(one.rects.len(), 1);
        assert_eq!(one.rects[0].rect(), &bx(&[(0, 10)]));
        let three = enumerate_rectangles(&bx(&[(0, 12)]), 10, 1).unwrap();
        let got: Vec<_> = three.rects.iter().map(|r| r.rect().clone()).collect();
        assert_eq!(got, vec![bx(&[(0, 10)]), bx(&[(1, 11)]), bx(&[(2, 12)])]);
        let none = enumerate_rectangles(&bx(&[(0, 5)]), 10, 1).unwrap();
        assert!(none.window_too_small && none.rects.is_empty());
    }

    #[test]
    fn rectangle_invariant_is_enforced() {
        assert!(LRectangle::new(bx(&[(0, 4), (0, 4)]), 2, 0).is_err());
        assert!(LRectangle::new(bx(&[(0, 2), (0, 4)]), 2, 0).is_ok());
    }

    #[test]
    fn strips() {
        let parent = bx(&[(0, 9), (0, 4)]);
        let s = Strip::new(&parent, 0, 3, 2).unwrap();
        assert_eq!(s.rect(), &bx(&[(3, 4), (0, 4)]));
        assert_eq!(s.complement().cardinality(), 40);
        assert!(Strip::new(&parent, 0, 9, 2).is_err());
    }

    #[test]
    fn lexicographic_indexing() {
        let b = bx(&[(-1, 1), (2, 3)]);
        for (i, s) in b.sites().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.sites()[1], vec![-1, 3]);
    }
}
