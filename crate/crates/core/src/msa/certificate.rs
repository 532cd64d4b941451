use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{disjoint_family, scale_sequence, MsaParams};
use crate::error::{Error, Result};
use crate::hull::HullSample;
use crate::lattice::{enumerate_rectangles, BoxDifference, LRectangle, LatticeBox};
use crate::operator::predicates::{regularity_threshold, resonance_threshold, shortest_resonant_from};
use crate::operator::{is_regular, is_resonant, potential_on_box, resolvent_identity_residual, tridiag};
use crate::operator::{FiniteOperator, SubsetFamily};
use crate::torus::{FrequencyMatrix, TorusPoint};

/// The operator under test: `H = g v(T^x omega) + Delta` for one hull realization.
#[derive(Clone, Debug)]
pub struct MsaSetup {
    pub hull: HullSample,
    pub alpha: FrequencyMatrix,
    pub omega: TorusPoint,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyGrid {
    Explicit(Vec<f64>),
    /// Equally spaced points over the Gershgorin interval of the window operator.
    Uniform(usize),
    /// Eigenvalues of a central sub-box (at most 400 sites), their midpoints, and
    /// `fill` equally spaced points.
    SpectrumAdapted { fill: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsaOptions {
    pub k_max: usize,
    /// Defaults to `[-L_{k_max+2}, L_{k_max+2}]^d`.
    pub window: Option<LatticeBox>,
    pub energies: EnergyGrid,
    /// Phases sampled beyond the setup's own, along a Kronecker sequence.
    pub extra_omegas: usize,
    /// Subsets examined for resonance when `d > 1`; in `d = 1` every subinterval is used.
    pub family: SubsetFamily,
    /// Corner stride of the enclosing rectangles scanned when `d > 1`.
    pub outer_stride: u64,
    /// Use the generic rectangle-by-rectangle evaluation in `d = 1` as well.
    pub general_path: bool,
}

impl Default for MsaOptions {
    fn default() -> Self {
        Self {
            k_max: 0,
            window: None,
            energies: EnergyGrid::SpectrumAdapted { fill: 16 },
            extra_omegas: 0,
            family: SubsetFamily::default(),
            outer_stride: 1,
            general_path: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Singular `L_0`-rectangles are `J`-sparse in every `L_1`-rectangle.
    SingularSparse,
    /// `(E, L_k)`-resonant `L_{k+1}`-rectangles are `J`-sparse in every `L_{k+2}`-rectangle.
    ResonantSparseInRectangles,
    /// ... and 2-sparse in `[-L_{k+2}, L_{k+2}]^d`.
    ResonantSparseInBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessMember {
    pub rect: LatticeBox,
    /// Resonant subset found inside `rect`.
    pub subset: Option<BoxDifference>,
    /// `|G|` at the worst boundary pair (singular), or the resolvent norm on `subset`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub container: LatticeBox,
    pub members: Vec<WitnessMember>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub energy: f64,
    pub omega_index: usize,
    /// Ladder index; `None` for the singular-rectangle assumption.
    pub k: Option<usize>,
    pub assumption: Assumption,
    pub passed: bool,
    /// Bad rectangles in the window.
    pub bad_count: usize,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub description: String,
    /// Relative residual; `None` when `E` lies in one of the spectra involved.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsaCertificate {
    pub params: MsaParams,
    pub ladder: Vec<u64>,
    pub k_max: usize,
    pub window: LatticeBox,
    pub energies: Vec<f64>,
    pub omegas: Vec<TorusPoint>,
    pub checks: Vec<AssumptionCheck>,
    pub cross_checks: Vec<CrossCheck>,
    pub overall: bool,
}

impl MsaCertificate {
    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn passed(&self, assumption: Assumption) -> bool {
        self.checks.iter().filter(|c| c.assumption == assumption).all(|c| c.passed)
    }
}

fn kronecker(nu: usize, k: usize) -> Vec<f64> {
    const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    (0..nu).map(|i| (PRIMES[i % PRIMES.len()].sqrt() * (1 + i / PRIMES.len()) as f64 * k as f64).fract()).collect()
}

fn window_fits(window: &LatticeBox, ladder: &[u64], k: usize) -> bool {
    let outer = ladder[k + 2] as i64;
    let d = window.dim();
    let Ok(bx) = LatticeBox::cube(&vec![0; d], outer) else { return false };
    let sides = LRectangle::sides_for(d, ladder[k + 2], 0);
    bx.is_subset_of(window) && sides.iter().zip(window.sides()).all(|(s, w)| *s <= w)
}

fn energy_grid(grid: &EnergyGrid, window: &LatticeBox, potential: &[f64]) -> Result<Vec<f64>> {
    let d = window.dim() as f64;
    let lo = potential.iter().fold(f64::INFINITY, |m, &a| m.min(a)) - 2.0 * d;
    let hi = potential.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a)) + 2.0 * d;
    let uniform = |n: usize| -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    };
    let mut out = match grid {
        EnergyGrid::Explicit(list) => list.clone(),
        EnergyGrid::Uniform(n) => uniform(*n),
        EnergyGrid::SpectrumAdapted { fill } => {
            let side = (400f64.powf(1.0 / d)).floor() as i64;
            let center: Vec<i64> = window.intervals().iter().map(|(a, b)| (a + b).div_euclid(2)).collect();
            let intervals: Vec<(i64, i64)> = center
                .iter()
                .zip(window.intervals())
                .map(|(&c, &(a, b))| {
                    let lo = (c - side / 2).max(a);
                    (lo, (lo + side - 1).min(b))
                })
                .collect();
            let sub = LatticeBox::new(intervals)?;
            let win = FiniteOperator::from_potential(window, potential.to_vec(), 1.0)?;
            let ev = win.restrict(&sub)?.eigenvalues();
            let mut pts = ev.clone();
            pts.extend(ev.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            pts.extend(uniform(*fill));
            pts
        }
    };
    if out.is_empty() {
        return Err(Error::InvalidParameter("energy grid is empty".into()));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Checks the multiscale hypotheses on a finite window for every sampled `(E, omega)`.
pub fn check_msa_assumptions(params: &MsaParams, setup: &MsaSetup, opts: &MsaOptions) -> Result<MsaCertificate> {
    params.validate()?;
    let d = setup.alpha.d();
    let ladder = scale_sequence(params.l0, params.gamma, opts.k_max + 2)?;
    if ladder.len() < opts.k_max + 3 {
        return Err(Error::WindowTooSmall { max_feasible: ladder.len().checked_sub(3) });
    }
    let window = match &opts.window {
        Some(w) => w.clone(),
        None => LatticeBox::cube(&vec![0; d], ladder[opts.k_max + 2] as i64)?,
    };
    if window.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: window.dim() });
    }
    if !window_fits(&window, &ladder, opts.k_max) {
        let max_feasible = (0..=opts.k_max).take_while(|&k| window_fits(&window, &ladder, k)).last();
        return Err(Error::WindowTooSmall { max_feasible });
    }
    if opts.outer_stride == 0 {
        return Err(Error::InvalidParameter("outer stride must be positive".into()));
    }
    let mut omegas = vec![setup.omega.clone()];
    for k in 1..=opts.extra_omegas {
        omegas.push(setup.omega.offset(&kronecker(setup.omega.dim(), k)));
    }
    let potentials = omegas
        .iter()
        .map(|w| potential_on_box(&window, w, &setup.alpha, &setup.hull, setup.g))
        .collect::<Result<Vec<_>>>()?;
    let energies = energy_grid(&opts.energies, &window, &potentials[0])?;

    let tasks: Vec<(usize, usize)> =
        (0..omegas.len()).flat_map(|o| (0..energies.len()).map(move |e| (o, e))).collect();
    let per_task = tasks
        .par_iter()
        .map(|&(o, e)| {
            let ctx = TaskContext {
                params,
                ladder: &ladder,
                k_max: opts.k_max,
                window: &window,
                potential: &potentials[o],
                energy: energies[e],
                omega_index: o,
                g: setup.g,
            };
            if d == 1 && !opts.general_path {
                ctx.run_chain()
            } else {
                ctx.run_general(opts)
            }
        })
        .collect::<Result<Vec<Vec<AssumptionCheck>>>>()?;
    let checks: Vec<AssumptionCheck> = per_task.into_iter().flatten().collect();
    let overall = checks.iter().all(|c| c.passed);
    let cross_checks = vec![identity_spot_check(&window, &potentials[0], energies[0], setup.g)?];
    Ok(MsaCertificate {
        params: params.clone(),
        ladder,
        k_max: opts.k_max,
        window,
        energies,
        omegas,
        checks,
        cross_checks,
        overall,
    })
}

fn identity_spot_check(window: &LatticeBox, potential: &[f64], energy: f64, g: f64) -> Result<CrossCheck> {
    let d = window.dim();
    let center: Vec<i64> = window.intervals().iter().map(|(a, b)| (a + b).div_euclid(2)).collect();
    let big = LatticeBox::cube(&center, 3)?.intersection(window).ok_or(Error::EmptyRegion)?;
    let mut small_iv = big.intervals().to_vec();
    small_iv[0].1 = (small_iv[0].0 + 3).min(small_iv[0].1);
    let small = LatticeBox::new(small_iv)?;
    let h = FiniteOperator::from_potential(window, potential.to_vec(), g)?.restrict(&big)?;
    let x = small.lower();
    let y = small.upper();
    let residual = resolvent_identity_residual(&h, &small, energy, &x, &y).ok();
    Ok(CrossCheck {
        description: format!("resolvent identity on {small} inside {big}, d = {d}, E = {energy}"),
        residual,
    })
}

struct TaskContext<'a> {
    params: &'a MsaParams,
    ladder: &'a [u64],
    k_max: usize,
    window: &'a LatticeBox,
    potential: &'a [f64],
    energy: f64,
    omega_index: usize,
    g: f64,
}

/// For each start position, the next position at or after it that is flagged.
fn next_flagged(flags: &[bool]) -> Vec<usize> {
    let mut out = vec![usize::MAX; flags.len() + 1];
    for p in (0..flags.len()).rev() {
        out[p] = if flags[p] { p } else { out[p + 1] };
    }
    out
}

/// Greedy choice of `j` disjoint flagged intervals of `len` sites inside `[lo, hi]`
/// (site indices); optimal for equal-length intervals.
fn greedy_disjoint(next: &[usize], len: usize, lo: usize, hi: usize, j: usize) -> Option<Vec<usize>> {
    let mut found = Vec::with_capacity(j);
    let mut pos = lo;
    while found.len() < j {
        let s = *next.get(pos)?;
        if s == usize::MAX || s + len - 1 > hi {
            return None;
        }
        found.push(s);
        pos = s + len;
    }
    Some(found)
}

impl TaskContext<'_> {
    fn check(&self, k: Option<usize>, assumption: Assumption, bad_count: usize, witness: Option<Witness>) -> AssumptionCheck {
        AssumptionCheck {
            energy: self.energy,
            omega_index: self.omega_index,
            k,
            assumption,
            passed: witness.is_none(),
            bad_count,
            witness,
        }
    }

    fn interval(&self, start: usize, len: usize) -> LatticeBox {
        let w0 = self.window.lower()[0];
        LatticeBox::new(vec![(w0 + start as i64, w0 + (start + len - 1) as i64)]).expect("ordered")
    }

    fn run_chain(&self) -> Result<Vec<AssumptionCheck>> {
        let p = self.params;
        let v = self.potential;
        let n = v.len();
        let j = p.j as usize;
        let mut out = Vec::new();

        // singular L0-rectangles inside L1-rectangles
        let len0 = p.l0 as usize + 1;
        let limit = p.m * (p.l0 as f64 + (p.l0 as f64).powf(p.b));
        let g_abs: Vec<f64> =
            (0..=n - len0).map(|s| (-tridiag::log_abs_det(&v[s..s + len0], self.energy)).exp()).collect();
        let singular: Vec<bool> = g_abs.iter().map(|&g| !(g <= (-limit).exp())).collect();
        let next = next_flagged(&singular);
        let len1 = self.ladder[1] as usize + 1;
        let witness = (0..=n - len1).find_map(|q| {
            greedy_disjoint(&next, len0, q, q + len1 - 1, j).map(|starts| Witness {
                container: self.interval(q, len1),
                members: starts
                    .into_iter()
                    .map(|s| WitnessMember { rect: self.interval(s, len0), subset: None, value: g_abs[s] })
                    .collect(),
            })
        });
        out.push(self.check(None, Assumption::SingularSparse, singular.iter().filter(|&&b| b).count(), witness));

        let (vmin, vmax) = tridiag::spectral_hull(v);
        for k in 0..=self.k_max {
            let delta = 1.0 / resonance_threshold(p.m, p.b, self.ladder[k], p.j);
            let len = self.ladder[k + 1] as usize + 1;
            let outer = self.ladder[k + 2] as usize + 1;
            let flags: Vec<Option<(usize, usize)>> = if self.energy <= vmin - delta || self.energy >= vmax + delta {
                vec![None; n - len + 1]
            } else {
                resonant_rectangles(v, len, self.energy, delta)
            };
            let bad: Vec<bool> = flags.iter().map(Option::is_some).collect();
            let bad_count = bad.iter().filter(|&&b| b).count();
            let next = next_flagged(&bad);
            let member = |s: usize| {
                let (a, z) = flags[s].expect("flagged");
                let w0 = self.window.lower()[0];
                let sub = LatticeBox::new(vec![(w0 + a as i64, w0 + z as i64)]).expect("ordered");
                WitnessMember {
                    rect: self.interval(s, len),
                    subset: Some(BoxDifference { outer: sub, inner: None }),
                    value: 1.0 / tridiag::spectral_distance(&v[a..=z], self.energy),
                }
            };
            let witness = (0..=n - outer).find_map(|q| {
                greedy_disjoint(&next, len, q, q + outer - 1, j).map(|starts| Witness {
                    container: self.interval(q, outer),
                    members: starts.into_iter().map(member).collect(),
                })
            });
            out.push(self.check(Some(k), Assumption::ResonantSparseInRectangles, bad_count, witness));

            let half = self.ladder[k + 2] as i64;
            let w0 = self.window.lower()[0];
            let (lo, hi) = ((-half - w0) as usize, (half - w0) as usize);
            let witness = greedy_disjoint(&next, len, lo, hi, 2).map(|starts| Witness {
                container: self.interval(lo, hi - lo + 1),
                members: starts.into_iter().map(member).collect(),
            });
            out.push(self.check(Some(k), Assumption::ResonantSparseInBox, bad_count, witness));
        }
        Ok(out)
    }

    fn run_general(&self, opts: &MsaOptions) -> Result<Vec<AssumptionCheck>> {
        let p = self.params;
        let j = p.j as usize;
        let h = FiniteOperator::from_potential(self.window, self.potential.to_vec(), self.g)?;
        let family = if h.dim() == 1 { SubsetFamily::Exhaustive1d } else { opts.family.clone() };
        let mut out = Vec::new();

        let threshold = regularity_threshold(p.l0, p.m, p.b);
        let rects0 = enumerate_rectangles(self.window, p.l0, 1)?.rects;
        let bad0: Vec<WitnessMember> = rects0
            .iter()
            .map(|r| {
                let v = is_regular(&h, r, self.energy, p.m, p.b)?;
                let value = v.worst.as_ref().map_or(f64::INFINITY, |w| w.g_abs);
                Ok((!v.is_regular).then(|| WitnessMember { rect: r.rect().clone(), subset: None, value }))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        debug_assert!(threshold > 0.0);
        let witness = self.scan_containers(&bad0, self.ladder[1], opts.outer_stride, j)?;
        out.push(self.check(None, Assumption::SingularSparse, bad0.len(), witness));

        for k in 0..=self.k_max {
            let rects = enumerate_rectangles(self.window, self.ladder[k + 1], 1)?.rects;
            let bad: Vec<WitnessMember> = rects
                .iter()
                .map(|r| {
                    let hr = h.restrict(r.rect())?;
                    let v = is_resonant(&hr, self.energy, p.m, p.b, self.ladder[k], p.j, &family)?;
                    Ok(v.resonant.then(|| WitnessMember {
                        rect: r.rect().clone(),
                        subset: v.witness.clone(),
                        value: v.witness_norm.unwrap_or(f64::INFINITY),
                    }))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let witness = self.scan_containers(&bad, self.ladder[k + 2], opts.outer_stride, j)?;
            out.push(self.check(Some(k), Assumption::ResonantSparseInRectangles, bad.len(), witness));

            let bx = LatticeBox::cube(&vec![0; self.window.dim()], self.ladder[k + 2] as i64)?;
            let inside: Vec<&WitnessMember> = bad.iter().filter(|m| m.rect.is_subset_of(&bx)).collect();
            let boxes: Vec<&LatticeBox> = inside.iter().map(|m| &m.rect).collect();
            let witness = disjoint_family(&boxes, 2).map(|idx| Witness {
                container: bx.clone(),
                members: idx.into_iter().map(|i| inside[i].clone()).collect(),
            });
            out.push(self.check(Some(k), Assumption::ResonantSparseInBox, bad.len(), witness));
        }
        Ok(out)
    }

    /// First container rectangle at `scale` holding `j` pairwise disjoint members of `bad`.
    fn scan_containers(&self, bad: &[WitnessMember], scale: u64, stride: u64, j: usize) -> Result<Option<Witness>> {
        if bad.len() < j {
            return Ok(None);
        }
        for c in enumerate_rectangles(self.window, scale, stride)?.rects {
            let inside: Vec<&WitnessMember> = bad.iter().filter(|m| m.rect.is_subset_of(c.rect())).collect();
            let boxes: Vec<&LatticeBox> = inside.iter().map(|m| &m.rect).collect();
            if let Some(idx) = disjoint_family(&boxes, j) {
                return Ok(Some(Witness {
                    container: c.rect().clone(),
                    members: idx.into_iter().map(|i| inside[i].clone()).collect(),
                }));
            }
        }
        Ok(None)
    }
}

/// For every interval of `len` sites (by start index), a subinterval `(a, z)` with an
/// eigenvalue within `delta` of `E`, if one exists.
fn resonant_rectangles(v: &[f64], len: usize, energy: f64, delta: f64) -> Vec<Option<(usize, usize)>> {
    use std::collections::VecDeque;
    let n = v.len();
    let zmin: Vec<Option<usize>> = (0..n)
        .into_par_iter()
        .map(|a| shortest_resonant_from(v, a, (a + len - 1).min(n - 1), energy, delta))
        .collect();
    // sliding minimum of zmin over a in [s, s + len - 1]
    let key = |a: usize| zmin[a].unwrap_or(usize::MAX);
    let mut out = Vec::with_capacity(n - len + 1);
    let mut deque: VecDeque<usize> = VecDeque::new();
    for a in 0..n {
        while deque.back().is_some_and(|&b| key(b) >= key(a)) {
            deque.pop_back();
        }
        deque.push_back(a);
        if a + 1 >= len {
            let s = a + 1 - len;
            while deque.front().is_some_and(|&b| b < s) {
                deque.pop_front();
            }
            let best = *deque.front().expect("nonempty");
            out.push(zmin[best].filter(|&z| z < s + len).map(|z| (best, z)));
        }
    }
    out
}
