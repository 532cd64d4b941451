//! Finite-window checks of the multiscale hypotheses: the scale ladder, sparsity of
//! singular and resonant rectangles, a resonance census and eigenfunction decay.

pub mod census;
pub mod certificate;
pub mod decay;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LRectangle, LatticeBox};

pub use census::{resonance_census, CensusConfig, CensusReport};
pub use certificate::CrossCheck;
pub use certificate::{
    check_msa_assumptions, Assumption, AssumptionCheck, EnergyGrid, MsaCertificate, MsaOptions, MsaSetup,
    Witness, WitnessMember,
};
pub use decay::{eigen_decay, eigen_decays, DecayReport, Selector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsaParams {
    pub m: f64,
    pub b: f64,
    pub gamma: f64,
    #[serde(rename = "J")]
    pub j: u32,
    #[serde(rename = "L0")]
    pub l0: u64,
    pub r: f64,
}

impl MsaParams {
    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.m > 0.0) {
            out.push(format!("m must be positive, got {}", self.m));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            out.push(format!("b must lie in (0, 1), got {}", self.b));
        }
        if !(self.gamma > 2.0 - self.b) {
            out.push(format!("gamma must exceed 2 − b = {}", 2.0 - self.b));
        }
        if self.j < 1 {
            out.push("J must be at least 1".into());
        }
        if self.l0 < 2 {
            out.push(format!("L0 must be at least 2, got {}", self.l0));
        }
        if !(self.r > 0.0) {
            out.push(format!("r must be positive, got {}", self.r));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidParameter(v)),
        }
    }
}

/// `floor(l^gamma)`, snapping to the nearest integer when within rounding error of it.
pub fn next_scale(l: u64, gamma: f64) -> u64 {
    let x = (l as f64).powf(gamma);
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x {
        nearest as u64
    } else {
        x.floor() as u64
    }
}

/// `[L_0, ..., L_{k_max}]` with `L_{k+1} = floor(L_k^gamma)`.
pub fn scale_sequence(l0: u64, gamma: f64, k_max: usize) -> Result<Vec<u64>> {
    scale_sequence_capped(l0, gamma, k_max, u64::MAX)
}

/// As [`scale_sequence`], stopping before the first scale above `cap`.
pub fn scale_sequence_capped(l0: u64, gamma: f64, k_max: usize, cap: u64) -> Result<Vec<u64>> {
    if l0 < 2 {
        return Err(Error::InvalidParameter(format!("L0 must be at least 2, got {l0}")));
    }
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    let mut out = vec![l0];
    while out.len() <= k_max {
        let l = *out.last().expect("nonempty");
        let x = (l as f64).powf(gamma);
        if x > cap as f64 || x >= 9.0e15 {
            break;
        }
        let next = next_scale(l, gamma);
        if next <= l {
            return Err(Error::LadderStalls { scale: l });
        }
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityOutcome {
    pub passed: bool,
    /// `J` pairwise disjoint bad rectangles when the scan fails.
    pub witness: Vec<LRectangle>,
    pub bad_count: usize,
}

/// Fails iff `rects` contains `J` pairwise disjoint members inside `window` that are bad.
pub fn sparsity_scan(
    window: &LatticeBox,
    rects: &[LRectangle],
    bad: impl Fn(&LRectangle) -> bool,
    j: usize,
) -> SparsityOutcome {
    let candidates: Vec<&LRectangle> = rects.iter().filter(|r| r.rect().is_subset_of(window) && bad(r)).collect();
    let boxes: Vec<&LatticeBox> = candidates.iter().map(|r| r.rect()).collect();
    let found = disjoint_family(&boxes, j);
    SparsityOutcome {
        passed: found.is_none(),
        witness: found.map(|idx| idx.into_iter().map(|i| candidates[i].clone()).collect()).unwrap_or_default(),
        bad_count: candidates.len(),
    }
}

/// Indices of `j` pairwise disjoint boxes, if any: greedy first, then exact search.
pub fn disjoint_family(boxes: &[&LatticeBox], j: usize) -> Option<Vec<usize>> {
    if j == 0 {
        return Some(Vec::new());
    }
    if boxes.len() < j {
        return None;
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| (boxes[i].upper().iter().sum::<i64>(), boxes[i].lower()));
    let mut greedy: Vec<usize> = Vec::new();
    for &i in &order {
        if greedy.iter().all(|&k| boxes[k].intersection(boxes[i]).is_none()) {
            greedy.push(i);
            if greedy.len() == j {
                greedy.sort_unstable();
                return Some(greedy);
            }
        }
    }
    let mut chosen = Vec::with_capacity(j);
    let all: Vec<usize> = (0..boxes.len()).collect();
    if dfs(boxes, &all, j, &mut chosen) {
        Some(chosen)
    } else {
        None
    }
}

fn dfs(boxes: &[&LatticeBox], candidates: &[usize], j: usize, chosen: &mut Vec<usize>) -> bool {
    if chosen.len() == j {
        return true;
    }
    let need = j - chosen.len();
    for (pos, &i) in candidates.iter().enumerate() {
        if candidates.len() - pos < need {
            return false;
        }
        let rest: Vec<usize> = candidates[pos + 1..]
            .iter()
            .copied()
            .filter(|&k| boxes[k].intersection(boxes[i]).is_none())
            .collect();
        if rest.len() + 1 < need {
            continue;
        }
        chosen.push(i);
        if dfs(boxes, &rest, j, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}
