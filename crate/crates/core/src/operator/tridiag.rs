//! Kernels for symmetric tridiagonal matrices with unit off-diagonal, i.e. operators
//! on an interval of `Z`. Matrices are given by their diagonal.

/// Gaussian elimination with partial pivoting of `diag - shift` (unit off-diagonals).
#[derive(Clone, Debug)]
pub struct TridiagLu {
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    steps: Vec<(bool, f64)>,
}

impl TridiagLu {
    /// `None` when a zero pivot appears.
    pub fn new(diag: &[f64], shift: f64) -> Option<Self> {
        let n = diag.len();
        if n == 0 {
            return None;
        }
        let mut d: Vec<f64> = diag.iter().map(|a| a - shift).collect();
        let mut du = vec![1.0; n.saturating_sub(1)];
        let mut dl = vec![1.0f64; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(1)];
        let mut steps = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                steps.push((false, fact));
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                steps.push((true, fact));
            }
            dl[i] = 0.0;
        }
        if d[n - 1] == 0.0 {
            return None;
        }
        Some(Self { d, du, du2, steps })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for (i, &(swapped, fact)) in self.steps.iter().enumerate() {
            if swapped {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - fact * b[i + 1];
            } else {
                b[i + 1] -= fact * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    /// Column `j` of the inverse.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.d.len()];
        b[j] = 1.0;
        self.solve_in_place(&mut b);
        b
    }
}

fn pivot_floor(diag: &[f64], x: f64) -> f64 {
    let scale = diag.iter().fold(2.0f64, |m, a| m.max((a - x).abs()));
    f64::MIN_POSITIVE.max(scale * f64::EPSILON * f64::EPSILON)
}

/// Number of eigenvalues strictly below `x` (an eigenvalue equal to `x` may fall on
/// either side).
pub fn count_below(diag: &[f64], x: f64) -> usize {
    let floor = pivot_floor(diag, x);
    let mut count = 0;
    let mut prev = 1.0f64;
    for (i, a) in diag.iter().enumerate() {
        let mut p = a - x - if i == 0 { 0.0 } else { 1.0 / prev };
        if p.abs() < floor {
            p = -floor;
        }
        if p < 0.0 {
            count += 1;
        }
        prev = p;
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn spectral_hull(diag: &[f64]) -> (f64, f64) {
    let lo = diag.iter().fold(f64::INFINITY, |m, &a| m.min(a));
    let hi = diag.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a));
    let off = if diag.len() > 1 { 2.0 } else { 0.0 };
    (lo - off, hi + off)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
pub fn eigenvalue(diag: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = spectral_hull(diag);
    lo -= 1.0;
    hi += 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(diag, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * (lo.abs().max(hi.abs()).max(1.0)) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn eigenvalues(diag: &[f64]) -> Vec<f64> {
    (0..diag.len()).map(|k| eigenvalue(diag, k)).collect()
}

/// `dist(x, spectrum)`.
pub fn spectral_distance(diag: &[f64], x: f64) -> f64 {
    let below = count_below(diag, x);
    let mut best = f64::INFINITY;
    if below > 0 {
        best = best.min((x - eigenvalue(diag, below - 1)).abs());
    }
    if below < diag.len() {
        best = best.min((eigenvalue(diag, below) - x).abs());
    }
    best
}

/// True iff some eigenvalue lies in the open interval `(x - delta, x + delta)`.
pub fn has_eigenvalue_near(diag: &[f64], x: f64, delta: f64) -> bool {
    count_below(diag, x + delta) > count_below(diag, x - delta)
}

/// `ln |det(diag - x)|` from the three-term recurrence, rescaled to avoid overflow;
/// `-inf` for a singular matrix.
pub fn log_abs_det(diag: &[f64], x: f64) -> f64 {
    // p_k = (a_k - x) p_{k-1} - p_{k-2}
    let mut prev = 1.0f64;
    let mut cur = diag.first().map_or(1.0, |a| a - x);
    let mut log_scale = 0.0;
    for a in diag.iter().skip(1) {
        let next = (a - x) * cur - prev;
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            cur /= m;
            prev /= m;
            log_scale += m.ln();
        }
    }
    if cur == 0.0 {
        f64::NEG_INFINITY
    } else {
        cur.abs().ln() + log_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(diag: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else if i.abs_diff(j) == 1 { 1.0 } else { 0.0 })
    }

    fn sample(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 6.0
            })
            .collect()
    }

    #[test]
    fn free_chain_spectrum() {
        let ev = eigenvalues(&[0.0; 3]);
        let want = [-2f64.sqrt(), 0.0, 2f64.sqrt()];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_matches_dense_inverse() {
        for seed in 0..20 {
            let diag = sample(30, seed);
            let lu = TridiagLu::new(&diag, 0.3).unwrap();
            let m = dense(&diag) - DMatrix::identity(30, 30) * 0.3;
            let inv = m.try_inverse().unwrap();
            for j in [0, 7, 29] {
                let col = lu.column(j);
                for i in 0..30 {
                    assert!((col[i] - inv[(i, j)]).abs() < 1e-9 * (1.0 + inv[(i, j)].abs()));
                }
            }
        }
    }

    #[test]
    fn eigenvalues_match_dense() {
        for seed in 0..10 {
            let diag = sample(25, seed);
            let mut want: Vec<f64> = dense(&diag).symmetric_eigenvalues().iter().copied().collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in eigenvalues(&diag).iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn determinant_matches_dense() {
        for seed in 0..10 {
            let diag = sample(40, seed);
            let want = (dense(&diag) - DMatrix::identity(40, 40) * 0.1).determinant().abs().ln();
            assert!((log_abs_det(&diag, 0.1) - want).abs() < 1e-8);
        }
        assert_eq!(log_abs_det(&[0.0, 0.0, 0.0], 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn long_free_chain_determinant() {
        // det(T_n - E) = sinh((n+1)mu) / sinh(mu), E = -2 cosh(mu)
        let mu: f64 = 1.0;
        let e = -2.0 * mu.cosh();
        let n = 2000;
        let want = ((n + 1) as f64) * mu + (1.0 - (-2.0 * (n + 1) as f64 * mu).exp()).ln()
            - (mu.sinh() * 2.0).ln();
        assert!((log_abs_det(&vec![0.0; n], e) - want).abs() < 1e-9);
    }

    #[test]
    fn nearby_eigenvalue_detection() {
        let diag = [0.0; 3];
        assert!(has_eigenvalue_near(&diag, 0.05, 0.1));
        assert!(!has_eigenvalue_near(&diag, 0.5, 0.1));
        assert!((spectral_distance(&diag, 0.5) - 0.5).abs() < 1e-12);
    }
}
