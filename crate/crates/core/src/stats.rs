//! Small numeric helpers shared by the fitting routines.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
///
/// With fewer than two distinct abscissae the slope is 0 and `r_squared` is 1
/// when the data are constant.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len()) as f64;
    if n == 0.0 {
        return LinearFit { slope: 0.0, intercept: 0.0, r_squared: 1.0, rms_residual: 0.0 };
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit { slope, intercept, r_squared, rms_residual: (sse / n).sqrt() }
}

/// Median of a nonempty slice (mean of the two central values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
