use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nondecreasing `M: [0, inf) -> [1, inf)` with `M(0) = 1`, stored through `log M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Majorant {
    /// `log M(t) = coef * t^exponent`.
    PowerLog { coef: f64, exponent: f64 },
    /// `(t, M(t))` knots starting at `(0, 1)`; `log M` is linear between knots and
    /// continues as `log M(t_last) * (t / t_last)^tail_exponent` beyond them.
    Table { points: Vec<(f64, f64)>, tail_exponent: f64 },
}

const QUAD_TOL: f64 = 1e-13;

impl Majorant {
    /// `M(t) = exp(sqrt(t))`.
    pub fn sqrt() -> Self {
        Majorant::PowerLog { coef: 1.0, exponent: 0.5 }
    }

    /// `M(t) = exp(2 C t^zeta)`.
    pub fn exponential(c: f64, zeta: f64) -> Result<Self> {
        if !(c > 0.0 && zeta > 0.0) {
            return Err(Error::InvalidParameter("exponential majorant needs C > 0 and zeta > 0".into()));
        }
        Ok(Majorant::PowerLog { coef: 2.0 * c, exponent: zeta })
    }

    pub fn table(points: Vec<(f64, f64)>, tail_exponent: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("majorant table needs at least two knots".into()));
        }
        if points[0] != (0.0, 1.0) {
            return Err(Error::InvalidParameter("majorant table must start at (0, 1)".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 >= w[0].1) || !w[1].1.is_finite() {
                return Err(Error::InvalidParameter(
                    "majorant knots must have increasing t and nondecreasing finite M".into(),
                ));
            }
        }
        if !(points[points.len() - 1].1 > 1.0) {
            return Err(Error::InvalidParameter("majorant table must exceed 1 at its last knot".into()));
        }
        if !(tail_exponent > 0.0) {
            return Err(Error::InvalidParameter("tail exponent must be positive".into()));
        }
        if tail_exponent >= 1.0 {
            return Err(Error::MajorantTooLarge);
        }
        Ok(Majorant::Table { points, tail_exponent })
    }

    /// `sqrt(M)`.
    pub fn half(&self) -> Self {
        match self {
            Majorant::PowerLog { coef, exponent } => Majorant::PowerLog { coef: coef / 2.0, exponent: *exponent },
            Majorant::Table { points, tail_exponent } => Majorant::Table {
                points: points.iter().map(|&(t, m)| (t, m.sqrt())).collect(),
                tail_exponent: *tail_exponent,
            },
        }
    }

    pub fn log_m(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            Majorant::PowerLog { coef, exponent } => coef * t.powf(*exponent),
            Majorant::Table { points, tail_exponent } => {
                let (t_last, m_last) = points[points.len() - 1];
                if t >= t_last {
                    return m_last.ln() * (t / t_last).powf(*tail_exponent);
                }
                let i = points.partition_point(|p| p.0 <= t) - 1;
                let (t0, m0) = points[i];
                let (t1, m1) = points[i + 1];
                let (l0, l1) = (m0.ln(), m1.ln());
                l0 + (l1 - l0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.log_m(t).exp()
    }

    fn check_convergent(&self) -> Result<()> {
        if let Majorant::PowerLog { exponent, .. } = self {
            if *exponent >= 1.0 {
                return Err(Error::MajorantTooLarge);
            }
        }
        Ok(())
    }

    /// `S(t) = int_t^inf log M(tau) / tau^2 dtau`.
    pub fn s_of(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("S needs t > 0, got {t}")));
        }
        self.check_convergent()?;
        match self {
            Majorant::PowerLog { coef, exponent } => Ok(coef * t.powf(exponent - 1.0) / (1.0 - exponent)),
            Majorant::Table { points, tail_exponent } => {
                let (t_last, m_last) = points[points.len() - 1];
                let mut acc = 0.0;
                for w in points.windows(2) {
                    let (a, b) = (w[0].0.max(t), w[1].0);
                    if a < b {
                        acc += quadrature::integrate(|x| self.log_m(x) / (x * x), a, b, QUAD_TOL).integral;
                    }
                }
                let q = *tail_exponent;
                let start = t.max(t_last);
                acc += m_last.ln() * t_last.powf(-q) * start.powf(q - 1.0) / (1.0 - q);
                Ok(acc)
            }
        }
    }

    /// `S(t)` by double-exponential quadrature of `(2/t) int_0^1 u log M(t/u^2) du`,
    /// independent of the closed forms.
    pub fn s_by_quadrature(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("S needs t > 0, got {t}")));
        }
        self.check_convergent()?;
        if let Majorant::Table { .. } = self {
            return self.s_of(t);
        }
        let out =
            quadrature::integrate(|u| if u > 0.0 { u * self.log_m(t / (u * u)) } else { 0.0 }, 0.0, 1.0, QUAD_TOL);
        Ok(2.0 * out.integral / t)
    }

    /// `lim_{t -> 0} S(t)` (infinite unless `M` is flat near the origin).
    pub fn s_at_zero(&self) -> Result<f64> {
        self.check_convergent()?;
        match self {
            Majorant::PowerLog { .. } => Ok(f64::INFINITY),
            Majorant::Table { points, .. } => {
                if points[1].1 > 1.0 {
                    Ok(f64::INFINITY)
                } else {
                    let flat_end = points.iter().take_while(|p| p.1 <= 1.0).last().map(|p| p.0).unwrap_or(0.0);
                    self.s_of(flat_end)
                }
            }
        }
    }

    /// `t` with `S(t) = y`.
    pub fn s_inverse(&self, y: f64) -> Result<f64> {
        self.check_convergent()?;
        let top = self.s_at_zero()?;
        if !(y > 0.0 && y < top) {
            return Err(Error::OutOfRange { value: y, range: format!("0, {top}") });
        }
        match self {
            Majorant::PowerLog { coef, exponent } => {
                Ok((coef / ((1.0 - exponent) * y)).powf(1.0 / (1.0 - exponent)))
            }
            Majorant::Table { .. } => {
                // S is decreasing; bracket then bisect
                let mut lo = 1e-300f64.max(f64::MIN_POSITIVE);
                let mut hi = 1.0;
                while self.s_of(hi)? > y {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::OutOfRange { value: y, range: format!("0, {top}") });
                    }
                }
                let mut probe = hi / 2.0;
                while probe > lo && self.s_of(probe)? <= y {
                    hi = probe;
                    probe /= 2.0;
                }
                lo = lo.max(probe);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.s_of(mid)? > y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * hi {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// `R_j = min{t >= 0 : M(t) = e^j}`.
    pub fn radius(&self, j: u32) -> Result<f64> {
        let target = j as f64;
        match self {
            Majorant::PowerLog { coef, exponent } => Ok((target / coef).powf(1.0 / exponent)),
            Majorant::Table { .. } => {
                if target == 0.0 {
                    return Ok(0.0);
                }
                let mut hi = 1.0;
                while self.log_m(hi) < target {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::InvalidParameter(format!("majorant never reaches e^{j}")));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.log_m(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-14 * hi {
                        break;
                    }
                }
                Ok(hi)
            }
        }
    }

    /// Largest admissible `epsilon`: `min(1/2, (e/2) S(0+))`.
    pub fn eps_max(&self) -> Result<f64> {
        Ok((std::f64::consts::E / 2.0 * self.s_at_zero()?).min(0.5))
    }
}
