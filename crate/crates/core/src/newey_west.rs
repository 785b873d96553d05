//! Newey-West (Bartlett kernel) standard errors.

use crate::error::{Error, Result};
use crate::linalg::{LeastSquares, Matrix};
use crate::stats;

/// Magnitude reported for a t statistic whose standard error is zero.
pub const T_STAT_CAP: f64 = 1.0e6;

/// Lag selection for HAC standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagRule {
    Fixed(usize),
    /// floor(4 (T/100)^(2/9))
    Auto,
}

impl Default for LagRule {
    fn default() -> Self {
        LagRule::Fixed(4)
    }
}

impl LagRule {
    /// Lag for a series of length `t`, capped at `t - 1`.
    pub fn resolve(self, t: usize) -> usize {
        let l = match self {
            LagRule::Fixed(l) => l,
            LagRule::Auto => auto_lag(t),
        };
        l.min(t.saturating_sub(1))
    }
}

impl std::fmt::Display for LagRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LagRule::Fixed(l) => write!(f, "{l}"),
            LagRule::Auto => f.write_str("auto"),
        }
    }
}

pub fn auto_lag(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

fn bartlett(l: usize, lag: usize) -> f64 {
    1.0 - l as f64 / (lag as f64 + 1.0)
}

/// Long-run variance of the sample mean: (1/T)[g0 + 2 sum w_l g_l] with
/// demeaned autocovariances normalised by 1/T. Negative values clamp to 0.
pub fn newey_west_variance(series: &[f64], lag: usize) -> Result<f64> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InsufficientData {
            what: "Newey-West series",
            needed: 2,
            available: t,
        });
    }
    if lag >= t {
        return Err(Error::InvalidConfig(format!(
            "Newey-West lag {lag} must be below series length {t}"
        )));
    }
    let m = stats::mean(series);
    let d: Vec<f64> = series.iter().map(|x| x - m).collect();
    let gamma = |l: usize| d[l..].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / t as f64;
    let mut s = gamma(0);
    for l in 1..=lag {
        s += 2.0 * bartlett(l, lag) * gamma(l);
    }
    let var = s / t as f64;
    if var < 0.0 {
        tracing::warn!(var, lag, "negative Newey-West variance clamped to zero");
        return Ok(0.0);
    }
    Ok(var)
}

/// Standard error of the mean of `series`.
pub fn newey_west_se(series: &[f64], lag: usize) -> Result<f64> {
    newey_west_variance(series, lag).map(f64::sqrt)
}

/// `mean / se`, with a signed cap when the standard error vanishes relative
/// to the mean (rounding noise from a constant series counts as zero).
pub fn t_stat(mean: f64, se: f64) -> f64 {
    if se.is_finite() && se > 64.0 * f64::EPSILON * mean.abs() {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * T_STAT_CAP
    }
}

/// HAC covariance of OLS coefficients, row-major p x p:
/// (X'X)^-1 S (X'X)^-1 with S = G0 + sum w_l (G_l + G_l'), G_l = sum_t u_t u_{t-l}'.
pub fn ols_hac_covariance(x: &Matrix, fit: &LeastSquares, lag: usize) -> Vec<f64> {
    let (n, p) = (x.rows(), x.cols());
    let u: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..p).map(|j| x.get(i, j) * fit.residuals[i]).collect())
        .collect();
    let mut s = vec![0.0; p * p];
    for l in 0..=lag.min(n.saturating_sub(1)) {
        let w = if l == 0 { 1.0 } else { bartlett(l, lag) };
        for i in l..n {
            for a in 0..p {
                for b in 0..p {
                    let g = u[i][a] * u[i - l][b];
                    s[a * p + b] += w * g;
                    if l > 0 {
                        s[b * p + a] += w * g;
                    }
                }
            }
        }
    }
    let inv = fit.xtx_inverse();
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| a[i * p + k] * b[k * p + j]).sum();
            }
        }
        out
    };
    mul(&mul(&inv, &s), &inv)
}
