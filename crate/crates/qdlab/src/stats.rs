//! Least squares fits and small descriptive statistics.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Weighted least squares line through `(x_i, y_i)`.
pub fn weighted_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::invalid("fit inputs differ in length"));
    }
    let sw: f64 = w.iter().sum();
    if x.len() < 2 || sw <= 0.0 {
        return Err(Error::Degenerate("need at least two weighted points".into()));
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((&a, &b), &c) in x.iter().zip(y).zip(w) {
        sxx += c * (a - mx) * (a - mx);
        sxy += c * (a - mx) * (b - my);
        syy += c * (b - my) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LineFit { slope, intercept: my - slope * mx, r_squared, n: x.len() })
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    weighted_fit(x, y, &vec![1.0; x.len()])
}

/// Regression weights `(x_i - x̄)/Sxx`: the slope is `Σ w_i y_i`.
pub fn slope_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    x.iter().map(|a| (a - mx) / sxx).collect()
}

/// Slope interval when each `y_i` is only known to lie in `[lo_i, hi_i]`.
pub fn slope_interval(x: &[f64], lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let w = slope_weights(x);
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..w.len() {
        if w[i] >= 0.0 {
            a += w[i] * lo[i];
            b += w[i] * hi[i];
        } else {
            a += w[i] * hi[i];
            b += w[i] * lo[i];
        }
    }
    (a, b)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Binomial proportion with a `z`-sigma bracket (Wilson score interval).
pub fn wilson(hits: usize, n: usize, z: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (0.0, 0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    (p, (centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let (a, b) = slope_interval(&x, &y, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (p, lo, hi) = wilson(30, 100, 3.0);
        assert!(lo < p && p < hi);
        let (_, lo, hi) = wilson(0, 100, 3.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }
}
