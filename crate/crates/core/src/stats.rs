//! Small descriptive statistics and least-squares fitting.

use serde::Serialize;

/// Sample mean and unbiased sample variance. Variance is 0 for fewer than two
/// values.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    let (_, v) = mean_var(xs);
    (v / xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile (Hyndman & Fan type 7) of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Standard error of the unbiased sample variance, `sqrt((m4 - s^4) / n)`.
pub fn variance_std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mean, var) = mean_var(xs);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - var * var).max(0.0) / n).sqrt()
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with fewer than three points.
    pub slope_se: Option<f64>,
    pub r_squared: f64,
    pub points: usize,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let slope_se = (xs.len() > 2).then(|| (ssr / (m - 2.0) / sxx).sqrt());
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        r_squared,
        points: xs.len(),
    })
}

/// Fit `log y = c + slope * log x`. Points with non-positive coordinates are
/// rejected (returns `None`).
pub fn loglog_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    ols(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_recovers_exponent() {
        let pts: Vec<(f64, f64)> = (8..=14)
            .map(|e| {
                let n = (1u64 << e) as f64;
                (n, 2.0 * n.powf(1.5))
            })
            .collect();
        let fit = loglog_fit(&pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-10);
        assert!(fit.slope_se.unwrap() < 1e-10);

        let pts: Vec<(f64, f64)> = (3..=20).map(|n| (n as f64, (n as f64).powf(1.25))).collect();
        assert!((loglog_fit(&pts).unwrap().slope - 1.25).abs() < 1e-12);
    }

    #[test]
    fn quantile_type7() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&xs), 2.5);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((quantile(&xs, 0.9) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn mean_var_small_inputs() {
        assert_eq!(mean_var(&[3.0]), (3.0, 0.0));
        let (m, v) = mean_var(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(v, 1.0);
        assert!(ols(&[1.0], &[1.0]).is_none());
        assert!(loglog_fit(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }
}
