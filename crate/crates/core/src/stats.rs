//! Least-squares fits and confidence intervals for experiment summaries.

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1.0 for an exact fit.
    pub r2: f64,
    /// Standard error of the slope (0.0 when there are no residual degrees
    /// of freedom).
    pub stderr_slope: f64,
}

/// Fit `y = intercept + slope * x` by least squares. Requires at least three
/// points with at least two distinct `x` values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientEvents(format!(
            "need at least 3 points for a line fit, got {n}"
        )));
    }
    let nf = n as f64;
    let xbar = xs.iter().sum::<f64>() / nf;
    let ybar = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientEvents(
            "need at least 2 distinct x values for a line fit".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let stderr_slope =
        if n > 2 && ss_res > 0.0 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, r2, stderr_slope })
}

/// Wilson score interval for a binomial proportion at 95% confidence.
/// Returns `(0, 1)` for zero trials.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(successes <= trials);
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Sample mean and (n-1)-normalized standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Normal-approximation 95% confidence interval for the mean.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let (mean, std) = mean_std(values);
    let half = Z95 * std / (values.len() as f64).sqrt();
    (mean, mean - half, mean + half)
}

/// Linearly interpolated quantile (`q` in [0, 1]) of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Median with interquartile range `(median, q1, q3)`.
pub fn median_iqr(values: &[f64]) -> (f64, f64, f64) {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.75),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.stderr_slope < 1e-9);
    }

    #[test]
    fn noisy_line_estimates_are_sane() {
        // Deterministic pseudo-noise around slope 2.
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> =
            xs.iter().enumerate().map(|(i, x)| 2.0 * x + 1.0 + 0.3 * ((i * 37 % 11) as f64 / 11.0 - 0.5)).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 0.05);
        assert!(f.r2 > 0.99);
        assert!(f.stderr_slope > 0.0);
        // The true slope lies within a few standard errors.
        assert!((f.slope - 2.0).abs() < 4.0 * f.stderr_slope + 0.05);
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        assert!(matches!(
            linear_fit(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientEvents(_))
        ));
        assert!(matches!(
            linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::InsufficientEvents(_))
        ));
    }

    #[test]
    fn wilson_matches_reference_values() {
        // k=5, n=10: classic reference interval (0.2366, 0.7635).
        let (lo, hi) = wilson_interval(5, 10);
        assert!((lo - 0.2366).abs() < 5e-4, "lo={lo}");
        assert!((hi - 0.7634).abs() < 5e-4, "hi={hi}");
        // Extremes stay inside [0, 1] and bracket the point estimate.
        let (lo, hi) = wilson_interval(0, 20);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
        let (lo, hi) = wilson_interval(20, 20);
        assert!(lo > 0.8 && lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn wilson_covers_truth_at_nominal_rate() {
        // For p=0.3, n=200, the interval from the binomial mean count must
        // contain p (sanity of centering, not a simulation).
        let (lo, hi) = wilson_interval(60, 200);
        assert!(lo < 0.3 && 0.3 < hi);
    }

    #[test]
    fn mean_ci_brackets_mean() {
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (m, lo, hi) = mean_ci(&vals);
        assert_eq!(m, 3.0);
        assert!(lo < 3.0 && 3.0 < hi);
        let (_, s) = mean_std(&vals);
        assert!((s - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn median_and_quartiles() {
        let vals = [5.0, 1.0, 3.0, 2.0, 4.0];
        let (med, q1, q3) = median_iqr(&vals);
        assert_eq!(med, 3.0);
        assert_eq!(q1, 2.0);
        assert_eq!(q3, 4.0);
        let (med, _, _) = median_iqr(&[1.0, 2.0]);
        assert_eq!(med, 1.5);
    }
}
