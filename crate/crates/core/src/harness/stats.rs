use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_for, tags};

/// Least-squares slope of `log(gap)` against `log(mT)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Data(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Data(format!("slope fit needs positive finite values, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("slope fit needs at least two distinct mT values".into()));
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (zero for a single value).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Fraction of paired bootstrap resamples (instances drawn with replacement)
/// whose mean of `lower` exceeds the mean of `upper`.
pub fn ordering_violation_rate(lower: &[f64], upper: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::Data(format!("paired samples of lengths {} and {}", lower.len(), upper.len())));
    }
    if resamples == 0 {
        return Err(Error::Parameter("need at least one bootstrap resample".into()));
    }
    let n = lower.len();
    let mut rng = rng_for(&[seed, tags::BOOTSTRAP]);
    let mut violations = 0;
    for _ in 0..resamples {
        let mut diff = 0.0;
        for _ in 0..n {
            let k = rng.random_range(0..n);
            diff += lower[k] - upper[k];
        }
        if diff > 0.0 {
            violations += 1;
        }
    }
    Ok(violations as f64 / resamples as f64)
}
