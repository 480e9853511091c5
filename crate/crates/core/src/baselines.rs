//! Reference intervals that do not involve a network.

use serde::{Deserialize, Serialize};

use crate::dataset::standard_normal_quantile;
use crate::error::{Error, Result};
use crate::network::Interval;
use crate::scalar::Scalar;

/// Tabulated two-sided normal multipliers for 75%, 90% and 95% coverage.
const LAMBDA_TABLE: [(f64, f64); 3] = [(0.25, 1.15), (0.10, 1.64), (0.05, 1.96)];

/// Gaussian interval `mu ± lambda sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPiParams<T> {
    pub mu: T,
    pub sigma: T,
    pub lambda_alpha: T,
}

impl<T: Scalar> GaussianPiParams<T> {
    pub fn interval(&self) -> Result<Interval<T>> {
        if self.sigma < T::zero() || !self.sigma.is_finite() {
            return Err(Error::param("sigma must be non-negative"));
        }
        if self.lambda_alpha <= T::zero() {
            return Err(Error::param("multiplier must be positive"));
        }
        let half = self.lambda_alpha * self.sigma;
        Ok(Interval::new(self.mu - half, self.mu + half))
    }
}

/// Multiplier for `alpha`: the tabulated value when one exists, else `Φ⁻¹(1 - alpha/2)`.
pub fn lambda_for_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(LAMBDA_TABLE
        .iter()
        .find(|(a, _)| (a - alpha).abs() < 1e-12)
        .map_or_else(|| standard_normal_quantile(1.0 - alpha / 2.0), |&(_, l)| l))
}

pub fn traditional_pi<T: Scalar>(mu: T, sigma: T, alpha: f64) -> Result<Interval<T>> {
    GaussianPiParams {
        mu,
        sigma,
        lambda_alpha: T::of(lambda_for_alpha(alpha)?),
    }
    .interval()
}

/// Linearly interpolated quantile at position `p (n - 1)` of the sorted samples.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `[q(alpha/2), q(1 - alpha/2)]` of the empirical distribution.
///
/// `alpha = 1` collapses both bounds onto the median.
pub fn empirical_quantile_pi<T: Scalar>(samples: &[T], alpha: f64) -> Result<Interval<T>> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(format!("alpha must lie in (0,1], got {alpha}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(Interval::new(
        quantile_sorted(&sorted, alpha / 2.0),
        quantile_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}

/// Gaussian interval for each value after the first `window`, using the mean
/// and sample standard deviation of the preceding `window` values.
pub fn rolling_gaussian_pi<T: Scalar>(series: &[T], window: usize, alpha: f64) -> Result<Vec<Interval<T>>> {
    if window < 2 {
        return Err(Error::param("window must be at least 2"));
    }
    if series.len() <= window {
        return Err(Error::SeriesTooShort {
            needed: window + 1,
            got: series.len(),
        });
    }
    let lambda = T::of(lambda_for_alpha(alpha)?);
    let wn = T::of_usize(window);
    series
        .windows(window)
        .take(series.len() - window)
        .map(|w| {
            let mu = w.iter().copied().sum::<T>() / wn;
            let ss: T = w.iter().map(|&x| (x - mu) * (x - mu)).sum();
            let sigma = (ss / (wn - T::one())).sqrt();
            GaussianPiParams {
                mu,
                sigma,
                lambda_alpha: lambda,
            }
            .interval()
        })
        .collect()
}
