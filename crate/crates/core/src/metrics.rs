//! Prediction-interval quality measures.
//!
//! Widths are clamped at zero for crossed bounds. A crossed interval
//! (`lower > upper`) covers nothing: coverage is `lower <= t <= upper`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Interval;
use crate::scalar::Scalar;

/// Denominator guard for PINAFD when every target is covered.
pub const PINAFD_EPS: f64 = 1e-10;

/// Per-batch PI quality summary. Serializes as a flat record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiMetrics<T> {
    pub picp: T,
    pub pinaw: T,
    pub pinafd: T,
    pub ace: T,
    pub s_av: T,
    pub mid_dev: T,
    pub pun: T,
    pub n_misses: usize,
}

impl<T: Scalar> PiMetrics<T> {
    /// All metrics in one pass. `sigma_p` defaults to `1 / (n R)`.
    pub fn compute(targets: &[T], intervals: &[Interval<T>], range_r: T, alpha: T, sigma_p: Option<T>) -> Result<Self> {
        let n = check_lengths(targets, intervals)?;
        check_range(range_r)?;
        check_alpha(alpha)?;
        let nt = T::of_usize(n);
        let sigma_p = sigma_p.unwrap_or_else(|| T::one() / (nt * range_r));
        check_sigma_p(sigma_p)?;

        let two = T::of(2.0);
        let four = T::of(4.0);
        let mut covered = 0usize;
        let mut width_sum = T::zero();
        let mut fail_sum = T::zero();
        let mut score_sum = T::zero();
        let mut dev_sq = T::zero();
        let mut miss_sum = T::zero();
        for (&t, iv) in targets.iter().zip(intervals) {
            let w = iv.width();
            width_sum = width_sum + w;
            let below = (iv.lower - t).max(T::zero());
            let above = (t - iv.upper).max(T::zero());
            if iv.covers(t) {
                covered += 1;
            } else {
                fail_sum = fail_sum + failure_distance(t, iv);
            }
            miss_sum = miss_sum + below + above;
            score_sum = score_sum - two * alpha * w - four * (below + above);
            let mid = (iv.upper + iv.lower) / two;
            dev_sq = dev_sq + (t - mid) * (t - mid);
        }
        let n_misses = n - covered;
        let picp = T::of_usize(covered) / nt;
        Ok(Self {
            picp,
            pinaw: width_sum / (nt * range_r),
            pinafd: fail_sum / (range_r * T::of_usize(n_misses) + T::of(PINAFD_EPS)),
            ace: picp - (T::one() - alpha),
            s_av: score_sum / nt,
            mid_dev: dev_sq.sqrt(),
            pun: sigma_p * miss_sum,
            n_misses,
        })
    }

    pub fn to_f64(&self) -> PiMetrics<f64> {
        PiMetrics {
            picp: self.picp.to_f64_lossy(),
            pinaw: self.pinaw.to_f64_lossy(),
            pinafd: self.pinafd.to_f64_lossy(),
            ace: self.ace.to_f64_lossy(),
            s_av: self.s_av.to_f64_lossy(),
            mid_dev: self.mid_dev.to_f64_lossy(),
            pun: self.pun.to_f64_lossy(),
            n_misses: self.n_misses,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.picp, self.pinaw, self.pinafd, self.ace, self.s_av, self.mid_dev, self.pun]
            .iter()
            .all(|x| x.is_finite())
    }
}

#[inline]
fn failure_distance<T: Scalar>(t: T, iv: &Interval<T>) -> T {
    (t - iv.upper).abs().min((iv.lower - t).abs())
}

fn check_lengths<T>(targets: &[T], intervals: &[Interval<T>]) -> Result<usize> {
    if targets.len() != intervals.len() {
        return Err(Error::LengthMismatch(targets.len(), intervals.len()));
    }
    if targets.is_empty() {
        return Err(Error::Empty);
    }
    Ok(targets.len())
}

fn check_range<T: Scalar>(range_r: T) -> Result<()> {
    if range_r > T::zero() && range_r.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("range R must be positive, got {range_r}")))
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_sigma_p<T: Scalar>(sigma_p: T) -> Result<()> {
    if sigma_p > T::zero() && sigma_p.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("sigma_p must be positive, got {sigma_p}")))
    }
}

/// `c_j`: whether each target lies inside its interval.
pub fn coverage_flags<T: Scalar>(targets: &[T], intervals: &[Interval<T>]) -> Result<Vec<bool>> {
    check_lengths(targets, intervals)?;
    Ok(targets.iter().zip(intervals).map(|(&t, iv)| iv.covers(t)).collect())
}

pub fn picp<T: Scalar>(targets: &[T], intervals: &[Interval<T>]) -> Result<T> {
    let flags = coverage_flags(targets, intervals)?;
    let hits = flags.iter().filter(|&&c| c).count();
    Ok(T::of_usize(hits) / T::of_usize(flags.len()))
}

/// Mean width normalized by the target range `R`.
pub fn pinaw<T: Scalar>(intervals: &[Interval<T>], range_r: T) -> Result<T> {
    check_range(range_r)?;
    if intervals.is_empty() {
        return Err(Error::Empty);
    }
    let sum: T = intervals.iter().map(Interval::width).sum();
    Ok(sum / (T::of_usize(intervals.len()) * range_r))
}

/// Mean distance from each uncovered target to its nearer bound, over `R`.
pub fn pinafd<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, eps: T) -> Result<T> {
    check_lengths(targets, intervals)?;
    check_range(range_r)?;
    let (misses, dist) = targets
        .iter()
        .zip(intervals)
        .filter(|(&t, iv)| !iv.covers(t))
        .fold((0usize, T::zero()), |(m, d), (&t, iv)| (m + 1, d + failure_distance(t, iv)));
    Ok(dist / (range_r * T::of_usize(misses) + eps))
}

/// Average coverage error `PICP - PINC`.
pub fn ace<T: Scalar>(picp: T, pinc: T) -> T {
    picp - pinc
}

/// Mean interval score (negatively oriented; 0 is best).
pub fn interval_score<T: Scalar>(targets: &[T], intervals: &[Interval<T>], alpha: T) -> Result<T> {
    let n = check_lengths(targets, intervals)?;
    check_alpha(alpha)?;
    let two = T::of(2.0);
    let four = T::of(4.0);
    let sum: T = targets
        .iter()
        .zip(intervals)
        .map(|(&t, iv)| {
            let mut s = -two * alpha * iv.width();
            if t < iv.lower {
                s = s - four * (iv.lower - t);
            }
            if t > iv.upper {
                s = s - four * (t - iv.upper);
            }
            s
        })
        .sum();
    Ok(sum / T::of_usize(n))
}

/// Euclidean norm of target deviations from interval midpoints.
pub fn mid_deviation<T: Scalar>(targets: &[T], intervals: &[Interval<T>]) -> Result<T> {
    check_lengths(targets, intervals)?;
    let two = T::of(2.0);
    let sq: T = targets
        .iter()
        .zip(intervals)
        .map(|(&t, iv)| {
            let d = t - (iv.upper + iv.lower) / two;
            d * d
        })
        .sum();
    Ok(sq.sqrt())
}

/// Deviation penalty: `sigma_p` times the summed miss distances below and above.
pub fn pun<T: Scalar>(targets: &[T], intervals: &[Interval<T>], sigma_p: T) -> Result<T> {
    check_lengths(targets, intervals)?;
    check_sigma_p(sigma_p)?;
    let below: T = targets
        .iter()
        .zip(intervals)
        .filter(|(&t, iv)| t < iv.lower)
        .map(|(&t, iv)| iv.lower - t)
        .sum();
    let above: T = targets
        .iter()
        .zip(intervals)
        .filter(|(&t, iv)| t > iv.upper)
        .map(|(&t, iv)| t - iv.upper)
        .sum();
    Ok(sigma_p * below + sigma_p * above)
}

/// Default Zhang deviation factor `1 / (n R)`.
pub fn default_sigma_p<T: Scalar>(n: usize, range_r: T) -> T {
    T::one() / (T::of_usize(n) * range_r)
}
