//! Time-series ingestion, lag windows, chronological splits and synthetic
//! series with known conditional quantiles.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Hours since midnight (UTC) as `hour + minutes/60`, in `[0, 24)`.
pub fn time_of_day(timestamp: i64) -> f64 {
    timestamp.rem_euclid(SECONDS_PER_DAY) as f64 / 3600.0
}

/// A univariate series indexed by strictly increasing epoch seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch(timestamps.len(), values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadRows(format!("value at index {i} is not finite")));
        }
        let dups: Vec<String> = timestamps
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] <= w[0])
            .map(|(i, w)| format!("index {} ({} after {})", i + 1, w[1], w[0]))
            .collect();
        if !dups.is_empty() {
            return Err(Error::DuplicateTimestamps(dups.join(", ")));
        }
        Ok(Self { timestamps, values })
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reads a series from a headered CSV file and sorts it by timestamp.
///
/// Every unparseable row is reported by its line number; duplicate timestamps
/// are reported with the lines that carry them.
pub fn load_csv(path: impl AsRef<Path>, time_col: &str, value_col: &str) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, time_col, value_col)
}

pub fn read_csv<R: std::io::Read>(reader: R, time_col: &str, value_col: &str) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ti = col(time_col)?;
    let vi = col(value_col)?;

    // (timestamp, value, line)
    let mut rows: Vec<(i64, f64, u64)> = Vec::new();
    let mut bad = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let t = record.get(ti).and_then(parse_timestamp);
        let v = record
            .get(vi)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite());
        match (t, v) {
            (Some(t), Some(v)) => rows.push((t, v, line)),
            _ => bad.push(format!("row {line}")),
        }
    }
    if !bad.is_empty() {
        return Err(Error::BadRows(bad.join(", ")));
    }
    rows.sort_by_key(|r| r.0);
    let dups: Vec<String> = rows
        .windows(2)
        .filter(|w| w[0].0 == w[1].0)
        .map(|w| format!("timestamp {} at rows {} and {}", w[1].0, w[0].2, w[1].2))
        .collect();
    if !dups.is_empty() {
        return Err(Error::DuplicateTimestamps(dups.join(", ")));
    }
    let (timestamps, values) = rows.into_iter().map(|(t, v, _)| (t, v)).unzip();
    TimeSeries::new(timestamps, values)
}

fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    s.parse::<i64>().ok().or_else(|| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite() && x.fract() == 0.0)
            .map(|x| x as i64)
    })
}

/// Writes the series with the given header names.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>, time_col: &str, value_col: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([time_col, value_col])?;
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        w.write_record([t.to_string(), format!("{v:?}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One supervised sample: lagged values plus time of day, and the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow<T> {
    /// `[v_{k}, .., v_{k+lags-1}, time_of_day]` in raw units (hours for the last entry).
    pub features: Vec<T>,
    pub target: T,
    /// Index of the target in the source series.
    pub target_index: usize,
    pub timestamp: i64,
    pub time_of_day: f64,
}

pub fn make_windows<T: Scalar>(series: &TimeSeries, lags: usize, horizon: usize) -> Result<Vec<SampleWindow<T>>> {
    if lags == 0 || horizon == 0 {
        return Err(Error::param("lags and horizon must be at least 1"));
    }
    let needed = lags + horizon;
    if series.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            got: series.len(),
        });
    }
    let values = series.values();
    let count = series.len() - lags - horizon + 1;
    Ok((0..count)
        .map(|k| {
            let target_index = k + lags + horizon - 1;
            let timestamp = series.timestamps()[target_index];
            let tod = time_of_day(timestamp);
            let mut features: Vec<T> = values[k..k + lags].iter().map(|&v| T::of(v)).collect();
            features.push(T::of(tod));
            SampleWindow {
                features,
                target: T::of(values[target_index]),
                target_index,
                timestamp,
                time_of_day: tod,
            }
        })
        .collect())
}

/// Per-feature affine map `x -> (x - offset) / span`.
///
/// Lag features are fitted to the training min/max; time of day is divided by 24.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxNorm<T> {
    pub offset: Vec<T>,
    pub span: Vec<T>,
}

impl<T: Scalar> MinMaxNorm<T> {
    /// Fits on `windows`, treating the last feature as time of day.
    pub fn fit(windows: &[SampleWindow<T>]) -> Result<Self> {
        let first = windows.first().ok_or(Error::Empty)?;
        let dim = first.features.len();
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for w in windows {
            for (j, &x) in w.features.iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        let mut offset = Vec::with_capacity(dim);
        let mut span = Vec::with_capacity(dim);
        for j in 0..dim {
            if j + 1 == dim {
                offset.push(T::zero());
                span.push(T::of(24.0));
            } else {
                let s = hi[j] - lo[j];
                offset.push(lo[j]);
                span.push(if s > T::zero() { s } else { T::one() });
            }
        }
        Ok(Self { offset, span })
    }

    pub fn apply(&self, features: &[T]) -> Vec<T> {
        features
            .iter()
            .zip(self.offset.iter().zip(&self.span))
            .map(|(&x, (&o, &s))| (x - o) / s)
            .collect()
    }

    pub fn invert(&self, normalized: &[T]) -> Vec<T> {
        normalized
            .iter()
            .zip(self.offset.iter().zip(&self.span))
            .map(|(&x, (&o, &s))| x * s + o)
            .collect()
    }
}

/// A contiguous block of windows plus its normalized input matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split<T> {
    pub windows: Vec<SampleWindow<T>>,
    inputs: Vec<Vec<T>>,
    targets: Vec<T>,
}

impl<T: Scalar> Split<T> {
    fn new(windows: Vec<SampleWindow<T>>, norm: &MinMaxNorm<T>) -> Self {
        let inputs = windows.iter().map(|w| norm.apply(&w.features)).collect();
        let targets = windows.iter().map(|w| w.target).collect();
        Self {
            windows,
            inputs,
            targets,
        }
    }

    /// Normalized network inputs, one row per window.
    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub train: Split<T>,
    pub validation: Split<T>,
    pub test: Split<T>,
    /// `max(target) - min(target)` over the training split.
    pub range_r: T,
    pub norm: MinMaxNorm<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn input_dim(&self) -> usize {
        self.train.input_dim()
    }
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Splits windows chronologically into train/validation/test.
///
/// Counts are `round(n * f_train)` and `round(n * f_val)`, with the remainder
/// going to test. Normalization and `R` are fitted on train only.
pub fn split_chronological<T: Scalar>(windows: Vec<SampleWindow<T>>, fractions: (f64, f64, f64)) -> Result<Dataset<T>> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSplit(format!(
            "fractions ({ft}, {fv}, {fs}) must lie in [0,1] and sum to 1"
        )));
    }
    let n = windows.len();
    let n_train = (n as f64 * ft).round() as usize;
    let n_val = ((n as f64 * fv).round() as usize).min(n.saturating_sub(n_train));
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidSplit(format!(
            "{n} windows give empty split ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut rest = windows;
    let tail = rest.split_off(n_train);
    let train = rest;
    let mut val = tail;
    let test = val.split_off(n_val);

    let (lo, hi) = train
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), w| (lo.min(w.target), hi.max(w.target)));
    let range_r = hi - lo;
    if range_r <= T::zero() {
        return Err(Error::InvalidSplit("training targets have zero range".into()));
    }
    let norm = MinMaxNorm::fit(&train)?;
    Ok(Dataset {
        train: Split::new(train, &norm),
        validation: Split::new(val, &norm),
        test: Split::new(test, &norm),
        range_r,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    GaussianHeteroscedastic,
    LognormalSkewed,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-heteroscedastic" | "gaussian" => Ok(Self::GaussianHeteroscedastic),
            "lognormal-skewed" | "lognormal" => Ok(Self::LognormalSkewed),
            other => Err(Error::param(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub length: usize,
    /// Samples per cycle; one cycle spans one day of timestamps.
    pub period: usize,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            length: 5000,
            period: 288,
            noise_kind: NoiseKind::GaussianHeteroscedastic,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.period < 8 {
            return Err(Error::param("period must be at least 8"));
        }
        if self.period as i64 > SECONDS_PER_DAY {
            return Err(Error::param("period cannot exceed one sample per second"));
        }
        if self.length <= self.period {
            return Err(Error::param("length must exceed period"));
        }
        Ok(())
    }
}

/// Noise scale of the synthetic generator at seasonal level `s`.
pub fn synth_sigma(s: f64) -> f64 {
    0.05 + 0.15 * s.abs()
}

/// Exact conditional quantiles of a generated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileOracle {
    kind: NoiseKind,
    seasonal: Vec<f64>,
}

impl QuantileOracle {
    pub fn seasonal(&self, index: usize) -> f64 {
        self.seasonal[index]
    }

    pub fn sigma(&self, index: usize) -> f64 {
        synth_sigma(self.seasonal[index])
    }

    pub fn len(&self) -> usize {
        self.seasonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seasonal.is_empty()
    }

    /// The `p`-quantile of the value at `index`.
    pub fn quantile(&self, index: usize, p: f64) -> f64 {
        let s = self.seasonal[index];
        quantile_at(self.kind, s, p)
    }

    /// Central `1 - alpha` interval `[q(alpha/2), q(1 - alpha/2)]`.
    pub fn interval(&self, index: usize, alpha: f64) -> (f64, f64) {
        (self.quantile(index, alpha / 2.0), self.quantile(index, 1.0 - alpha / 2.0))
    }

    /// PINAW of the oracle intervals over the targets of `split`.
    pub fn pinaw<T: Scalar>(&self, split: &Split<T>, range_r: T, alpha: f64) -> Result<f64> {
        if split.is_empty() {
            return Err(Error::Empty);
        }
        let total: f64 = split
            .windows
            .iter()
            .map(|w| {
                let (lo, hi) = self.interval(w.target_index, alpha);
                hi - lo
            })
            .sum();
        Ok(total / (split.len() as f64 * range_r.to_f64_lossy()))
    }
}

/// Quantile of `s + sigma(s) * noise` for the given noise family.
pub fn quantile_at(kind: NoiseKind, s: f64, p: f64) -> f64 {
    let z = standard_normal_quantile(p);
    let sigma = synth_sigma(s);
    match kind {
        NoiseKind::GaussianHeteroscedastic => s + sigma * z,
        NoiseKind::LognormalSkewed => s + sigma * ((0.5 * z).exp() - 0.125f64.exp()),
    }
}

pub fn standard_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Generates a seasonal series with heteroscedastic noise and its quantile oracle.
///
/// Timestamps advance by `86400 / period` seconds so one period is one day.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(TimeSeries, QuantileOracle)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let step = SECONDS_PER_DAY as f64 / spec.period as f64;
    let mean_shift = 0.125f64.exp();
    let mut timestamps = Vec::with_capacity(spec.length);
    let mut values = Vec::with_capacity(spec.length);
    let mut seasonal = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let s = (std::f64::consts::TAU * t as f64 / spec.period as f64).sin();
        let z: f64 = StandardNormal.sample(&mut rng);
        let noise = match spec.noise_kind {
            NoiseKind::GaussianHeteroscedastic => z,
            NoiseKind::LognormalSkewed => (0.5 * z).exp() - mean_shift,
        };
        timestamps.push((t as f64 * step).round() as i64);
        values.push(s + synth_sigma(s) * noise);
        seasonal.push(s);
    }
    Ok((
        TimeSeries::new(timestamps, values)?,
        QuantileOracle {
            kind: spec.noise_kind,
            seasonal,
        },
    ))
}

/// Windows a series with `lags`/`horizon` and splits it with `fractions`.
pub fn build_dataset<T: Scalar>(
    series: &TimeSeries,
    lags: usize,
    horizon: usize,
    fractions: (f64, f64, f64),
) -> Result<Dataset<T>> {
    split_chronological(make_windows(series, lags, horizon)?, fractions)
}
