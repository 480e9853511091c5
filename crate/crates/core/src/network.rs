//! Single-hidden-layer network emitting a (lower, upper) bound pair.
//!
//! All parameters live in one flat vector so derivative-free optimizers can
//! perturb them directly. Layout:
//!
//! ```text
//! [ W1 (hidden x input, row per hidden unit) | b1 (hidden) | W2 (2 x hidden, row per output) | b2 (2) ]
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const OUTPUTS: usize = 2;

/// A prediction interval in target units. Raw network output may be crossed
/// (`lower > upper`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lower: T, upper: T) -> Self {
        Self { lower, upper }
    }

    /// `upper - lower`, clamped at zero for crossed bounds.
    pub fn width(&self) -> T {
        (self.upper - self.lower).max(T::zero())
    }

    /// Closed-interval membership `lower <= target <= upper`; crossed bounds cover nothing.
    pub fn covers(&self, target: T) -> bool {
        self.lower <= target && target <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => T::one() / (T::one() + (-z).exp()),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "logistic" | "sigmoid" => Ok(Self::Logistic),
            other => Err(Error::param(format!("unknown activation `{other}`"))),
        }
    }
}

pub fn weight_count(input_dim: usize, hidden: usize) -> usize {
    input_dim * hidden + hidden + hidden * OUTPUTS + OUTPUTS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRecord<T> {
    input_dim: usize,
    hidden: usize,
    activation: Activation,
    weights: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord<T>", bound(deserialize = "T: Scalar"))]
pub struct MlpModel<T> {
    input_dim: usize,
    hidden: usize,
    activation: Activation,
    weights: Vec<T>,
}

impl<T: Scalar> TryFrom<MlpRecord<T>> for MlpModel<T> {
    type Error = Error;

    fn try_from(r: MlpRecord<T>) -> Result<Self> {
        Self::from_weights(r.input_dim, r.hidden, r.activation, r.weights)
    }
}

impl<T: Scalar> MlpModel<T> {
    /// A model with every weight set to zero.
    pub fn zeros(input_dim: usize, hidden: usize, activation: Activation) -> Result<Self> {
        Self::from_weights(input_dim, hidden, activation, vec![T::zero(); weight_count(input_dim, hidden)])
    }

    pub fn from_weights(input_dim: usize, hidden: usize, activation: Activation, weights: Vec<T>) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::param("input_dim and hidden must be positive"));
        }
        let expected = weight_count(input_dim, hidden);
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("weights must be finite"));
        }
        Ok(Self {
            input_dim,
            hidden,
            activation,
            weights,
        })
    }

    /// Weights drawn i.i.d. uniform in `[-scale, scale]` from a seeded stream.
    pub fn random(input_dim: usize, hidden: usize, activation: Activation, seed: u64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param("init scale must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-scale, scale).map_err(|e| Error::param(e.to_string()))?;
        let weights = (0..weight_count(input_dim, hidden))
            .map(|_| T::of(dist.sample(&mut rng)))
            .collect();
        Self::from_weights(input_dim, hidden, activation, weights)
    }

    /// Re-draws the weights of this architecture.
    pub fn reinitialized(&self, seed: u64, scale: f64) -> Result<Self> {
        Self::random(self.input_dim, self.hidden, self.activation, seed, scale)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    /// Same architecture, new parameters.
    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::from_weights(self.input_dim, self.hidden, self.activation, weights)
    }

    pub fn forward(&self, features: &[T]) -> Result<Interval<T>> {
        if features.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: features.len(),
            });
        }
        Ok(self.forward_unchecked(features))
    }

    #[inline]
    pub(crate) fn forward_unchecked(&self, x: &[T]) -> Interval<T> {
        let (d, h) = (self.input_dim, self.hidden);
        let (w1, rest) = self.weights.split_at(d * h);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h * OUTPUTS);
        let mut lower = b2[0];
        let mut upper = b2[1];
        for k in 0..h {
            let row = &w1[k * d..(k + 1) * d];
            let z = row.iter().zip(x).fold(b1[k], |acc, (&w, &xi)| acc + w * xi);
            let a = self.activation.apply(z);
            lower = lower + w2[k] * a;
            upper = upper + w2[h + k] * a;
        }
        Interval { lower, upper }
    }

    /// Applies [`forward`](Self::forward) to every row.
    pub fn predict_batch(&self, rows: &[Vec<T>]) -> Result<Vec<Interval<T>>> {
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        rows.iter().map(|r| self.forward(r)).collect()
    }

    pub fn predict_split(&self, split: &crate::dataset::Split<T>) -> Result<Vec<Interval<T>>> {
        self.predict_batch(split.inputs())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
