//! Simulated-annealing training of interval networks.
//!
//! Candidates are scored on the training split. Every iteration also records
//! validation PICP/PINAW of the current state, which feeds the convergence
//! milestones.

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::metrics::PiMetrics;
use crate::network::{Activation, MlpModel};
use crate::scalar::Scalar;

/// Logical PIs need `PICP >= 1 - LOGICAL_ALPHA_MULTIPLE * alpha`.
pub const LOGICAL_ALPHA_MULTIPLE: f64 = 2.0;
/// Logical PIs need `0 < PINAW < LOGICAL_PINAW_MAX`.
pub const LOGICAL_PINAW_MAX: f64 = 0.9;
/// PICP milestone: `|1 - alpha + delta - PICP| < PICP_MILESTONE_TOL`.
pub const PICP_MILESTONE_TOL: f64 = 0.01;
/// PINAW milestone: `PINAW < PINAW_MILESTONE_FACTOR * PINAW_final`.
pub const PINAW_MILESTONE_FACTOR: f64 = 1.5;
pub const DEFAULT_INIT_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealConfig {
    pub max_iters: usize,
    /// Initial temperature.
    pub t0: f64,
    /// Geometric cooling factor; `T_k = t0 * cooling^k`.
    pub cooling: f64,
    /// Perturbation std at `T = t0`; scales linearly with temperature.
    pub step_scale: f64,
    pub perturb_fraction: f64,
    pub seed: u64,
    pub restarts: usize,
    pub init_scale: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            t0: 1.0,
            cooling: 0.995,
            step_scale: 0.1,
            perturb_fraction: 0.2,
            seed: 0,
            restarts: 4,
            init_scale: DEFAULT_INIT_SCALE,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::param("cooling must lie in (0,1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::param("step_scale must be positive"));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::param("t0 must be positive"));
        }
        if !(self.perturb_fraction > 0.0 && self.perturb_fraction <= 1.0) {
            return Err(Error::param("perturb_fraction must lie in (0,1]"));
        }
        if self.init_scale.is_nan() || self.init_scale <= 0.0 {
            return Err(Error::param("init_scale must be positive"));
        }
        Ok(())
    }

    pub fn temperature(&self, k: usize) -> f64 {
        self.t0 * self.cooling.powi(k as i32)
    }

    /// Number of coordinates moved per proposal: `ceil(fraction * len)`, at least one.
    pub fn perturb_count(&self, len: usize) -> usize {
        ((self.perturb_fraction * len as f64 - 1e-9).ceil() as usize).clamp(1, len.max(1))
    }
}

/// Mixes a master seed with stream identifiers (splitmix64 finalizer).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut x = master;
    for &p in parts {
        x ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

/// Moves a random subset of coordinates by Gaussian noise of std
/// `step_scale * temperature / t0`.
pub fn propose_neighbor<T: Scalar, R: Rng + ?Sized>(
    weights: &[T],
    config: &AnnealConfig,
    temperature: f64,
    rng: &mut R,
) -> Vec<T> {
    let mut out = weights.to_vec();
    if out.is_empty() {
        return out;
    }
    let std = config.step_scale * temperature / config.t0;
    let k = config.perturb_count(out.len());
    for i in index::sample(rng, out.len(), k) {
        let z: f64 = StandardNormal.sample(rng);
        out[i] = out[i] + T::of(std * z);
    }
    out
}

/// Metropolis rule: downhill always, uphill with `exp(-delta / T)`.
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta / temperature).exp()
    }
}

pub fn is_logical_pi(metrics: &PiMetrics<f64>, alpha: f64) -> bool {
    let floor = 1.0 - LOGICAL_ALPHA_MULTIPLE * alpha;
    metrics.picp >= floor && metrics.picp <= 1.0 && metrics.pinaw > 0.0 && metrics.pinaw < LOGICAL_PINAW_MAX
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Training cost of the current state.
    pub cost: f64,
    /// Validation PICP of the current state.
    pub picp: f64,
    /// Validation PINAW of the current state.
    pub pinaw: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub iter_picp_1pct: Option<usize>,
    pub iter_pinaw_15: Option<usize>,
    pub converged: bool,
    /// Set when a candidate produced a non-finite cost.
    pub aborted: bool,
    /// Best-cost training objective.
    pub best_cost: f64,
    /// Validation metrics of the returned (best-cost) weights.
    pub final_metrics: PiMetrics<f64>,
}

impl TrainingTrace {
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// First 1-based iteration whose validation PICP is within the milestone band.
pub fn picp_milestone(records: &[TraceRecord], target_coverage: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| (target_coverage - r.picp).abs() < PICP_MILESTONE_TOL)
        .map(|r| r.iter)
}

/// First 1-based iteration with `PINAW < 1.5 * final_pinaw`.
pub fn pinaw_milestone(records: &[TraceRecord], final_pinaw: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| r.pinaw < PINAW_MILESTONE_FACTOR * final_pinaw)
        .map(|r| r.iter)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct TrainedModel<T> {
    pub model: MlpModel<T>,
    pub trace: TrainingTrace,
    pub spec: CostSpec,
}

impl<T: Scalar> TrainedModel<T> {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }
}

fn score<T: Scalar>(model: &MlpModel<T>, split: &Split<T>, spec: &CostSpec, range_r: T) -> Result<(f64, PiMetrics<T>)> {
    let preds = model.predict_split(split)?;
    let m = spec.metrics(split.targets(), &preds, range_r)?;
    Ok((spec.cost_from_metrics(&m, split.len()).to_f64_lossy(), m))
}

/// Hidden-layer activations of one split, cached column-wise per hidden unit
/// so a proposal only recomputes the units whose incoming weights moved.
struct ActivationCache<'a, T> {
    split: &'a Split<T>,
    cols: Vec<Vec<T>>,
}

type ColumnUpdate<T> = Vec<(usize, Vec<T>)>;

impl<'a, T: Scalar> ActivationCache<'a, T> {
    fn new(split: &'a Split<T>, model: &MlpModel<T>) -> Self {
        let cols = (0..model.hidden()).map(|k| Self::column(split, model, k)).collect();
        Self { split, cols }
    }

    fn column(split: &Split<T>, model: &MlpModel<T>, k: usize) -> Vec<T> {
        let (d, h) = (model.input_dim(), model.hidden());
        let w = model.weights();
        let row = &w[k * d..(k + 1) * d];
        let bias = w[d * h + k];
        let act = model.activation();
        split
            .inputs()
            .iter()
            .map(|x| act.apply(row.iter().zip(x).fold(bias, |acc, (&w, &xi)| acc + w * xi)))
            .collect()
    }

    /// Hidden units whose input row or bias differ between the two weight vectors.
    fn changed_units(model: &MlpModel<T>, old: &[T], new: &[T]) -> Vec<usize> {
        let (d, h) = (model.input_dim(), model.hidden());
        (0..h)
            .filter(|&k| old[k * d..(k + 1) * d] != new[k * d..(k + 1) * d] || old[d * h + k] != new[d * h + k])
            .collect()
    }

    /// Outputs of `model` reusing cached columns except those in `update`.
    fn predict(&self, model: &MlpModel<T>, update: &ColumnUpdate<T>) -> Vec<crate::network::Interval<T>> {
        let h = model.hidden();
        let w = model.weights();
        let out = model.input_dim() * h + h;
        let (w2, b2) = w[out..].split_at(2 * h);
        let mut cols: Vec<&[T]> = self.cols.iter().map(Vec::as_slice).collect();
        for (k, c) in update {
            cols[*k] = c;
        }
        // Unit-outer accumulation keeps the per-sample summation order of
        // `MlpModel::forward`, so results are bit-identical to it.
        let n = self.split.len();
        let mut lower = vec![b2[0]; n];
        let mut upper = vec![b2[1]; n];
        for (k, col) in cols.iter().enumerate() {
            let (wl, wu) = (w2[k], w2[h + k]);
            for ((l, u), &a) in lower.iter_mut().zip(upper.iter_mut()).zip(col.iter()) {
                *l = *l + wl * a;
                *u = *u + wu * a;
            }
        }
        lower
            .into_iter()
            .zip(upper)
            .map(|(lower, upper)| crate::network::Interval { lower, upper })
            .collect()
    }

    fn recompute(&self, model: &MlpModel<T>, units: &[usize]) -> ColumnUpdate<T> {
        units.iter().map(|&k| (k, Self::column(self.split, model, k))).collect()
    }

    fn commit(&mut self, update: ColumnUpdate<T>) {
        for (k, c) in update {
            self.cols[k] = c;
        }
    }
}

/// Anneals `model0` against `spec` on the training split.
pub fn anneal<T: Scalar>(
    dataset: &Dataset<T>,
    model0: MlpModel<T>,
    spec: &CostSpec,
    config: &AnnealConfig,
) -> Result<TrainedModel<T>> {
    config.validate()?;
    spec.validate()?;
    if dataset.train.is_empty() || dataset.validation.is_empty() {
        return Err(Error::Empty);
    }
    if model0.input_dim() != dataset.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: dataset.input_dim(),
            got: model0.input_dim(),
        });
    }
    let r = dataset.range_r;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut current = model0;
    let mut train_cache = ActivationCache::new(&dataset.train, &current);
    let mut val_cache = ActivationCache::new(&dataset.validation, &current);
    let (mut current_cost, _) = score(&current, &dataset.train, spec, r)?;
    let mut aborted = !current_cost.is_finite();
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut val = spec.metrics(dataset.validation.targets(), &val_cache.predict(&current, &Vec::new()), r)?;
    let mut records = Vec::with_capacity(config.max_iters);

    for k in 0..config.max_iters {
        if aborted {
            break;
        }
        let temperature = config.temperature(k);
        let cand_weights = propose_neighbor(current.weights(), config, temperature, &mut rng);
        let accept_draw: f64 = rng.random();
        let units = ActivationCache::changed_units(&current, current.weights(), &cand_weights);
        let candidate = match current.with_weights(cand_weights) {
            Ok(m) => m,
            Err(_) => {
                aborted = true;
                break;
            }
        };
        let update = train_cache.recompute(&candidate, &units);
        let preds = train_cache.predict(&candidate, &update);
        let m = spec.metrics(dataset.train.targets(), &preds, r)?;
        let cand_cost = spec.cost_from_metrics(&m, dataset.train.len()).to_f64_lossy();
        if !cand_cost.is_finite() {
            aborted = true;
            break;
        }
        if accept_draw < acceptance_probability(cand_cost - current_cost, temperature) {
            current = candidate;
            current_cost = cand_cost;
            train_cache.commit(update);
            val_cache.commit(val_cache.recompute(&current, &units));
            val = spec.metrics(dataset.validation.targets(), &val_cache.predict(&current, &Vec::new()), r)?;
            if current_cost < best_cost {
                best = current.clone();
                best_cost = current_cost;
            }
        }
        records.push(TraceRecord {
            iter: k + 1,
            cost: current_cost,
            picp: val.picp.to_f64_lossy(),
            pinaw: val.pinaw.to_f64_lossy(),
            temperature,
        });
    }

    let (_, final_val) = score(&best, &dataset.validation, spec, r)?;
    let final_metrics = final_val.to_f64();
    let trace = TrainingTrace {
        iter_picp_1pct: picp_milestone(&records, spec.target_coverage()),
        iter_pinaw_15: pinaw_milestone(&records, final_metrics.pinaw),
        converged: !aborted && final_metrics.is_finite() && is_logical_pi(&final_metrics, spec.alpha),
        aborted,
        best_cost,
        final_metrics,
        records,
    };
    Ok(TrainedModel {
        model: best,
        trace,
        spec: spec.clone(),
    })
}

/// Network shape used by [`multi_restart`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: 10,
            activation: Activation::Tanh,
        }
    }
}

/// Initial weights of restart `restart`; independent of the cost function.
pub fn initial_model<T: Scalar>(input_dim: usize, arch: Architecture, config: &AnnealConfig, restart: usize) -> Result<MlpModel<T>> {
    let seed = derive_seed(config.seed, &[0x1217, restart as u64]);
    MlpModel::random(input_dim, arch.hidden, arch.activation, seed, config.init_scale)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct RestartOutcome<T> {
    pub best: TrainedModel<T>,
    pub restart_index: usize,
    /// False when no restart produced a logical PI.
    pub logical: bool,
    pub restart_costs: Vec<f64>,
    /// `iter_picp_1pct` of every restart, in restart order.
    pub restart_picp_milestones: Vec<Option<usize>>,
}

impl<T> RestartOutcome<T> {
    /// Median PICP milestone across restarts; unreached restarts count as `+inf`.
    pub fn median_picp_milestone(&self) -> f64 {
        let mut v: Vec<f64> = self
            .restart_picp_milestones
            .iter()
            .map(|m| m.map_or(f64::INFINITY, |i| i as f64))
            .collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return f64::INFINITY;
        }
        if n % 2 == 1 {
            v[n / 2]
        } else {
            let (a, b) = (v[n / 2 - 1], v[n / 2]);
            if a.is_infinite() || b.is_infinite() {
                b
            } else {
                (a + b) / 2.0
            }
        }
    }
}

/// Runs `config.restarts` independent anneals and keeps the lowest-cost
/// logical result (or the lowest-cost one overall if none is logical).
pub fn multi_restart<T: Scalar>(
    dataset: &Dataset<T>,
    arch: Architecture,
    spec: &CostSpec,
    config: &AnnealConfig,
) -> Result<RestartOutcome<T>> {
    if config.restarts == 0 {
        return Err(Error::param("restarts must be at least 1"));
    }
    let runs: Vec<TrainedModel<T>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let model0 = initial_model(dataset.input_dim(), arch, config, r)?;
            let cfg = AnnealConfig {
                seed: derive_seed(config.seed, &[0xA77E, r as u64]),
                ..config.clone()
            };
            anneal(dataset, model0, spec, &cfg)
        })
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = runs.iter().map(|t| t.trace.best_cost).collect();
    let milestones = runs.iter().map(|t| t.trace.iter_picp_1pct).collect();
    let (idx, logical) = select_restart(&runs.iter().map(|t| (t.trace.best_cost, t.converged())).collect::<Vec<_>>());
    let best = runs.into_iter().nth(idx).expect("index in range");
    Ok(RestartOutcome {
        best,
        restart_index: idx,
        logical,
        restart_costs: costs,
        restart_picp_milestones: milestones,
    })
}

/// Index of the lowest cost among logical entries, falling back to all entries.
pub fn select_restart(entries: &[(f64, bool)]) -> (usize, bool) {
    let argmin = |logical_only: bool| {
        entries
            .iter()
            .enumerate()
            .filter(|(_, (c, l))| (!logical_only || *l) && !c.is_nan())
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
    };
    match argmin(true) {
        Some(i) => (i, true),
        None => (argmin(false).unwrap_or(0), false),
    }
}
