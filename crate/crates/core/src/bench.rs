//! Multi-trial benchmarks: network-size sweeps, per-cost statistics tables,
//! paired cost comparisons and plot-data export.
//!
//! Trials are seeded from a master seed with the same ladder for every cost,
//! so trial `k` of every cost starts from identical initial weights. Every
//! emitted number is a deterministic function of the configuration.

use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{CostKind, CostSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::MlpModel;
use crate::scalar::Scalar;
use crate::trainer::{derive_seed, initial_model, multi_restart, AnnealConfig, Architecture, TrainedModel};

/// Network sizes tried by [`size_sweep`] when none are given.
pub const DEFAULT_SIZES: std::ops::RangeInclusive<usize> = 5..=15;
pub const DEFAULT_TRIALS: usize = 20;

/// Master seed of trial `k`; shared by every cost so trials are paired.
pub fn trial_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, &[0x0071_21A1, k as u64])
}

/// Hash of the initial weights of every restart of a trial.
pub fn initial_weights_hash<T: Scalar>(input_dim: usize, arch: Architecture, config: &AnnealConfig) -> Result<u64> {
    let mut h = DefaultHasher::new();
    for r in 0..config.restarts {
        let m: MlpModel<T> = initial_model(input_dim, arch, config, r)?;
        for w in m.weights() {
            w.to_f64_lossy().to_bits().hash(&mut h);
        }
    }
    Ok(h.finish())
}

/// Outcome of one trial, with metrics on the test split (fractions, not percent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cost_kind: CostKind,
    pub trial: usize,
    pub seed: u64,
    /// The selected restart yields a logical PI on validation.
    pub converged: bool,
    pub picp: f64,
    pub pinaw: f64,
    pub pinafd: f64,
    /// Milestones of the selected restart.
    pub iter_picp_1pct: Option<usize>,
    pub iter_pinaw_15: Option<usize>,
    /// Median PICP milestone over all restarts; `None` when the median is unreached.
    pub restart_median_picp_1pct: Option<f64>,
    pub init_hash: u64,
}

/// Aggregate statistics of one cost over many trials.
///
/// PICP, PINAW and PINAFD are in percent. Means and the PICP standard
/// deviation use converged trials only; milestone medians use every trial
/// that reached the milestone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub cost_kind: CostKind,
    pub alpha: f64,
    pub n_trials: usize,
    pub n_converged: usize,
    pub mu_pinaw: f64,
    pub mu_picp: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sigma_picp: f64,
    pub mu_pinafd: f64,
    pub mu_cwc: f64,
    pub mu_cwfdc: f64,
    pub median_iter_picp_1pct: Option<f64>,
    pub median_iter_pinaw_15: Option<f64>,
    pub convergence_rate: f64,
    /// Fewer than two converged trials.
    pub unreliable: bool,
}

/// Aggregate CWC from mean PINAW (percent) and mean PICP (fraction):
/// `mu_pinaw + gamma e^{eta (PINC - mu_picp)}` with `gamma = [mu_picp < PINC]`.
pub fn aggregate_cwc(mu_pinaw_pct: f64, mu_picp: f64, alpha: f64, eta: f64) -> f64 {
    let pinc = 1.0 - alpha;
    if mu_picp < pinc {
        mu_pinaw_pct + (eta * (pinc - mu_picp)).exp()
    } else {
        mu_pinaw_pct
    }
}

/// Aggregate CWFDC from mean PINAW and PINAFD (percent) and mean PICP (fraction):
/// `mu_pinaw + mu_pinafd + beta (1 - alpha + delta - mu_picp)^2`.
pub fn aggregate_cwfdc(mu_pinaw_pct: f64, mu_pinafd_pct: f64, mu_picp: f64, alpha: f64, delta: f64, beta: f64) -> f64 {
    let gap = 1.0 - alpha + delta - mu_picp;
    mu_pinaw_pct + mu_pinafd_pct + beta * gap * gap
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Median of the values; `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

impl TrialStats {
    /// Aggregates per-trial records; also used to re-check persisted records.
    pub fn from_records(spec: &CostSpec, records: &[TrialRecord]) -> Self {
        let conv: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
        let pct = |f: fn(&TrialRecord) -> f64| conv.iter().map(|r| 100.0 * f(r)).collect::<Vec<_>>();
        let picp = pct(|r| r.picp);
        let (mu_pinaw, mu_picp, mu_pinafd) = if conv.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (mean(&pct(|r| r.pinaw)), mean(&picp), mean(&pct(|r| r.pinafd)))
        };
        let milestone = |f: fn(&TrialRecord) -> Option<usize>| {
            median(&records.iter().filter_map(f).map(|i| i as f64).collect::<Vec<_>>())
        };
        let mu_picp_frac = mu_picp / 100.0;
        Self {
            cost_kind: spec.kind,
            alpha: spec.alpha,
            n_trials: records.len(),
            n_converged: conv.len(),
            mu_pinaw,
            mu_picp,
            sigma_picp: sample_std(&picp),
            mu_pinafd,
            mu_cwc: aggregate_cwc(mu_pinaw, mu_picp_frac, spec.alpha, spec.eta),
            mu_cwfdc: aggregate_cwfdc(mu_pinaw, mu_pinafd, mu_picp_frac, spec.alpha, spec.delta(), spec.beta),
            median_iter_picp_1pct: milestone(|r| r.iter_picp_1pct),
            median_iter_pinaw_15: milestone(|r| r.iter_pinaw_15),
            convergence_rate: if records.is_empty() {
                0.0
            } else {
                conv.len() as f64 / records.len() as f64
            },
            unreliable: conv.len() < 2,
        }
    }
}

/// Statistics plus the per-trial records they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRun {
    pub spec: CostSpec,
    pub stats: TrialStats,
    pub records: Vec<TrialRecord>,
}

fn run_one_trial<T: Scalar>(
    dataset: &Dataset<T>,
    arch: Architecture,
    spec: &CostSpec,
    config: &AnnealConfig,
    k: usize,
) -> Result<(TrialRecord, TrainedModel<T>)> {
    let cfg = AnnealConfig {
        seed: trial_seed(config.seed, k),
        ..config.clone()
    };
    let out = multi_restart(dataset, arch, spec, &cfg)?;
    let preds = out.best.model.predict_split(&dataset.test)?;
    let m = spec.metrics(dataset.test.targets(), &preds, dataset.range_r)?.to_f64();
    let restart_median = out.median_picp_milestone();
    let record = TrialRecord {
        cost_kind: spec.kind,
        trial: k,
        seed: cfg.seed,
        converged: out.logical,
        picp: m.picp,
        pinaw: m.pinaw,
        pinafd: m.pinafd,
        iter_picp_1pct: out.best.trace.iter_picp_1pct,
        iter_pinaw_15: out.best.trace.iter_pinaw_15,
        restart_median_picp_1pct: restart_median.is_finite().then_some(restart_median),
        init_hash: initial_weights_hash::<T>(dataset.input_dim(), arch, &cfg)?,
    };
    Ok((record, out.best))
}

/// Trains `n_trials` independently seeded networks and aggregates their
/// test-split metrics.
pub fn run_trials<T: Scalar>(
    dataset: &Dataset<T>,
    arch: Architecture,
    spec: &CostSpec,
    config: &AnnealConfig,
    n_trials: usize,
) -> Result<TrialRun> {
    if n_trials < 2 {
        return Err(Error::param("at least two trials are required"));
    }
    spec.validate()?;
    config.validate()?;
    let records: Vec<TrialRecord> = (0..n_trials)
        .into_par_iter()
        .map(|k| run_one_trial(dataset, arch, spec, config, k).map(|(r, _)| r))
        .collect::<Result<_>>()?;
    Ok(TrialRun {
        spec: spec.clone(),
        stats: TrialStats::from_records(spec, &records),
        records,
    })
}

/// [`run_trials`] for every spec on the same dataset and seed ladder.
pub fn compare_costs<T: Scalar>(
    dataset: &Dataset<T>,
    arch: Architecture,
    specs: &[CostSpec],
    config: &AnnealConfig,
    n_trials: usize,
) -> Result<Vec<TrialRun>> {
    if specs.is_empty() {
        return Err(Error::param("at least one cost spec is required"));
    }
    specs.iter().map(|s| run_trials(dataset, arch, s, config, n_trials)).collect()
}

/// Selection value of one network size; `+inf` when no restart was logical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub hidden: usize,
    pub selection_value: f64,
    pub logical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SizePoint>,
    pub chosen: usize,
}

/// Index of the smallest value; ties go to the earliest entry.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Picks the size with the lowest validation selection value. `sizes` should
/// be ascending so ties resolve to the smaller network.
pub fn choose_size(points: &[SizePoint]) -> Result<usize> {
    let values: Vec<f64> = points.iter().map(|p| p.selection_value).collect();
    match argmin_first(&values) {
        Some(i) if values[i].is_finite() => Ok(points[i].hidden),
        _ => Err(Error::NoLogicalPi),
    }
}

/// Trains every hidden-layer size with `multi_restart` and picks the best by
/// the cost's validation selection value.
pub fn size_sweep<T: Scalar>(
    dataset: &Dataset<T>,
    activation: crate::network::Activation,
    spec: &CostSpec,
    config: &AnnealConfig,
    sizes: &[usize],
) -> Result<SweepResult> {
    if sizes.is_empty() {
        return Err(Error::param("at least one network size is required"));
    }
    let points: Vec<SizePoint> = sizes
        .par_iter()
        .map(|&hidden| {
            let out = multi_restart(dataset, Architecture { hidden, activation }, spec, config)?;
            let selection_value = if out.logical {
                let preds = out.best.model.predict_split(&dataset.validation)?;
                let m = spec.metrics(dataset.validation.targets(), &preds, dataset.range_r)?;
                spec.selection_value(&m, dataset.validation.len()).to_f64_lossy()
            } else {
                f64::INFINITY
            };
            Ok(SizePoint {
                hidden,
                selection_value,
                logical: out.logical,
            })
        })
        .collect::<Result<_>>()?;
    let chosen = choose_size(&points)?;
    Ok(SweepResult { points, chosen })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// CSV table with one row per cost; floats use shortest round-trip formatting.
pub fn stats_table_csv(stats: &[TrialStats]) -> String {
    let mut s = String::from(
        "cost,alpha,n_trials,n_converged,mu_pinaw,mu_picp,sigma_picp,mu_pinafd,mu_cwc,mu_cwfdc,\
         median_iter_picp_1pct,median_iter_pinaw_15,convergence_rate,unreliable\n",
    );
    for t in stats {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.cost_kind,
            t.alpha,
            t.n_trials,
            t.n_converged,
            t.mu_pinaw,
            t.mu_picp,
            t.sigma_picp,
            t.mu_pinafd,
            t.mu_cwc,
            t.mu_cwfdc,
            fmt_opt(t.median_iter_picp_1pct),
            fmt_opt(t.median_iter_pinaw_15),
            t.convergence_rate,
            t.unreliable
        );
    }
    s
}

pub fn sweep_table_csv(sweep: &SweepResult) -> String {
    let mut s = String::from("hidden,selection_value,logical,chosen\n");
    for p in &sweep.points {
        let _ = writeln!(s, "{},{},{},{}", p.hidden, p.selection_value, p.logical, p.hidden == sweep.chosen);
    }
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one JSON object per line.
pub fn write_jsonl<S: Serialize>(path: impl AsRef<Path>, items: &[S]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trains one network per `alpha` with `spec` otherwise unchanged.
pub fn train_per_alpha<T: Scalar>(
    dataset: &Dataset<T>,
    arch: Architecture,
    spec: &CostSpec,
    config: &AnnealConfig,
    alphas: &[f64],
) -> Result<Vec<(f64, MlpModel<T>)>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let s = CostSpec { alpha, ..spec.clone() };
            s.validate()?;
            multi_restart(dataset, arch, &s, config).map(|o| (alpha, o.best.model))
        })
        .collect()
}

/// Writes `timestamp,target,lower_<a>,upper_<a>...` over the test split.
pub fn emit_plot_data<T: Scalar>(models: &[(f64, MlpModel<T>)], dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    if models.is_empty() {
        return Err(Error::param("at least one model is required"));
    }
    let path = path.as_ref();
    let preds = models
        .iter()
        .map(|(_, m)| m.predict_split(&dataset.test))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["timestamp".to_string(), "target".to_string()];
    for (a, _) in models {
        header.push(format!("lower_{a}"));
        header.push(format!("upper_{a}"));
    }
    w.write_record(&header)?;
    for (j, win) in dataset.test.windows.iter().enumerate() {
        let mut row = vec![win.timestamp.to_string(), win.target.to_string()];
        for p in &preds {
            row.push(p[j].lower.to_string());
            row.push(p[j].upper.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, generate_synthetic, SynthSpec, DEFAULT_FRACTIONS};
    use crate::network::Activation;
    use approx::assert_abs_diff_eq;

    fn record(picp: f64, converged: bool) -> TrialRecord {
        TrialRecord {
            cost_kind: CostKind::Cwfdc,
            trial: 0,
            seed: 0,
            converged,
            picp,
            pinaw: 0.1,
            pinafd: 0.01,
            iter_picp_1pct: Some(10),
            iter_pinaw_15: None,
            restart_median_picp_1pct: Some(10.0),
            init_hash: 0,
        }
    }

    fn small_dataset() -> Dataset<f64> {
        let (s, _) = generate_synthetic(&SynthSpec {
            length: 500,
            period: 48,
            ..Default::default()
        })
        .unwrap();
        build_dataset(&s, 4, 1, DEFAULT_FRACTIONS).unwrap()
    }

    fn quick() -> AnnealConfig {
        AnnealConfig {
            max_iters: 30,
            restarts: 2,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn two_point_statistics() {
        let spec = CostSpec::new(CostKind::Cwfdc, 0.05);
        let s = TrialStats::from_records(&spec, &[record(0.94, true), record(0.96, true)]);
        assert_abs_diff_eq!(s.mu_picp, 95.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sigma_picp, std::f64::consts::SQRT_2, epsilon = 1e-9);
        assert!(!s.unreliable);
        let same = TrialStats::from_records(&spec, &[record(0.9, true), record(0.9, true), record(0.9, true)]);
        assert_eq!(same.sigma_picp, 0.0);
    }

    #[test]
    fn aggregates_skip_unconverged_trials() {
        let spec = CostSpec::new(CostKind::CwcMult, 0.1);
        let s = TrialStats::from_records(&spec, &[record(0.9, true), record(0.1, false), record(0.92, true)]);
        assert_eq!(s.n_converged, 2);
        assert_abs_diff_eq!(s.mu_picp, 91.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.convergence_rate, 2.0 / 3.0);
        assert_eq!(s.median_iter_picp_1pct, Some(10.0));
        assert_eq!(s.median_iter_pinaw_15, None);
        let lone = TrialStats::from_records(&spec, &[record(0.9, true), record(0.1, false)]);
        assert!(lone.unreliable);
        assert!(lone.sigma_picp.is_nan());
    }

    #[test]
    fn footnote_formulas() {
        let v = aggregate_cwfdc(7.40, 0.53, 0.9509, 0.05, 0.001, 1000.0);
        assert_abs_diff_eq!(v, 7.93 + 1000.0 * 1e-8, epsilon = 1e-9);
        assert_eq!(aggregate_cwc(2.0, 0.95, 0.1, 50.0), 2.0);
        assert_abs_diff_eq!(aggregate_cwc(2.0, 0.88, 0.1, 50.0), 2.0 + 1.0f64.exp(), epsilon = 1e-9);
    }

    #[test]
    fn median_rules() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn size_choice_prefers_smaller_on_ties() {
        let pts = |v: [f64; 3]| -> Vec<SizePoint> {
            v.iter()
                .zip([5, 6, 7])
                .map(|(&s, h)| SizePoint {
                    hidden: h,
                    selection_value: s,
                    logical: s.is_finite(),
                })
                .collect()
        };
        assert_eq!(choose_size(&pts([3.0, 2.0, 2.0])).unwrap(), 6);
        assert_eq!(choose_size(&pts([f64::INFINITY, f64::INFINITY, 1.0])).unwrap(), 7);
        assert!(matches!(choose_size(&pts([f64::INFINITY; 3])), Err(Error::NoLogicalPi)));
    }

    #[test]
    fn single_size_sweep() {
        let d = small_dataset();
        let spec = CostSpec::new(CostKind::Cwfdc, 0.1);
        let cfg = AnnealConfig {
            max_iters: 400,
            t0: 0.01,
            cooling: 0.99,
            step_scale: 0.3,
            ..quick()
        };
        match size_sweep(&d, Activation::Tanh, &spec, &cfg, &[6]) {
            Ok(r) => assert_eq!(r.chosen, 6),
            Err(e) => assert!(matches!(e, Error::NoLogicalPi)),
        }
        assert!(size_sweep(&d, Activation::Tanh, &spec, &cfg, &[]).is_err());
    }

    #[test]
    fn trials_are_paired_and_reproducible() {
        let d = small_dataset();
        let arch = Architecture {
            hidden: 4,
            activation: Activation::Tanh,
        };
        let specs = [CostSpec::new(CostKind::Cwfdc, 0.1), CostSpec::new(CostKind::CwcMult, 0.1)];
        let runs = compare_costs(&d, arch, &specs, &quick(), 3).unwrap();
        assert_eq!(runs.len(), 2);
        for (a, b) in runs[0].records.iter().zip(&runs[1].records) {
            assert_eq!(a.init_hash, b.init_hash);
            assert_eq!(a.seed, b.seed);
        }
        let hashes: std::collections::HashSet<u64> = runs[0].records.iter().map(|r| r.init_hash).collect();
        assert_eq!(hashes.len(), 3);
        let again = run_trials(&d, arch, &specs[0], &quick(), 3).unwrap();
        assert_eq!(again.records, runs[0].records);
        // NaN aggregates (no converged trial) compare equal through JSON.
        assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&runs[0]).unwrap());
        assert_eq!(stats_table_csv(std::slice::from_ref(&again.stats)), stats_table_csv(std::slice::from_ref(&runs[0].stats)));
        assert_eq!(
            serde_json::to_string(&TrialStats::from_records(&specs[1], &runs[1].records)).unwrap(),
            serde_json::to_string(&runs[1].stats).unwrap()
        );
    }

    #[test]
    fn trial_count_and_spec_list_preconditions() {
        let d = small_dataset();
        let spec = CostSpec::default();
        assert!(run_trials(&d, Architecture::default(), &spec, &quick(), 1).is_err());
        assert!(compare_costs(&d, Architecture::default(), &[], &quick(), 2).is_err());
    }

    #[test]
    fn plot_data_columns() {
        let d = small_dataset();
        let m = |seed| MlpModel::random(5, 3, Activation::Tanh, seed, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let one = dir.path().join("one.csv");
        emit_plot_data(&[(0.1, m(1))], &d, &one).unwrap();
        let three = dir.path().join("three.csv");
        emit_plot_data(&[(0.2, m(1)), (0.05, m(2)), (0.01, m(3))], &d, &three).unwrap();
        let mut r = csv::Reader::from_path(&one).unwrap();
        assert_eq!(r.headers().unwrap().len(), 4);
        assert_eq!(r.records().count(), d.test.len());
        let mut r = csv::Reader::from_path(&three).unwrap();
        let h = r.headers().unwrap().clone();
        assert_eq!(h.len(), 8);
        assert_eq!(&h[2], "lower_0.2");
        assert_eq!(&h[7], "upper_0.01");
        assert_eq!(r.records().count(), d.test.len());
    }

    #[test]
    fn stats_table_is_stable_text() {
        let spec = CostSpec::new(CostKind::Cwfdc, 0.1);
        let s = TrialStats::from_records(&spec, &[record(0.9, true), record(0.91, true)]);
        let t = stats_table_csv(&[s]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.lines().nth(1).unwrap().starts_with("cwfdc,0.1,2,2,"));
    }
}
