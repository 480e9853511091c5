//! End-to-end library use, in both scalar widths.

use lubepi::costs::{evaluate, CostKind, CostSpec};
use lubepi::dataset::{build_dataset, generate_synthetic, SynthSpec, DEFAULT_FRACTIONS};
use lubepi::trainer::{anneal, initial_model, multi_restart, AnnealConfig, Architecture};
use lubepi::{Dataset64, Scalar};

fn config() -> AnnealConfig {
    AnnealConfig {
        max_iters: 200,
        t0: 0.01,
        cooling: 0.98,
        step_scale: 0.3,
        perturb_fraction: 0.05,
        restarts: 2,
        seed: 3,
        ..Default::default()
    }
}

fn train_in<T: Scalar>() -> (f64, f64) {
    let (s, _) = generate_synthetic(&SynthSpec {
        length: 800,
        period: 48,
        ..Default::default()
    })
    .unwrap();
    let d = build_dataset::<T>(&s, 4, 1, DEFAULT_FRACTIONS).unwrap();
    let spec = CostSpec::new(CostKind::Cwfdc, 0.1);
    let arch = Architecture::default();
    let out = multi_restart(&d, arch, &spec, &config()).unwrap();
    let trace = &out.best.trace;
    assert_eq!(trace.records.len(), 200);
    // Best-so-far cost never exceeds any recorded current cost.
    let min_current = trace.records.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
    assert!(trace.best_cost <= min_current);
    let preds = out.best.model.predict_split(&d.test).unwrap();
    let cost = evaluate(&spec, d.test.targets(), &preds, d.range_r).unwrap();
    assert!(cost.to_f64_lossy().is_finite());
    let first = trace.records[0].cost;
    (first, trace.best_cost)
}

#[test]
fn trains_in_f64_and_f32() {
    let (first64, best64) = train_in::<f64>();
    assert!(best64 < first64);
    let (first32, best32) = train_in::<f32>();
    assert!(best32 < first32);
}

#[test]
fn annealing_is_bit_reproducible() {
    let (s, _) = generate_synthetic(&SynthSpec {
        length: 600,
        period: 48,
        ..Default::default()
    })
    .unwrap();
    let d: Dataset64 = build_dataset(&s, 4, 1, DEFAULT_FRACTIONS).unwrap();
    let cfg = config();
    let spec = CostSpec::new(CostKind::Marin, 0.05);
    let run = || {
        let m0 = initial_model(d.input_dim(), Architecture::default(), &cfg, 0).unwrap();
        anneal(&d, m0, &spec, &cfg).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    for (ra, rb) in a.trace.records.iter().zip(&b.trace.records) {
        assert_eq!(ra.cost.to_bits(), rb.cost.to_bits());
    }
}

#[test]
fn every_cost_trains() {
    let (s, _) = generate_synthetic(&SynthSpec {
        length: 600,
        period: 48,
        ..Default::default()
    })
    .unwrap();
    let d: Dataset64 = build_dataset(&s, 4, 1, DEFAULT_FRACTIONS).unwrap();
    let cfg = AnnealConfig {
        max_iters: 50,
        restarts: 1,
        ..config()
    };
    for kind in CostKind::ALL {
        let out = multi_restart(&d, Architecture::default(), &CostSpec::new(kind, 0.1), &cfg).unwrap();
        assert!(out.best.trace.best_cost.is_finite(), "{kind}");
    }
}
