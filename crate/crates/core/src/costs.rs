//! Interval training objectives.
//!
//! Every cost is a function of the batch [`PiMetrics`] plus the batch size,
//! so the trainer computes metrics once per candidate and then dispatches.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PiMetrics;
use crate::network::Interval;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `PINAW (1 + gamma e^{eta (PINC - PICP)})`
    CwcMult,
    /// `PINAW + gamma e^{eta (PINC - PICP)}`
    CwcAdd,
    /// `PINAW + (e^{eta (PINC - PICP)} - 1)` below nominal coverage.
    CwcCont,
    /// `lambda |S_AV| + gamma |ACE|`
    Wan,
    /// `beta1 PINAW + beta2 ||e||^2 + e^{-eta (PICP - PINC)}`
    Marin,
    /// `PINAW + gamma pun`
    ZhangDic,
    /// `PINAW + rho PINAFD + beta (1 - alpha + delta - PICP)^2`
    Cwfdc,
}

impl CostKind {
    pub const ALL: [CostKind; 7] = [
        CostKind::CwcMult,
        CostKind::CwcAdd,
        CostKind::CwcCont,
        CostKind::Wan,
        CostKind::Marin,
        CostKind::ZhangDic,
        CostKind::Cwfdc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CostKind::CwcMult => "cwc-mult",
            CostKind::CwcAdd => "cwc-add",
            CostKind::CwcCont => "cwc-cont",
            CostKind::Wan => "wan",
            CostKind::Marin => "marin",
            CostKind::ZhangDic => "zhang-dic",
            CostKind::Cwfdc => "cwfdc",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CostKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownCostKind(s.to_string()))
    }
}

/// A cost function choice with its hyperparameters.
///
/// `beta2`, `sigma_p` and `delta` default to `1/n`, `1/(n R)` and `alpha/50`
/// and are resolved against the batch being scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSpec {
    pub kind: CostKind,
    /// Non-coverage probability; nominal coverage is `1 - alpha`.
    pub alpha: f64,
    pub eta: f64,
    pub lambda_w: f64,
    pub gamma_w: f64,
    pub beta1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    pub eta_marin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_p: Option<f64>,
    pub rho: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            kind: CostKind::Cwfdc,
            alpha: 0.1,
            eta: 50.0,
            lambda_w: 1.0,
            gamma_w: 1.0,
            beta1: 1.0,
            beta2: None,
            eta_marin: 50.0,
            sigma_p: None,
            rho: 1.0,
            beta: 1000.0,
            delta: None,
        }
    }
}

impl CostSpec {
    pub fn new(kind: CostKind, alpha: f64) -> Self {
        Self {
            kind,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::param(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0,1)");
        }
        if self.kind == CostKind::Cwfdc && self.beta <= 200.0 {
            return bad("cwfdc beta must exceed 200");
        }
        if self.delta() < 0.0 {
            return bad("delta must be non-negative");
        }
        if self.rho < 0.0 {
            return bad("rho must be non-negative");
        }
        if self.sigma_p.is_some_and(|s| s <= 0.0) {
            return bad("sigma_p must be positive");
        }
        let all = [self.eta, self.lambda_w, self.gamma_w, self.beta1, self.eta_marin, self.rho, self.beta];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("hyperparameters must be finite");
        }
        Ok(())
    }

    pub fn pinc(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.alpha / 50.0)
    }

    /// Coverage the CWFDC penalty is centred on: `1 - alpha + delta`.
    pub fn target_coverage(&self) -> f64 {
        1.0 - self.alpha + self.delta()
    }

    pub fn beta2_for(&self, n: usize) -> f64 {
        self.beta2.unwrap_or(1.0 / n as f64)
    }

    /// Batch metrics with this spec's `alpha` and `sigma_p`.
    pub fn metrics<T: Scalar>(&self, targets: &[T], intervals: &[Interval<T>], range_r: T) -> Result<PiMetrics<T>> {
        PiMetrics::compute(targets, intervals, range_r, T::of(self.alpha), self.sigma_p.map(T::of))
    }

    /// Cost from precomputed metrics over `n` samples.
    pub fn cost_from_metrics<T: Scalar>(&self, m: &PiMetrics<T>, n: usize) -> T {
        let pinc = T::of(self.pinc());
        let below = m.picp < pinc;
        let coverage_exp = || (T::of(self.eta) * (pinc - m.picp)).exp();
        match self.kind {
            CostKind::CwcMult => {
                let gamma = if below { T::one() } else { T::zero() };
                m.pinaw * (T::one() + gamma * coverage_exp())
            }
            CostKind::CwcAdd => {
                if below {
                    m.pinaw + coverage_exp()
                } else {
                    m.pinaw
                }
            }
            CostKind::CwcCont => {
                if below {
                    m.pinaw + (coverage_exp() - T::one())
                } else {
                    m.pinaw
                }
            }
            CostKind::Wan => T::of(self.lambda_w) * m.s_av.abs() + T::of(self.gamma_w) * m.ace.abs(),
            CostKind::Marin => {
                T::of(self.beta1) * m.pinaw
                    + T::of(self.beta2_for(n)) * m.mid_dev * m.mid_dev
                    + (-T::of(self.eta_marin) * (m.picp - pinc)).exp()
            }
            CostKind::ZhangDic => {
                if below {
                    m.pinaw + m.pun
                } else {
                    m.pinaw
                }
            }
            CostKind::Cwfdc => {
                let gap = T::of(self.target_coverage()) - m.picp;
                m.pinaw + T::of(self.rho) * m.pinafd + T::of(self.beta) * gap * gap
            }
        }
    }

    /// Metric used to pick among restarts and network sizes.
    ///
    /// LUBE variants use CWC, Wan its own cost, Marín `PINAW + ||e||^2 / n`,
    /// Zhang the DIC, and CWFDC `PINAW + PINAFD`.
    pub fn selection_value<T: Scalar>(&self, m: &PiMetrics<T>, n: usize) -> T {
        match self.kind {
            CostKind::Marin => m.pinaw + m.mid_dev * m.mid_dev / T::of_usize(n),
            CostKind::Cwfdc => m.pinaw + m.pinafd,
            _ => self.cost_from_metrics(m, n),
        }
    }
}

fn with_kind(spec: &CostSpec, kind: CostKind) -> CostSpec {
    CostSpec { kind, ..spec.clone() }
}

fn direct<T: Scalar>(kind: CostKind, targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    let spec = with_kind(spec, kind);
    let m = spec.metrics(targets, intervals, range_r)?;
    Ok(spec.cost_from_metrics(&m, targets.len()))
}

/// Multiplicative coverage width criterion.
pub fn cwc_multiplicative<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::CwcMult, targets, intervals, range_r, spec)
}

/// Additive coverage width criterion.
pub fn cwc_additive<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::CwcAdd, targets, intervals, range_r, spec)
}

/// Additive CWC shifted so the penalty vanishes continuously at `PICP = PINC`.
pub fn cwc_continuous<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::CwcCont, targets, intervals, range_r, spec)
}

pub fn wan_cost<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::Wan, targets, intervals, range_r, spec)
}

pub fn marin_cost<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::Marin, targets, intervals, range_r, spec)
}

pub fn zhang_dic<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::ZhangDic, targets, intervals, range_r, spec)
}

/// Coverage width failure-distance criterion.
pub fn cwfdc<T: Scalar>(targets: &[T], intervals: &[Interval<T>], range_r: T, spec: &CostSpec) -> Result<T> {
    direct(CostKind::Cwfdc, targets, intervals, range_r, spec)
}

/// Scores `intervals` with the cost named by `spec.kind`.
pub fn evaluate<T: Scalar>(spec: &CostSpec, targets: &[T], intervals: &[Interval<T>], range_r: T) -> Result<T> {
    spec.validate()?;
    let m = spec.metrics(targets, intervals, range_r)?;
    Ok(spec.cost_from_metrics(&m, targets.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn iv(l: f64, u: f64) -> Interval<f64> {
        Interval::new(l, u)
    }

    fn metrics(picp: f64, pinaw: f64, pinafd: f64) -> PiMetrics<f64> {
        PiMetrics {
            picp,
            pinaw,
            pinafd,
            ace: picp - 0.9,
            s_av: 0.0,
            mid_dev: 0.0,
            pun: 0.0,
            n_misses: 0,
        }
    }

    #[test]
    fn cwc_mult_values() {
        let s = CostSpec::new(CostKind::CwcMult, 0.1);
        assert_eq!(s.cost_from_metrics(&metrics(0.95, 0.2, 0.0), 100), 0.2);
        let v = s.cost_from_metrics(&metrics(0.85, 0.2, 0.0), 100);
        assert_abs_diff_eq!(v, 0.2 * (1.0 + 2.5f64.exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.6364988, epsilon = 1e-7);
        assert_eq!(s.cost_from_metrics(&metrics(0.0, 0.0, 0.0), 100), 0.0);
    }

    #[test]
    fn cwc_add_values() {
        let s = CostSpec::new(CostKind::CwcAdd, 0.1);
        assert_eq!(s.cost_from_metrics(&metrics(0.95, 0.2, 0.0), 100), 0.2);
        assert_abs_diff_eq!(s.cost_from_metrics(&metrics(0.85, 0.2, 0.0), 100), 12.38249, epsilon = 1e-5);
        let z = s.cost_from_metrics(&metrics(0.0, 0.0, 0.0), 100);
        assert_abs_diff_eq!(z / 45f64.exp(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cwc_cont_values() {
        let s = CostSpec::new(CostKind::CwcCont, 0.1);
        assert_eq!(s.cost_from_metrics(&metrics(0.9, 0.2, 0.0), 100), 0.2);
        assert_abs_diff_eq!(s.cost_from_metrics(&metrics(0.85, 0.2, 0.0), 100), 11.38249, epsilon = 1e-5);
        assert_eq!(s.cost_from_metrics(&metrics(0.97, 0.2, 0.0), 100), 0.2);
    }

    #[test]
    fn wan_values() {
        let s = CostSpec::new(CostKind::Wan, 0.1);
        let mut m = metrics(0.92, 0.0, 0.0);
        m.s_av = -0.8;
        m.ace = 0.02;
        assert_abs_diff_eq!(s.cost_from_metrics(&m, 10), 0.82, epsilon = 1e-12);
        m.ace = -0.05;
        assert_abs_diff_eq!(s.cost_from_metrics(&m, 10), 0.85, epsilon = 1e-12);
        m.ace = 0.0;
        m.s_av = 0.0;
        assert_eq!(s.cost_from_metrics(&m, 10), 0.0);
    }

    #[test]
    fn marin_values() {
        let s = CostSpec::new(CostKind::Marin, 0.1);
        let v = marin_cost(&[2.0], &[iv(1., 3.)], 10.0, &s).unwrap();
        assert_abs_diff_eq!(v, 0.2 + (-5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.206738, epsilon = 1e-6);
        // exponent vanishes at PICP = PINC
        assert_abs_diff_eq!(s.cost_from_metrics(&metrics(0.9, 0.3, 0.0), 10), 1.3, epsilon = 1e-12);
        let hot = CostSpec { eta_marin: 100.0, ..s.clone() };
        let m = metrics(0.95, 0.3, 0.0);
        assert!(hot.cost_from_metrics(&m, 10) < s.cost_from_metrics(&m, 10));
    }

    #[test]
    fn zhang_values() {
        let s = CostSpec::new(CostKind::ZhangDic, 0.1);
        assert_eq!(s.cost_from_metrics(&metrics(0.95, 0.2, 0.0), 10), 0.2);
        let v = zhang_dic(&[0.0, 5.0], &[iv(1., 2.), iv(4., 6.)], 10.0, &s).unwrap();
        assert_abs_diff_eq!(v, 0.20, epsilon = 1e-12);
        let unit = CostSpec { sigma_p: Some(1.0), ..s };
        // two misses (1 below, 2 above); widths 1 and 2 over n R = 2 * 5 give PINAW 0.3
        let v = zhang_dic(&[0.0, 5.0], &[iv(1., 2.), iv(1., 3.)], 5.0, &unit).unwrap();
        assert_abs_diff_eq!(v, 3.3, epsilon = 1e-12);
    }

    #[test]
    fn cwfdc_values() {
        let s = CostSpec {
            delta: Some(0.002),
            ..CostSpec::new(CostKind::Cwfdc, 0.10)
        };
        assert_abs_diff_eq!(s.cost_from_metrics(&metrics(0.90, 0.10, 0.02), 10), 0.124, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cost_from_metrics(&metrics(0.95, 0.10, 0.02), 10), 2.424, epsilon = 1e-12);
        let at_min = s.cost_from_metrics(&metrics(s.target_coverage(), 0.10, 0.02), 10);
        assert_abs_diff_eq!(at_min, 0.12, epsilon = 1e-12);
    }

    #[test]
    fn default_hyperparameters() {
        let s = CostSpec::new(CostKind::Cwfdc, 0.05);
        assert_eq!((s.rho, s.beta, s.eta), (1.0, 1000.0, 50.0));
        assert_abs_diff_eq!(s.delta(), 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(s.beta2_for(40), 0.025);
    }

    #[test]
    fn validation() {
        assert!(CostSpec::new(CostKind::Cwfdc, 0.0).validate().is_err());
        assert!(CostSpec {
            beta: 100.0,
            ..CostSpec::default()
        }
        .validate()
        .is_err());
        assert!(CostSpec {
            rho: -1.0,
            ..CostSpec::default()
        }
        .validate()
        .is_err());
        assert!(CostSpec {
            delta: Some(-0.1),
            ..CostSpec::default()
        }
        .validate()
        .is_err());
        assert!(CostSpec::default().validate().is_ok());
    }

    type DirectCost = fn(&[f64], &[Interval<f64>], f64, &CostSpec) -> Result<f64>;

    #[test]
    fn dispatch_matches_direct_calls() {
        let t = [0.3, 1.2, -0.4, 2.2, 0.9];
        let i = [iv(0., 1.), iv(1., 1.5), iv(-1., 0.), iv(0., 1.), iv(0.5, 0.6)];
        let direct_fns: [(CostKind, DirectCost); 7] = [
            (CostKind::CwcMult, cwc_multiplicative),
            (CostKind::CwcAdd, cwc_additive),
            (CostKind::CwcCont, cwc_continuous),
            (CostKind::Wan, wan_cost),
            (CostKind::Marin, marin_cost),
            (CostKind::ZhangDic, zhang_dic),
            (CostKind::Cwfdc, cwfdc),
        ];
        for (kind, f) in direct_fns {
            let s = CostSpec::new(kind, 0.2);
            assert_eq!(evaluate(&s, &t, &i, 3.0).unwrap(), f(&t, &i, 3.0, &s).unwrap(), "{kind}");
        }
    }

    #[test]
    fn kind_parsing() {
        for k in CostKind::ALL {
            assert_eq!(k.as_str().parse::<CostKind>().unwrap(), k);
        }
        assert!(matches!("cwc".parse::<CostKind>(), Err(Error::UnknownCostKind(_))));
        let bad: std::result::Result<CostSpec, _> = toml::from_str("kind = \"lube\"");
        assert!(bad.is_err());
    }

    #[test]
    fn spec_rejects_unknown_keys() {
        let ok: CostSpec = toml::from_str("kind = \"wan\"\nalpha = 0.05\nlambda_w = 2.0").unwrap();
        assert_eq!(ok.kind, CostKind::Wan);
        assert_eq!(ok.lambda_w, 2.0);
        assert!(toml::from_str::<CostSpec>("kind = \"wan\"\nlamda = 2.0").is_err());
    }

    #[test]
    fn overcoverage_asymmetry() {
        let picps = [0.92, 0.95, 0.98, 1.0];
        for kind in [CostKind::CwcMult, CostKind::CwcAdd, CostKind::CwcCont] {
            let s = CostSpec::new(kind, 0.1);
            let v: Vec<f64> = picps.iter().map(|&p| s.cost_from_metrics(&metrics(p, 0.2, 0.0), 100)).collect();
            assert!(v.iter().all(|&c| c == 0.2), "{kind}: {v:?}");
        }
        let s = CostSpec::new(CostKind::Cwfdc, 0.1);
        let v: Vec<f64> = picps.iter().map(|&p| s.cost_from_metrics(&metrics(p, 0.2, 0.0), 100)).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
    }

    #[test]
    fn cwfdc_penalty_is_exact_quadratic() {
        let s = CostSpec::new(CostKind::Cwfdc, 0.1);
        let f = |p: f64| s.cost_from_metrics(&metrics(p, 0.1, 0.05), 100) - 0.15;
        // three points determine the parabola; check a fourth
        let (p0, p1, p2, p3) = (0.80, 0.86, 0.97, 0.91);
        let l = |x: f64, a: f64, b: f64, c: f64| (x - b) * (x - c) / ((a - b) * (a - c));
        let interp = f(p0) * l(p3, p0, p1, p2) + f(p1) * l(p3, p1, p0, p2) + f(p2) * l(p3, p2, p0, p1);
        assert_abs_diff_eq!(interp, f(p3), epsilon = 1e-10);
        // leading coefficient equals beta
        let second_diff = (f(0.9) - 2.0 * f(0.91) + f(0.92)) / (0.01f64 * 0.01);
        assert_abs_diff_eq!(second_diff, 2000.0, epsilon = 1e-4);
    }

    #[test]
    fn argmin_prefers_target_coverage() {
        let s = CostSpec::new(CostKind::Cwfdc, 0.1);
        let candidates = [0.86, 0.89, 0.90, 0.93, 0.99];
        let best = candidates
            .iter()
            .copied()
            .min_by(|a, b| {
                let ca = s.cost_from_metrics(&metrics(*a, 0.1, 0.02), 100);
                let cb = s.cost_from_metrics(&metrics(*b, 0.1, 0.02), 100);
                ca.partial_cmp(&cb).unwrap()
            })
            .unwrap();
        assert_eq!(best, 0.90);
    }

    #[test]
    fn selection_values() {
        let mut m = metrics(0.9, 0.1, 0.03);
        m.mid_dev = 2.0;
        assert_abs_diff_eq!(CostSpec::new(CostKind::Cwfdc, 0.1).selection_value(&m, 4), 0.13);
        assert_abs_diff_eq!(CostSpec::new(CostKind::Marin, 0.1).selection_value(&m, 4), 1.1);
        assert_eq!(CostSpec::new(CostKind::CwcMult, 0.1).selection_value(&m, 4), 0.1);
    }

    #[test]
    fn generic_f32_dispatch() {
        let s = CostSpec::new(CostKind::Cwfdc, 0.1);
        let t = [0.0f32, 1.0];
        let i = [Interval::new(-0.5f32, 0.5), Interval::new(1.5, 2.0)];
        let a = evaluate(&s, &t, &i, 2.0f32).unwrap();
        let b = evaluate(&s, &[0.0f64, 1.0], &[iv(-0.5, 0.5), iv(1.5, 2.0)], 2.0).unwrap();
        assert!((a as f64 - b).abs() < 1e-3 * b);
    }
}
