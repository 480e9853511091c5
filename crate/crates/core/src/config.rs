//! Run configuration: one TOML file, with dotted-key overrides applied on top.
//!
//! ```toml
//! output_dir = "out"
//!
//! [data]            # omit `input` to use the synthetic generator
//! lags = 4
//!
//! [synth]
//! length = 5000
//!
//! [network]
//! hidden = 10
//!
//! [anneal]
//! max_iters = 2000
//!
//! [[costs]]
//! kind = "cwfdc"
//! alpha = 0.1
//!
//! [bench]
//! n_trials = 20
//! ```
//!
//! Unknown keys anywhere are errors. An override `a.b=v` parses `v` as a TOML
//! value (falling back to a bare string); a path that crosses an array, such
//! as `costs.alpha`, is applied to every element.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{DEFAULT_SIZES, DEFAULT_TRIALS};
use crate::costs::CostSpec;
use crate::dataset::{build_dataset, generate_synthetic, load_csv, Dataset, QuantileOracle, SynthSpec, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};
use crate::trainer::{AnnealConfig, Architecture};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// CSV file to read; the synthetic generator is used when absent.
    pub input: Option<PathBuf>,
    pub time_col: String,
    pub value_col: String,
    pub lags: usize,
    pub horizon: usize,
    /// Train/validation/test fractions.
    pub fractions: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            time_col: "timestamp".into(),
            value_col: "value".into(),
            lags: 4,
            horizon: 1,
            fractions: [DEFAULT_FRACTIONS.0, DEFAULT_FRACTIONS.1, DEFAULT_FRACTIONS.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSettings {
    pub n_trials: usize,
    /// Hidden-layer sizes for the size sweep, ascending.
    pub sizes: Vec<usize>,
    /// Nominal non-coverage levels for plot data.
    pub alphas: Vec<f64>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            n_trials: DEFAULT_TRIALS,
            sizes: DEFAULT_SIZES.collect(),
            alphas: vec![0.20, 0.05, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub synth: SynthSpec,
    pub network: Architecture,
    pub anneal: AnnealConfig,
    pub costs: Vec<CostSpec>,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            synth: SynthSpec::default(),
            network: Architecture::default(),
            anneal: AnnealConfig::default(),
            costs: vec![CostSpec::default()],
            bench: BenchSettings::default(),
        }
    }
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config(format!("override `{s}` is not of the form key=value"))),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(node: &mut toml::Value, path: &[&str], value: &toml::Value, full: &str) -> Result<()> {
    match node {
        toml::Value::Array(items) => {
            if items.is_empty() {
                return Err(Error::Config(format!("override `{full}` targets an empty array")));
            }
            items.iter_mut().try_for_each(|item| set_path(item, path, value, full))
        }
        toml::Value::Table(table) => {
            let (head, rest) = path.split_first().expect("non-empty path");
            if rest.is_empty() {
                table.insert((*head).to_string(), value.clone());
                Ok(())
            } else {
                let child = table
                    .entry((*head).to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                set_path(child, rest, value, full)
            }
        }
        _ => Err(Error::Config(format!("override `{full}` descends into a scalar"))),
    }
}

/// Applies `key=value` overrides to a parsed TOML document in order.
pub fn apply_overrides(doc: &mut toml::Table, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let path: Vec<&str> = key.split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed key `{key}`")));
        }
        let mut root = toml::Value::Table(std::mem::take(doc));
        let res = set_path(&mut root, &path, &parse_value(raw), key);
        if let toml::Value::Table(t) = root {
            *doc = t;
        }
        res?;
    }
    Ok(())
}

impl RunConfig {
    /// Parses `text` and applies `overrides`; missing keys take defaults.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if overrides.iter().any(|(k, _)| k.starts_with("costs.")) && !doc.contains_key("costs") {
            // Give array-wide cost overrides a default entry to land on.
            let default = toml::Value::try_from(CostSpec::default()).map_err(|e| Error::Config(e.to_string()))?;
            doc.insert("costs".into(), toml::Value::Array(vec![default]));
        }
        apply_overrides(&mut doc, overrides)?;
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(Error::Config("at least one [[costs]] entry is required".into()));
        }
        for c in &self.costs {
            c.validate()?;
        }
        self.anneal.validate()?;
        if self.data.input.is_none() {
            self.synth.validate()?;
        }
        if self.network.hidden == 0 {
            return Err(Error::Config("network.hidden must be at least 1".into()));
        }
        if self.bench.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("bench.sizes must be strictly ascending".into()));
        }
        Ok(())
    }

    /// The configured dataset, with the quantile oracle when it is synthetic.
    pub fn dataset(&self) -> Result<(Dataset<f64>, Option<QuantileOracle>)> {
        let [a, b, c] = self.data.fractions;
        let (series, oracle) = match &self.data.input {
            Some(p) => (load_csv(p, &self.data.time_col, &self.data.value_col)?, None),
            None => {
                let (s, o) = generate_synthetic(&self.synth)?;
                (s, Some(o))
            }
        };
        Ok((build_dataset(&series, self.data.lags, self.data.horizon, (a, b, c))?, oracle))
    }
}
