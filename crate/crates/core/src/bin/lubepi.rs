//! Command-line front end: data generation, training, size sweeps, multi-trial
//! benchmarks and plot-data export, all driven by one TOML config.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lubepi::bench::{self, compare_costs, emit_plot_data, size_sweep, stats_table_csv, sweep_table_csv, train_per_alpha};
use lubepi::config::{parse_override, RunConfig};
use lubepi::dataset::generate_synthetic;
use lubepi::trainer::{is_logical_pi, multi_restart};

#[derive(Parser)]
#[command(name = "lubepi", version, about = "Train and benchmark prediction-interval networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each one overrides a config key. They go
/// before the subcommand name.
#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set anneal.cooling=0.999`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed (`anneal.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (`output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Annealing iterations per restart (`anneal.max_iters`).
    #[arg(long)]
    iters: Option<usize>,
    /// Restarts per training (`anneal.restarts`).
    #[arg(long)]
    restarts: Option<usize>,
    /// Hidden units (`network.hidden`).
    #[arg(long)]
    hidden: Option<usize>,
    /// Comma-separated cost kinds; replaces the `[[costs]]` list.
    #[arg(long, value_delimiter = ',')]
    cost: Vec<String>,
    /// Non-coverage level applied to every cost (`costs.alpha`).
    #[arg(long)]
    alpha: Option<f64>,
    /// Trials per cost (`bench.n_trials`).
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic series (with its true seasonal level and noise scale) as CSV.
    Synth {
        /// Destination file; defaults to `<output_dir>/synth.csv`.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Train one network with the first configured cost.
    Train,
    /// Sweep hidden-layer sizes with the first configured cost.
    Sweep,
    /// Run multi-trial statistics for every configured cost on paired seeds.
    Bench,
    /// Train one network per `bench.alphas` entry and export test-split bounds.
    Plotdata,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        if !self.cost.is_empty() {
            let list: Vec<String> = self.cost.iter().map(|k| format!("{{ kind = \"{}\" }}", k.trim())).collect();
            out.push(("costs".to_string(), format!("[{}]", list.join(", "))));
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("anneal.seed", self.seed.map(|v| v.to_string()));
        push("output_dir", self.out.as_ref().map(|p| format!("{:?}", p.display().to_string())));
        push("anneal.max_iters", self.iters.map(|v| v.to_string()));
        push("anneal.restarts", self.restarts.map(|v| v.to_string()));
        push("network.hidden", self.hidden.map(|v| v.to_string()));
        push("costs.alpha", self.alpha.map(|v| format!("{v:?}")));
        push("bench.n_trials", self.trials.map(|v| v.to_string()));
        for s in &self.set {
            out.push(parse_override(s)?);
        }
        Ok(out)
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    Ok(cfg.output_dir.join(name))
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn synth(cfg: &RunConfig, file: Option<PathBuf>) -> Result<()> {
    let path = match file {
        Some(p) => p,
        None => out_path(cfg, "synth.csv")?,
    };
    let (series, oracle) = generate_synthetic(&cfg.synth)?;
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([cfg.data.time_col.as_str(), cfg.data.value_col.as_str(), "seasonal", "sigma"])?;
    for (i, (t, v)) in series.timestamps().iter().zip(series.values()).enumerate() {
        w.write_record([t.to_string(), v.to_string(), oracle.seasonal(i).to_string(), oracle.sigma(i).to_string()])?;
    }
    w.flush()?;
    println!("wrote {} samples to {}", series.len(), path.display());
    Ok(())
}

fn train(cfg: &RunConfig) -> Result<()> {
    let (d, oracle) = cfg.dataset()?;
    let spec = &cfg.costs[0];
    let out = multi_restart(&d, cfg.network, spec, &cfg.anneal)?;
    let preds = out.best.model.predict_split(&d.test)?;
    let test = spec.metrics(d.test.targets(), &preds, d.range_r)?;
    out.best.model.save(out_path(cfg, "model.json")?)?;
    out.best.trace.write_jsonl(out_path(cfg, "trace.jsonl")?)?;
    let oracle_pinaw = oracle.map(|o| o.pinaw(&d.test, d.range_r, spec.alpha)).transpose()?;
    let summary = serde_json::json!({
        "cost": spec,
        "restart_index": out.restart_index,
        "restart_costs": out.restart_costs,
        "logical": out.logical,
        "test_logical": is_logical_pi(&test, spec.alpha),
        "validation": out.best.trace.final_metrics,
        "test": test,
        "oracle_pinaw": oracle_pinaw,
        "iter_picp_1pct": out.best.trace.iter_picp_1pct,
        "iter_pinaw_15": out.best.trace.iter_pinaw_15,
    });
    write_json(&out_path(cfg, "metrics.json")?, &summary)?;
    println!(
        "{}: test PICP {:.4}  PINAW {:.4}  PINAFD {:.4}  logical {}",
        spec.kind, test.picp, test.pinaw, test.pinafd, out.logical
    );
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let (d, _) = cfg.dataset()?;
    let res = size_sweep(&d, cfg.network.activation, &cfg.costs[0], &cfg.anneal, &cfg.bench.sizes)?;
    let table = sweep_table_csv(&res);
    bench::write_text(out_path(cfg, "sweep.csv")?, &table)?;
    write_json(&out_path(cfg, "sweep.json")?, &res)?;
    print!("{table}");
    println!("chosen hidden size: {}", res.chosen);
    Ok(())
}

fn run_bench(cfg: &RunConfig) -> Result<()> {
    let (d, _) = cfg.dataset()?;
    let runs = compare_costs(&d, cfg.network, &cfg.costs, &cfg.anneal, cfg.bench.n_trials)?;
    let stats: Vec<_> = runs.iter().map(|r| r.stats.clone()).collect();
    let records: Vec<_> = runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let table = stats_table_csv(&stats);
    bench::write_text(out_path(cfg, "table.csv")?, &table)?;
    write_json(&out_path(cfg, "stats.json")?, &stats)?;
    bench::write_jsonl(out_path(cfg, "trials.jsonl")?, &records)?;
    print!("{table}");
    Ok(())
}

fn plotdata(cfg: &RunConfig) -> Result<()> {
    let (d, _) = cfg.dataset()?;
    let models = train_per_alpha(&d, cfg.network, &cfg.costs[0], &cfg.anneal, &cfg.bench.alphas)?;
    let path = out_path(cfg, "plot.csv")?;
    emit_plot_data(&models, &d, &path)?;
    println!("wrote {} rows to {}", d.test.len(), path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.overrides()?)?;
    match cli.command {
        Command::Synth { file } => synth(&cfg, file),
        Command::Train => train(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Bench => run_bench(&cfg),
        Command::Plotdata => plotdata(&cfg),
    }
}
