//! Command-line front end: resolves a [`RunConfig`], runs one experiment on
//! a bounded worker pool and writes CSV tables plus a JSON summary.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::config::{load_overrides, parse_value, ConfigError, RunConfig};
use crate::delay::{flood, write_flood_csv};
use crate::experiments::{
    estimate_critical_density, fit_diameter_tail, prepare_scaling_run, run_phase_diagram,
    run_scaling_study, single_hop_delay_test, ExperimentError, PhaseGrid, ScalingConfig,
};
use crate::pointprocess::SeededRng;

#[derive(Debug, Parser)]
#[command(
    name = "cogperc",
    version,
    about = "Percolation and multihop-delay simulator for cognitive radio networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Flood from the window centre and fit delay-to-distance rates.
    Flood(CommonArgs),
    /// Giant-component fraction over a (λ_S, λ_PT) grid.
    Phase(CommonArgs),
    /// Critical density from crossing probabilities.
    Critical(CommonArgs),
    /// Tail of the cluster diameter around the origin.
    Tail(CommonArgs),
    /// Single-hop waiting time against the geometric law.
    Hopdelay(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Flood(_) => "flood",
            Command::Phase(_) => "phase",
            Command::Critical(_) => "critical",
            Command::Tail(_) => "tail",
            Command::Hopdelay(_) => "hopdelay",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Flood(a)
            | Command::Phase(a)
            | Command::Critical(a)
            | Command::Tail(a)
            | Command::Hopdelay(a) => a,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file, or a JSON summary to replay.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fig5a, fig5b, fig5c, fig5d or critical.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Extra `key=value` override; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("--set expects KEY=VALUE, got `{0}`")]
    BadOverride(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Preset, then config file, then `--set`, `--seed` and `--scale`.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.preset {
        Some(name) => RunConfig::preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &args.config {
        cfg.apply(&load_overrides(path)?)?;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::BadOverride(kv.clone()))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(scale) = args.scale {
        let mut m = serde_json::Map::new();
        m.insert("scale".into(), parse_value(&scale.to_string()));
        cfg.apply(&m)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Named output files and their contents.
pub type Outputs = Vec<(String, String)>;

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn summary_json<T: Serialize>(command: &str, cfg: &RunConfig, result: &T) -> String {
    let doc = json!({
        "command": command,
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "result": serde_json::to_value(result).expect("result serializes"),
    });
    // serde_json maps are ordered by key, so this output is sorted.
    let mut s = serde_json::to_string_pretty(&doc).expect("json");
    s.push('\n');
    s
}

pub fn cmd_flood(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = cfg.params();
    let region = cfg.region();
    let rng = SeededRng::new(cfg.seed);
    let study = run_scaling_study(
        &params,
        &region,
        &ScalingConfig {
            taus: vec![params.propagation_delay],
            horizon: cfg.horizon,
            n_sources: cfg.sources,
            bands: cfg.distance_bands(),
        },
        &rng,
    )?;
    let first = prepare_scaling_run(&params, &region, 0, &rng)?;
    let result = flood(
        &first.topo,
        first.source,
        &params,
        cfg.horizon,
        &first.flood_rng,
    )
    .map_err(ExperimentError::from)?;
    let mut flood_csv = Vec::new();
    write_flood_csv(&result, &first.network, &mut flood_csv).expect("write to memory");

    let mut curve = String::from("run,node_id,distance_km,ratio_s_per_km\n");
    for (p, run) in study.curves[0].iter().zip(&study.curve_runs[0]) {
        writeln!(curve, "{run},{},{},{}", p.node, p.distance, p.ratio).unwrap();
    }
    let mut bands = String::from(
        "band_lo_km,band_hi_km,count,median_s_per_km,q1_s_per_km,q3_s_per_km,iqr_s_per_km,ci_low,ci_high\n",
    );
    for b in &study.bands {
        let f = b.fit;
        writeln!(
            bands,
            "{},{},{},{},{},{},{},{},{}",
            b.band.lo,
            b.band.hi,
            f.map(|f| f.count).unwrap_or(0),
            opt(f.map(|f| f.rate)),
            opt(f.map(|f| f.q1)),
            opt(f.map(|f| f.q3)),
            opt(f.map(|f| f.iqr)),
            opt(b.ci_low),
            opt(b.ci_high)
        )
        .unwrap();
    }
    let mut runs = String::from(
        "run,source,source_x_km,source_y_km,source_resampled,nodes,reached,horizon,unreachable,slots_used\n",
    );
    for r in &study.runs {
        writeln!(
            runs,
            "{},{},{},{},{},{},{},{},{},{}",
            r.run,
            r.source,
            r.source_x,
            r.source_y,
            r.source_resampled,
            r.nodes,
            r.reached,
            r.horizon_unreached,
            r.unreachable,
            r.slots_used
        )
        .unwrap();
    }
    Ok(vec![
        (
            "flood.csv".into(),
            String::from_utf8(flood_csv).expect("utf8"),
        ),
        ("ratio_curve.csv".into(), curve),
        ("bands.csv".into(), bands),
        ("runs.csv".into(), runs),
        ("summary.json".into(), summary_json("flood", cfg, &study)),
    ])
}

pub fn cmd_phase(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let grid = PhaseGrid {
        secondary_densities: cfg.phase_secondary.clone(),
        primary_densities: cfg.phase_primary.clone(),
    };
    let result = run_phase_diagram(
        &grid,
        &cfg.params(),
        &cfg.region(),
        cfg.phase_trials,
        cfg.effective_critical_density(),
        &SeededRng::new(cfg.seed),
    )?;
    let mut cells =
        String::from("lambda_s,lambda_pt,theta_hat,stderr,giant_share,classification\n");
    for c in &result.cells {
        writeln!(
            cells,
            "{},{},{},{},{},{}",
            c.secondary_density,
            c.primary_density,
            c.theta.estimate,
            c.theta.stderr,
            c.theta.giant_share,
            c.classification.as_str()
        )
        .unwrap();
    }
    let mut boundary = String::from("lambda_s,max_connected_lambda_pt\n");
    for b in &result.boundary {
        writeln!(
            boundary,
            "{},{}",
            b.secondary_density,
            opt(b.max_primary_density)
        )
        .unwrap();
    }
    Ok(vec![
        ("phase.csv".into(), cells),
        ("boundary.csv".into(), boundary),
        ("summary.json".into(), summary_json("phase", cfg, &result)),
    ])
}

pub fn cmd_critical(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let result = estimate_critical_density(
        cfg.secondary_range,
        &cfg.scaled_critical_windows(),
        &cfg.critical_densities,
        cfg.critical_trials,
        &SeededRng::new(cfg.seed),
    )?;
    let mut csv = String::from("window_km,lambda,crossings,trials,probability\n");
    for p in &result.points {
        writeln!(
            csv,
            "{},{},{},{},{}",
            p.window, p.density, p.crossings, p.trials, p.probability
        )
        .unwrap();
    }
    Ok(vec![
        ("crossing.csv".into(), csv),
        (
            "summary.json".into(),
            summary_json("critical", cfg, &result),
        ),
    ])
}

pub fn cmd_tail(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let result = fit_diameter_tail(
        &cfg.params(),
        &cfg.tail_h,
        cfg.tail_trials,
        &SeededRng::new(cfg.seed),
    )?;
    let mut csv = String::from("h_km,hits,trials,survival\n");
    for p in &result.points {
        writeln!(csv, "{},{},{},{}", p.h, p.hits, p.trials, p.survival).unwrap();
    }
    Ok(vec![
        ("tail.csv".into(), csv),
        ("summary.json".into(), summary_json("tail", cfg, &result)),
    ])
}

pub fn cmd_hopdelay(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let result = single_hop_delay_test(
        cfg.hop_length,
        &cfg.params(),
        cfg.hop_trials,
        &SeededRng::new(cfg.seed),
    )?;
    let mut csv = String::from("wait_slots,open_ended,observed,expected\n");
    for b in &result.bins {
        writeln!(
            csv,
            "{},{},{},{}",
            b.wait, b.open_ended, b.observed, b.expected
        )
        .unwrap();
    }
    Ok(vec![
        ("hopdelay.csv".into(), csv),
        (
            "summary.json".into(),
            summary_json("hopdelay", cfg, &result),
        ),
    ])
}

/// Computes the outputs of `command` for an already validated config.
pub fn execute(
    command: &Command,
    cfg: &RunConfig,
    workers: Option<usize>,
) -> Result<Outputs, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match command {
        Command::Flood(_) => cmd_flood(cfg),
        Command::Phase(_) => cmd_phase(cfg),
        Command::Critical(_) => cmd_critical(cfg),
        Command::Tail(_) => cmd_tail(cfg),
        Command::Hopdelay(_) => cmd_hopdelay(cfg),
    })
}

pub fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    outputs
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}

/// Resolves, validates, runs and writes; nothing touches disk unless the
/// run succeeds.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let args = cli.command.args();
    let cfg = resolve_config(args)?;
    let outputs = execute(&cli.command, &cfg, args.workers)?;
    write_outputs(&args.out, &outputs)
}

/// JSON summary of an output directory, for callers that want the result
/// without reparsing CSV.
pub fn read_summary(dir: &Path) -> Option<Value> {
    let text = std::fs::read_to_string(dir.join("summary.json")).ok()?;
    serde_json::from_str(&text).ok()
}
