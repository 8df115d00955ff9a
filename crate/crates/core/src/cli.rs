//! Command-line front end: `simulate`, `ingest`, `preprocess`, `run` and `table`.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or parse error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{format_timestamp, validate_dataset, Dataset, ModelKind};
use crate::experiment::{
    run_grid_traced, CellResult, CellSpec, EvalWindow, ExperimentConfig, ExperimentError, ExperimentReport, RunTrace,
    Strategy,
};
use crate::ingest::{aggregate_hourly, join_reference, DEFAULT_MIN_COVERAGE};
use crate::io::{read_dataset, read_raw, read_reference, write_dataset, CsvError};
use crate::kv;
use crate::metrics::{smooth_series, MetricSet};
use crate::preprocess::{dbscan_outliers, DbscanParams, StandardizeDims};
use crate::schedule::{enumerate_grid_with, UpdateMode};
use crate::simulate::{default_scenario, generate, DriftScenario, SimulateError};

/// Window of the smoothed error series, hours.
pub const SERIES_WINDOW: usize = 96;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            _ => 1,
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::Parse(_) => CliError::Parse(e.to_string()),
            SimulateError::Invalid(_) => CliError::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(CsvError) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    read_dataset(open(path)?, &path.display().to_string()).map_err(csv_err(path))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Parser)]
#[command(name = "aqcal", version, about = "Adaptive calibration of low-cost NO2 sensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic co-location dataset.
    Simulate(SimulateArgs),
    /// Aggregate raw samples to hours and join reference values.
    Ingest(IngestArgs),
    /// Flag DBSCAN outliers.
    Preprocess(PreprocessArgs),
    /// Run the calibration experiment grid.
    Run(RunArgs),
    /// Print a P x T grid of one metric from a report.
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat key = value scenario file; missing keys take default values.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario duration (hours).
    #[arg(long)]
    pub duration: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    /// Also write the resolved scenario.
    #[arg(long)]
    pub scenario_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_COVERAGE)]
    pub min_coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Joint,
    Features,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub dbscan_eps: f64,
    #[arg(long, default_value_t = 8)]
    pub dbscan_minpts: usize,
    #[arg(long, value_enum, default_value_t = SpaceArg::Joint)]
    pub dbscan_space: SpaceArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Regular,
    Opportunistic,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    PerOffset,
    Shared,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset CSV; taken from the manifest when re-running one.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Flat key = value experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-execute the run recorded in this manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// `all` or comma-separated `tau:pi` pairs.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Comma-separated: isnn, aelm, ielm, ilinear, snn, elm, linear (the last three are static).
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated offsets in samples.
    #[arg(long)]
    pub offsets: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub test_span: Option<usize>,
    #[arg(long)]
    pub initial_window: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub allow_pi_eq_tau: bool,
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long, value_enum)]
    pub eval_window: Option<WindowArg>,
    /// Write per-cell traces and smoothed error series.
    #[arg(long)]
    pub traces: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Model selector as in `run --models`.
    #[arg(long, default_value = "isnn")]
    pub model: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Regular)]
    pub mode: ModeArg,
    #[arg(long, default_value = "mae")]
    pub metric: String,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(msg) => {
            if !msg.is_empty() {
                print!("{msg}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Run(a) => cmd_run(&a).map(|o| o.summary),
        Command::Table(a) => cmd_table(&a),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let mut scenario = match &a.scenario {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            DriftScenario::from_kv(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => default_scenario(13140),
    };
    if let Some(d) = a.duration {
        let gaps = scenario.gaps.expected_count / scenario.duration_hours as f64;
        scenario.duration_hours = d;
        scenario.gaps.expected_count = gaps * d as f64;
    }
    if let Some(s) = a.seed {
        scenario.seed = s;
    }
    let sim = generate(&scenario)?;
    write_dataset(&sim.dataset, create(&a.out)?).map_err(csv_err(&a.out))?;
    if let Some(p) = &a.truth_out {
        sim.write_truth_csv(create(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = &a.scenario_out {
        fs::write(p, scenario.to_kv()).map_err(io_err(p))?;
    }
    Ok(format!(
        "simulated {} hours, {} records kept -> {}\n",
        scenario.duration_hours,
        sim.dataset.len(),
        a.out.display()
    ))
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<String, CliError> {
    if !(0.0..=1.0).contains(&a.min_coverage) {
        return Err(CliError::Usage(format!("--min-coverage must lie in [0, 1], got {}", a.min_coverage)));
    }
    let raw = read_raw(open(&a.raw)?).map_err(csv_err(&a.raw))?;
    let mut d = aggregate_hourly(&raw, a.min_coverage).map_err(|e| CliError::Data(e.to_string()))?;
    let mut msg = format!("{} raw samples -> {} hourly records\n", raw.len(), d.len());
    if let Some(p) = &a.reference {
        let refs = read_reference(open(p)?).map_err(csv_err(p))?;
        let (joined, report) = join_reference(&d, &refs).map_err(|e| CliError::Data(e.to_string()))?;
        d = joined;
        let _ = writeln!(msg, "reference: {} matched, {} ignored", report.matched, report.ignored);
    }
    write_dataset(&d, create(&a.out)?).map_err(csv_err(&a.out))?;
    Ok(msg)
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<String, CliError> {
    let d = load_dataset(&a.data)?;
    let params = DbscanParams {
        eps: a.dbscan_eps,
        min_pts: a.dbscan_minpts,
        space: match a.dbscan_space {
            SpaceArg::Joint => StandardizeDims::FeaturesAndLabel,
            SpaceArg::Features => StandardizeDims::Features,
        },
    };
    let (out, summary) = dbscan_outliers(&d, &params).map_err(|e| CliError::Data(e.to_string()))?;
    write_dataset(&out, create(&a.out)?).map_err(csv_err(&a.out))?;
    Ok(format!(
        "{} points, {} clusters, {} flagged as outliers\n",
        summary.points, summary.clusters, summary.flagged
    ))
}

/// Everything needed to repeat a run bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub data: String,
    pub data_sha256: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub traces: bool,
    pub report_sha256: String,
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub manifest: RunManifest,
    pub summary: String,
}

/// Maps a `--models` token to its family and strategy.
pub fn parse_model(token: &str) -> Result<(ModelKind, Strategy), String> {
    let t = token.trim().to_ascii_lowercase();
    Ok(match t.as_str() {
        "isnn" => (ModelKind::Snn, Strategy::IncrementalRetrain),
        "aelm" => (ModelKind::Elm, Strategy::AdaptiveUpdate),
        "ielm" => (ModelKind::Elm, Strategy::IncrementalRetrain),
        "ilinear" => (ModelKind::Multilinear, Strategy::IncrementalRetrain),
        other => match other.split_once(':') {
            Some((k, s)) => (k.parse()?, s.parse()?),
            None => (other.parse()?, Strategy::Static),
        },
    })
}

/// `all` or `tau:pi[,tau:pi...]`.
pub fn parse_grid(spec: &str, allow_pi_eq_tau: bool) -> Result<Vec<(usize, usize)>, String> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(enumerate_grid_with(allow_pi_eq_tau));
    }
    spec.split(',')
        .map(|pair| {
            let (t, p) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("grid entry `{pair}` is not tau:pi"))?;
            let num = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("grid entry `{pair}`: {e}"));
            Ok((num(t)?, num(p)?))
        })
        .collect()
}

fn parse_list(spec: &str) -> Result<Vec<usize>, String> {
    spec.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            kv::from_kv(&text, &ExperimentConfig::default()).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if a.allow_pi_eq_tau {
        cfg.allow_pi_eq_tau = true;
        if a.grid.is_none() {
            cfg.grid = enumerate_grid_with(true);
        }
    }
    if let Some(g) = &a.grid {
        cfg.grid = parse_grid(g, cfg.allow_pi_eq_tau).map_err(CliError::Usage)?;
    }
    if let Some(m) = a.mode {
        cfg.modes = match m {
            ModeArg::Regular => vec![UpdateMode::Regular],
            ModeArg::Opportunistic => vec![UpdateMode::Opportunistic],
            ModeArg::Both => vec![UpdateMode::Regular, UpdateMode::Opportunistic],
        };
    }
    if let Some(m) = &a.models {
        cfg.models = m.split(',').map(parse_model).collect::<Result<_, _>>().map_err(CliError::Usage)?;
    }
    if let Some(o) = &a.offsets {
        cfg.offsets = parse_list(o).map_err(CliError::Usage)?;
    }
    if let Some(r) = a.repeats {
        cfg.init_repeats = r;
    }
    if let Some(s) = a.test_span {
        cfg.test_span = s;
    }
    if let Some(w) = a.initial_window {
        cfg.initial_window = w;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if a.warm_start {
        cfg.warm_start = true;
    }
    if let Some(w) = a.eval_window {
        cfg.eval_window = match w {
            WindowArg::PerOffset => EvalWindow::PerOffset,
            WindowArg::Shared => EvalWindow::Shared,
        };
    }
    cfg.check().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn cell_slug(c: &CellSpec) -> String {
    match c.schedule {
        Some((tau, pi, mode)) => format!("{}_{}_tau{tau}_pi{pi}_{mode}", c.kind, c.strategy),
        None => format!("{}_{}", c.kind, c.strategy),
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<RunOutput, CliError> {
    let started = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    let (cfg, data_path, traces, expected_digest) = match &a.manifest {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            let m: RunManifest =
                serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
            let data = a.data.clone().unwrap_or_else(|| PathBuf::from(&m.data));
            (m.config, data, m.traces || a.traces, Some(m.data_sha256))
        }
        None => {
            let data = a.data.clone().ok_or_else(|| CliError::Usage("--data or --manifest is required".into()))?;
            (resolve_config(a)?, data, a.traces, None)
        }
    };
    let data_sha256 = sha256_file(&data_path)?;
    if let Some(expected) = expected_digest.filter(|d| *d != data_sha256) {
        return Err(CliError::Data(format!(
            "{} does not match the manifest digest ({data_sha256} != {expected})",
            data_path.display()
        )));
    }
    let data = load_dataset(&data_path)?;
    let violations = validate_dataset(&data);
    if !violations.is_empty() {
        let mut msg = format!("{} fails validation ({} violations):", data_path.display(), violations.len());
        for v in violations.iter().take(20) {
            let _ = write!(msg, "\n  {v}");
        }
        return Err(CliError::Data(msg));
    }

    let run = || run_grid_traced(&data, &cfg, traces);
    let output = match a.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let csv_path = a.out_dir.join("report.csv");
    output
        .report
        .write_csv(create(&csv_path)?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let json_path = a.out_dir.join("report.json");
    fs::write(&json_path, output.report.to_json()).map_err(io_err(&json_path))?;
    if traces {
        write_traces(&a.out_dir, &output.report, &output.traces)?;
    }

    let manifest = RunManifest {
        tool: "aqcal".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        data: data_path.display().to_string(),
        data_sha256,
        master_seed: cfg.master_seed,
        config: cfg,
        traces,
        report_sha256: sha256_file(&json_path)?,
        started,
        finished: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
    };
    let manifest_path = a.out_dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail"),
    )
    .map_err(io_err(&manifest_path))?;

    let present = output.report.cells.iter().filter(|c| !c.absent).count();
    let summary = format!(
        "{} cells ({} absent) -> {}\nreport sha256 {}\n",
        output.report.cells.len(),
        output.report.cells.len() - present,
        a.out_dir.display(),
        manifest.report_sha256
    );
    Ok(RunOutput {
        report: output.report,
        manifest,
        summary,
    })
}

/// Per-cell trace CSVs and the smoothed absolute error averaged over runs.
fn write_traces(dir: &Path, report: &ExperimentReport, traces: &[RunTrace]) -> Result<(), CliError> {
    let data_err = |e: csv::Error| CliError::Data(e.to_string());
    for cell in report.cells.iter().filter(|c| !c.absent) {
        let runs: Vec<&RunTrace> = traces.iter().filter(|t| t.cell == cell.cell).collect();
        let slug = cell_slug(&cell.cell);
        let mut w = csv::Writer::from_writer(create(&dir.join("traces").join(format!("{slug}.csv")))?);
        w.write_record(["offset", "repeat", "index", "timestamp", "truth", "pred", "generation"])
            .map_err(data_err)?;
        for t in &runs {
            for p in &t.points[t.scored.0..t.scored.1] {
                w.write_record([
                    t.offset.to_string(),
                    t.repeat.to_string(),
                    p.index.to_string(),
                    format_timestamp(p.timestamp),
                    p.truth.to_string(),
                    p.pred.to_string(),
                    p.generation.to_string(),
                ])
                .map_err(data_err)?;
            }
        }
        w.flush().map_err(io_err(dir))?;

        let len = runs.iter().map(|t| t.scored.1 - t.scored.0).min().unwrap_or(0);
        if len == 0 {
            continue;
        }
        let mean_abs: Vec<f64> = (0..len)
            .map(|i| {
                runs.iter()
                    .map(|t| {
                        let p = &t.points[t.scored.0 + i];
                        (p.pred - p.truth).abs()
                    })
                    .sum::<f64>()
                    / runs.len() as f64
            })
            .collect();
        let smooth = smooth_series(&mean_abs, SERIES_WINDOW).map_err(|e| CliError::Data(e.to_string()))?;
        let mut w = csv::Writer::from_writer(create(&dir.join("series").join(format!("{slug}.csv")))?);
        w.write_record(["index", "abs_error", "abs_error_smoothed"]).map_err(data_err)?;
        for (i, (e, s)) in mean_abs.iter().zip(&smooth).enumerate() {
            w.write_record([i.to_string(), e.to_string(), s.to_string()]).map_err(data_err)?;
        }
        w.flush().map_err(io_err(dir))?;
    }
    Ok(())
}

/// Renders one metric as rows of pi and columns of tau; absent cells print `-`.
pub fn format_table(report: &ExperimentReport, kind: ModelKind, strategy: Strategy, mode: UpdateMode, metric: usize) -> String {
    let cells: Vec<&CellResult> = report
        .cells
        .iter()
        .filter(|c| c.cell.kind == kind && c.cell.strategy == strategy)
        .filter(|c| matches!(c.cell.schedule, Some((_, _, m)) if m == mode))
        .collect();
    let coords = |c: &CellResult| c.cell.schedule.map(|(t, p, _)| (t, p)).expect("filtered to scheduled cells");
    let mut taus: Vec<usize> = cells.iter().map(|c| coords(c).0).collect();
    let mut pis: Vec<usize> = cells.iter().map(|c| coords(c).1).collect();
    taus.sort_unstable();
    taus.dedup();
    pis.sort_unstable();
    pis.dedup();

    let mut out = String::new();
    let _ = write!(out, "{:>8}", "P\\T");
    for t in &taus {
        let _ = write!(out, "{t:>9}");
    }
    out.push('\n');
    for p in &pis {
        let _ = write!(out, "{p:>8}");
        for t in &taus {
            let value = cells
                .iter()
                .find(|c| coords(c) == (*t, *p))
                .and_then(|c| c.mean)
                .map(|m| format!("{:.2}", m[metric]));
            let _ = write!(out, "{:>9}", value.as_deref().unwrap_or("-"));
        }
        out.push('\n');
    }
    if let Some(s) = report.get(&CellSpec::fixed(kind)).and_then(|c| c.mean) {
        let _ = writeln!(out, "static {kind}: {:.2}", s[metric]);
    }
    out
}

pub fn cmd_table(a: &TableArgs) -> Result<String, CliError> {
    let text = fs::read_to_string(&a.report).map_err(io_err(&a.report))?;
    let report: ExperimentReport =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", a.report.display())))?;
    let (kind, strategy) = parse_model(&a.model).map_err(CliError::Usage)?;
    let mode = match a.mode {
        ModeArg::Regular => UpdateMode::Regular,
        ModeArg::Opportunistic => UpdateMode::Opportunistic,
        ModeArg::Both => return Err(CliError::Usage("table needs a single mode".into())),
    };
    let metric = MetricSet::NAMES
        .iter()
        .position(|n| n.eq_ignore_ascii_case(&a.metric))
        .ok_or_else(|| CliError::Usage(format!("unknown metric `{}`", a.metric)))?;
    if strategy == Strategy::Static {
        return Err(CliError::Usage("table needs an adaptive model such as isnn or aelm".into()));
    }
    let any = report
        .cells
        .iter()
        .any(|c| c.cell.kind == kind && c.cell.strategy == strategy && matches!(c.cell.schedule, Some((_, _, m)) if m == mode));
    if !any {
        return Err(CliError::Data(format!("report has no {kind}/{strategy} cells in {mode} mode")));
    }
    Ok(format_table(&report, kind, strategy, mode, metric))
}
