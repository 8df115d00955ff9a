//! The calibration-and-adaptation protocol.
//!
//! For every offset and repeat an initial model is fit on `initial_window`
//! usable samples; the following samples form the stream. Each stream sample
//! is predicted by the model generation active at that point, and the
//! schedule decides when labels arrive and when the next generation takes
//! over. Results are averaged over offsets × repeats per cell.
//!
//! Seeds are derived from the master seed by hashing a canonical string
//! (see [`derive_seed`]):
//!
//! | use            | string                                                   |
//! |----------------|----------------------------------------------------------|
//! | initial model  | `init/{kind}/{offset}/{repeat}`                          |
//! | schedule plan  | `plan/{tau}/{pi}/{mode}/{offset}/{repeat}`               |
//! | retrain        | `retrain/{kind}/{tau}/{pi}/{mode}/{offset}/{repeat}/{g}` |
//!
//! The initial seed ignores the schedule, so the same initial model serves
//! every cell and adding a cell never changes another cell's numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureVector, ModelKind};
use crate::metrics::{compute_metrics_with, MetricSet, MetricsConfig, MetricsError};
use crate::models::{
    elm_refit, elm_update, scan_elm, scan_snn, snn_train, snn_train_with, train_linear, CalibrationModel, ElmConfig,
    ModelError, Sample, SnnConfig,
};
use crate::schedule::{enumerate_grid_with, plan, ScheduleError, SchedulePlan, UpdateMode, UpdateSchedule};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("not enough usable samples for {cell}: need {needed} (offset {offset} + window {window} + span {span}), have {available}")]
    Sizing {
        cell: String,
        needed: usize,
        available: usize,
        offset: usize,
        window: usize,
        span: usize,
    },
    #[error("{cell}: {source}")]
    Model {
        cell: String,
        #[source]
        source: ModelError,
    },
    #[error("{cell}: {source}")]
    Metrics {
        cell: String,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Static,
    IncrementalRetrain,
    AdaptiveUpdate,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Static => "static",
            Strategy::IncrementalRetrain => "incremental_retrain",
            Strategy::AdaptiveUpdate => "adaptive_update",
        }
    }

    /// The adaptive strategy each family uses by default.
    pub fn default_for(kind: ModelKind) -> Strategy {
        match kind {
            ModelKind::Elm => Strategy::AdaptiveUpdate,
            _ => Strategy::IncrementalRetrain,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "static" => Ok(Strategy::Static),
            "incremental_retrain" | "retrain" => Ok(Strategy::IncrementalRetrain),
            "adaptive_update" | "update" => Ok(Strategy::AdaptiveUpdate),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// Which samples each offset scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvalWindow {
    /// Each offset scores the `test_span` samples right after its own window.
    PerOffset,
    /// All offsets score the same samples, starting after the latest window.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Model families and strategies; a STATIC entry adds one baseline cell.
    pub models: Vec<(ModelKind, Strategy)>,
    pub grid: Vec<(usize, usize)>,
    pub modes: Vec<UpdateMode>,
    /// Usable samples in the initial calibration window.
    pub initial_window: usize,
    pub offsets: Vec<usize>,
    pub test_span: usize,
    pub init_repeats: usize,
    pub master_seed: u64,
    pub snn_sizes: Vec<usize>,
    pub elm_sizes: Vec<usize>,
    pub snn: SnnConfig,
    pub elm: ElmConfig,
    /// Hold-out share used to pick the ELM size.
    pub elm_val_fraction: f64,
    pub eval_window: EvalWindow,
    pub allow_pi_eq_tau: bool,
    /// iSNN retrains start from the previous generation's weights.
    pub warm_start: bool,
    pub metrics: MetricsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: vec![
                (ModelKind::Snn, Strategy::Static),
                (ModelKind::Snn, Strategy::IncrementalRetrain),
                (ModelKind::Elm, Strategy::Static),
                (ModelKind::Elm, Strategy::AdaptiveUpdate),
            ],
            grid: enumerate_grid_with(false),
            modes: vec![UpdateMode::Regular, UpdateMode::Opportunistic],
            initial_window: 672,
            offsets: vec![0, 336, 672, 1008],
            test_span: 5075,
            init_repeats: 10,
            master_seed: 0,
            snn_sizes: vec![3, 5, 7],
            elm_sizes: vec![15, 25, 45],
            snn: SnnConfig::default(),
            elm: ElmConfig::default(),
            elm_val_fraction: 0.25,
            eval_window: EvalWindow::PerOffset,
            allow_pi_eq_tau: false,
            warm_start: false,
            metrics: MetricsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.init_repeats == 0 {
            return bad("init_repeats must be at least 1");
        }
        if self.offsets.is_empty() {
            return bad("at least one offset is required");
        }
        if self.test_span == 0 || self.initial_window == 0 {
            return bad("initial_window and test_span must be positive");
        }
        for (kind, strategy) in &self.models {
            if *strategy == Strategy::AdaptiveUpdate && *kind != ModelKind::Elm {
                return Err(ExperimentError::Config(format!(
                    "adaptive_update applies to elm only, not {kind}"
                )));
            }
        }
        if self.snn_sizes.is_empty() || self.elm_sizes.is_empty() {
            return bad("hidden-size lists must not be empty");
        }
        Ok(())
    }

    /// Every cell the configuration asks for, in report order.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        for &(kind, strategy) in &self.models {
            if strategy == Strategy::Static {
                cells.push(CellSpec::fixed(kind));
                continue;
            }
            for &mode in &self.modes {
                for &(tau, pi) in &self.grid {
                    cells.push(CellSpec {
                        kind,
                        strategy,
                        schedule: Some((tau, pi, mode)),
                    });
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        cells.retain(|c| seen.insert(*c));
        cells
    }
}

/// One cell of the results grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellSpec {
    pub kind: ModelKind,
    pub strategy: Strategy,
    /// `(tau, pi, mode)`; `None` for STATIC.
    pub schedule: Option<(usize, usize, UpdateMode)>,
}

impl CellSpec {
    pub fn fixed(kind: ModelKind) -> Self {
        CellSpec {
            kind,
            strategy: Strategy::Static,
            schedule: None,
        }
    }

    pub fn adaptive(kind: ModelKind, tau: usize, pi: usize, mode: UpdateMode) -> Self {
        CellSpec {
            kind,
            strategy: Strategy::default_for(kind),
            schedule: Some((tau, pi, mode)),
        }
    }
}

impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.strategy)?;
        if let Some((tau, pi, mode)) = self.schedule {
            write!(f, "/tau={tau}/pi={pi}/{mode}")?;
        }
        Ok(())
    }
}

/// First eight bytes (little endian) of SHA-256 over `"{master}/{key}"`.
pub fn derive_seed(master: u64, key: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}/{key}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Usable labeled samples in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub timestamps: Vec<i64>,
    pub samples: Vec<Sample>,
}

impl LabeledStream {
    /// Skips outliers and records without a reference value.
    pub fn from_dataset(d: &Dataset) -> Self {
        let mut timestamps = Vec::new();
        let mut samples = Vec::new();
        for r in &d.records {
            if let Some(s) = Sample::from_record(r) {
                timestamps.push(r.timestamp);
                samples.push(s);
            }
        }
        LabeledStream { timestamps, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A trained initial model and the hidden size its scan selected.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialModel {
    pub model: CalibrationModel,
    pub hidden: Option<usize>,
}

/// Fits the offset's initial model, scanning hidden sizes for SNN and ELM.
pub fn initial_model(
    stream: &LabeledStream,
    cfg: &ExperimentConfig,
    kind: ModelKind,
    offset: usize,
    repeat: usize,
) -> Result<InitialModel, ExperimentError> {
    let cell = format!("{kind}/initial/offset={offset}/repeat={repeat}");
    let end = offset + cfg.initial_window;
    if end > stream.len() {
        return Err(ExperimentError::Sizing {
            cell,
            needed: end,
            available: stream.len(),
            offset,
            window: cfg.initial_window,
            span: 0,
        });
    }
    let window = &stream.samples[offset..end];
    let seed = derive_seed(cfg.master_seed, &format!("init/{kind}/{offset}/{repeat}"));
    let wrap = |source| ExperimentError::Model { cell: cell.clone(), source };
    Ok(match kind {
        ModelKind::Multilinear => InitialModel {
            model: CalibrationModel::Multilinear(train_linear(window).map_err(wrap)?),
            hidden: None,
        },
        ModelKind::Snn => {
            let scan = scan_snn(window, &cfg.snn_sizes, seed, &cfg.snn).map_err(wrap)?;
            InitialModel {
                model: CalibrationModel::Snn(scan.model),
                hidden: Some(scan.hidden),
            }
        }
        ModelKind::Elm => {
            let scan = scan_elm(window, &cfg.elm_sizes, seed, &cfg.elm, cfg.elm_val_fraction).map_err(wrap)?;
            InitialModel {
                model: CalibrationModel::Elm(scan.model),
                hidden: Some(scan.hidden),
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Index in the post-calibration stream.
    pub index: usize,
    pub timestamp: i64,
    pub truth: f64,
    pub pred: f64,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    /// Generation produced by this adaptation.
    pub generation: usize,
    /// Stream index after which the new generation is active.
    pub point: usize,
    /// Largest label index it saw.
    pub last_label: usize,
    pub labels: usize,
    /// Samples the model was fit on (retrain) or updated with (RLS).
    pub train_size: usize,
    pub wall_secs: f64,
    /// The adaptation failed and the previous generation stayed active.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub cell: CellSpec,
    pub offset: usize,
    pub repeat: usize,
    pub hidden: Option<usize>,
    pub initial_size: usize,
    pub points: Vec<TracePoint>,
    pub adaptations: Vec<Adaptation>,
    /// Stream indices `[start, end)` that enter the metrics.
    pub scored: (usize, usize),
    pub labels_consumed: usize,
}

impl RunTrace {
    pub fn generations(&self) -> usize {
        let mut g: Vec<usize> = self.points.iter().map(|p| p.generation).collect();
        g.dedup();
        g.len()
    }

    pub fn metrics(&self, cfg: &MetricsConfig) -> Result<MetricSet, MetricsError> {
        let (a, b) = self.scored;
        let truth: Vec<f64> = self.points[a..b].iter().map(|p| p.truth).collect();
        let pred: Vec<f64> = self.points[a..b].iter().map(|p| p.pred).collect();
        compute_metrics_with(&truth, &pred, cfg)
    }

    /// Checks causality, generation ordering and label accounting.
    pub fn verify(&self) -> Result<(), String> {
        let mut active_from = vec![0usize];
        for a in &self.adaptations {
            if a.last_label > a.point {
                return Err(format!("generation {} saw label {} after its switch point {}", a.generation, a.last_label, a.point));
            }
            if !a.failed {
                if a.generation != active_from.len() {
                    return Err(format!("generation {} out of sequence", a.generation));
                }
                active_from.push(a.point + 1);
            }
        }
        let mut last = 0;
        for p in &self.points {
            if p.generation < last {
                return Err(format!("generation decreases at index {}", p.index));
            }
            last = p.generation;
            let from = active_from.get(p.generation).ok_or("unknown generation")?;
            let until = active_from.get(p.generation + 1).copied().unwrap_or(usize::MAX);
            if p.index < *from || p.index >= until {
                return Err(format!("index {} predicted by generation {} outside its active range", p.index, p.generation));
            }
        }
        let consumed: usize = self.adaptations.iter().map(|a| a.labels).sum();
        if consumed != self.labels_consumed {
            return Err(format!("labels consumed {} but adaptations saw {consumed}", self.labels_consumed));
        }
        if self.cell.strategy == Strategy::IncrementalRetrain {
            let mut seen = 0;
            let mut prev = 0;
            for a in &self.adaptations {
                seen += a.labels;
                if a.train_size != self.initial_size + seen || a.train_size < prev {
                    return Err(format!("retrain set size {} != {} + {seen}", a.train_size, self.initial_size));
                }
                prev = a.train_size;
            }
        }
        Ok(())
    }
}

fn stream_bounds(stream: &LabeledStream, cfg: &ExperimentConfig, cell: &CellSpec, offset: usize) -> Result<(usize, usize, (usize, usize)), ExperimentError> {
    let start = offset + cfg.initial_window;
    let (end, scored_from) = match cfg.eval_window {
        EvalWindow::PerOffset => (start + cfg.test_span, start),
        EvalWindow::Shared => {
            let latest = cfg.offsets.iter().copied().max().unwrap_or(offset) + cfg.initial_window;
            (latest + cfg.test_span, latest)
        }
    };
    if end > stream.len() {
        return Err(ExperimentError::Sizing {
            cell: cell.to_string(),
            needed: end,
            available: stream.len(),
            offset,
            window: cfg.initial_window,
            span: cfg.test_span,
        });
    }
    Ok((start, end, (scored_from - start, end - start)))
}

/// Runs one cell for one offset and repeat, training the initial model first.
pub fn run_cell(
    stream: &LabeledStream,
    cfg: &ExperimentConfig,
    cell: &CellSpec,
    offset: usize,
    repeat: usize,
) -> Result<RunTrace, ExperimentError> {
    let init = initial_model(stream, cfg, cell.kind, offset, repeat)?;
    run_cell_from(stream, cfg, cell, offset, repeat, &init)
}

/// Runs one cell starting from an already fitted initial model.
pub fn run_cell_from(
    stream: &LabeledStream,
    cfg: &ExperimentConfig,
    cell: &CellSpec,
    offset: usize,
    repeat: usize,
    init: &InitialModel,
) -> Result<RunTrace, ExperimentError> {
    if init.model.kind() != cell.kind {
        return Err(ExperimentError::Config(format!("initial model is {}, cell wants {}", init.model.kind(), cell.kind)));
    }
    let (start, end, scored) = stream_bounds(stream, cfg, cell, offset)?;
    let len = end - start;
    let wrap = |source| ExperimentError::Model { cell: cell.to_string(), source };

    let plan: Option<SchedulePlan> = match (cell.strategy, cell.schedule) {
        (Strategy::Static, _) => None,
        (_, Some((tau, pi, mode))) => {
            let sched = UpdateSchedule {
                tau,
                pi,
                mode,
                seed: derive_seed(cfg.master_seed, &format!("plan/{tau}/{pi}/{mode}/{offset}/{repeat}")),
                allow_pi_eq_tau: cfg.allow_pi_eq_tau,
            };
            Some(plan(&sched, len)?)
        }
        (_, None) => return Err(ExperimentError::Config(format!("{cell} needs a schedule"))),
    };

    let initial_set = &stream.samples[offset..start];
    let mut training: Vec<Sample> = initial_set.to_vec();
    let mut model = init.model.clone();
    let mut generation = 0;
    let mut adaptations = Vec::new();
    let mut points = Vec::with_capacity(len);
    let mut labels_consumed = 0;

    let periods = plan.as_ref().map(|p| p.periods.as_slice()).unwrap_or(&[]);
    let mut next = periods.iter().peekable();
    for i in 0..len {
        let s = &stream.samples[start + i];
        let pred = model.predict(&FeatureVector::from_array(s.x)).map_err(wrap)?;
        points.push(TracePoint {
            index: i,
            timestamp: stream.timestamps[start + i],
            truth: s.y,
            pred,
            generation,
        });
        while let Some(period) = next.next_if(|p| p.adaptation_point == i) {
            let (tau, pi, mode) = cell.schedule.expect("adaptive cell has a schedule");
            let fresh: Vec<Sample> = period.labels.iter().map(|&k| stream.samples[start + k]).collect();
            labels_consumed += fresh.len();
            training.extend_from_slice(&fresh);
            let seed = derive_seed(
                cfg.master_seed,
                &format!("retrain/{}/{tau}/{pi}/{mode}/{offset}/{repeat}/{}", cell.kind, generation + 1),
            );
            let clock = Instant::now();
            let outcome = adapt(&model, cell.strategy, &training, &fresh, init.hidden, seed, cfg);
            let wall_secs = clock.elapsed().as_secs_f64();
            let failed = outcome.is_err();
            if let Ok(m) = outcome {
                model = m;
                generation += 1;
            }
            adaptations.push(Adaptation {
                generation,
                point: i,
                last_label: period.labels.last().copied().unwrap_or(i),
                labels: fresh.len(),
                train_size: match cell.strategy {
                    Strategy::AdaptiveUpdate => fresh.len(),
                    _ => training.len(),
                },
                wall_secs,
                failed,
            });
        }
    }
    Ok(RunTrace {
        cell: *cell,
        offset,
        repeat,
        hidden: init.hidden,
        initial_size: initial_set.len(),
        points,
        adaptations,
        scored,
        labels_consumed,
    })
}

fn adapt(
    current: &CalibrationModel,
    strategy: Strategy,
    training: &[Sample],
    fresh: &[Sample],
    hidden: Option<usize>,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<CalibrationModel, ModelError> {
    match (strategy, current) {
        (Strategy::AdaptiveUpdate, CalibrationModel::Elm(m)) => match elm_update(m, fresh) {
            Err(ModelError::CovarianceNotPositive) => elm_refit(m, training).map(CalibrationModel::Elm),
            other => other.map(CalibrationModel::Elm),
        },
        (Strategy::IncrementalRetrain, CalibrationModel::Multilinear(_)) => train_linear(training).map(CalibrationModel::Multilinear),
        (Strategy::IncrementalRetrain, CalibrationModel::Snn(prev)) => {
            let h = hidden.unwrap_or(prev.hidden());
            if cfg.warm_start {
                let st = crate::models::joint_standardizer(training)?;
                snn_train_with(training, h, seed, &cfg.snn, st, Some(&prev.net)).map(|(m, _)| CalibrationModel::Snn(m))
            } else {
                snn_train(training, h, seed, &cfg.snn).map(CalibrationModel::Snn)
            }
        }
        (Strategy::IncrementalRetrain, CalibrationModel::Elm(m)) => elm_refit(m, training).map(CalibrationModel::Elm),
        (s, m) => Err(ModelError::BadHyperparameter(format!("strategy {s} does not apply to {}", m.kind()))),
    }
}

/// Mean and spread of one cell over offsets × repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellSpec,
    /// Implausible schedules are reported without values.
    pub absent: bool,
    pub runs: usize,
    /// In [`MetricSet::NAMES`] order.
    pub mean: Option<[f64; 5]>,
    /// Sample standard deviation; zero for a single run.
    pub std: Option<[f64; 5]>,
}

impl CellResult {
    pub fn mae(&self) -> Option<f64> {
        self.mean.map(|m| m[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub eval_window: EvalWindow,
    pub offsets: Vec<usize>,
    pub init_repeats: usize,
    pub test_span: usize,
    pub master_seed: u64,
    /// MAnE and nRMSE normalizers in use; the original ones are unknown.
    pub metrics: MetricsConfig,
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn get(&self, cell: &CellSpec) -> Option<&CellResult> {
        self.cells.iter().find(|c| &c.cell == cell)
    }

    /// Long form: one row per cell and metric.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["model", "strategy", "tau", "pi", "mode", "metric", "mean", "std", "runs"])?;
        for c in &self.cells {
            let (tau, pi, mode) = match c.cell.schedule {
                Some((t, p, m)) => (t.to_string(), p.to_string(), m.name().to_string()),
                None => Default::default(),
            };
            for (k, name) in MetricSet::NAMES.iter().enumerate() {
                let (mean, std) = match (c.mean, c.std) {
                    (Some(m), Some(s)) => (m[k].to_string(), s[k].to_string()),
                    _ => ("absent".to_string(), String::new()),
                };
                wtr.write_record([
                    c.cell.kind.name(),
                    c.cell.strategy.name(),
                    &tau,
                    &pi,
                    &mode,
                    name,
                    &mean,
                    &std,
                    &c.runs.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Mean and sample standard deviation per metric.
pub fn aggregate(sets: &[MetricSet]) -> Option<([f64; 5], [f64; 5])> {
    if sets.is_empty() {
        return None;
    }
    let n = sets.len() as f64;
    let mut mean = [0.0; 5];
    for s in sets {
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v / n;
        }
    }
    let mut std = [0.0; 5];
    if sets.len() > 1 {
        for s in sets {
            for ((sd, v), m) in std.iter_mut().zip(s.values()).zip(mean) {
                *sd += (v - m).powi(2) / (n - 1.0);
            }
        }
        std.iter_mut().for_each(|v| *v = v.sqrt());
    }
    Some((mean, std))
}

/// Everything a grid run produced; traces only when requested.
#[derive(Debug, Clone)]
pub struct GridOutput {
    pub report: ExperimentReport,
    pub traces: Vec<RunTrace>,
}

/// Runs every configured cell over offsets × repeats. Independent jobs run
/// on the rayon pool; results are merged in configuration order.
pub fn run_grid(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    run_grid_traced(data, cfg, false).map(|o| o.report)
}

pub fn run_grid_traced(data: &Dataset, cfg: &ExperimentConfig, keep_traces: bool) -> Result<GridOutput, ExperimentError> {
    cfg.check()?;
    let stream = LabeledStream::from_dataset(data);
    let runs: Vec<(usize, usize)> = cfg
        .offsets
        .iter()
        .flat_map(|&o| (0..cfg.init_repeats).map(move |r| (o, r)))
        .collect();

    let mut kinds: Vec<ModelKind> = cfg.models.iter().map(|(k, _)| *k).collect();
    kinds.sort();
    kinds.dedup();
    let init_jobs: Vec<(ModelKind, usize, usize)> = kinds
        .iter()
        .flat_map(|&k| runs.iter().map(move |&(o, r)| (k, o, r)))
        .collect();
    let inits: BTreeMap<(ModelKind, usize, usize), InitialModel> = init_jobs
        .par_iter()
        .map(|&(k, o, r)| initial_model(&stream, cfg, k, o, r).map(|m| ((k, o, r), m)))
        .collect::<Result<_, _>>()?;

    let cells = cfg.cells();
    let plausible = |c: &CellSpec| match c.schedule {
        Some((tau, pi, mode)) => UpdateSchedule {
            tau,
            pi,
            mode,
            seed: 0,
            allow_pi_eq_tau: cfg.allow_pi_eq_tau,
        }
        .check()
        .is_ok(),
        None => true,
    };
    let jobs: Vec<(usize, usize, usize)> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| plausible(c))
        .flat_map(|(ci, _)| runs.iter().map(move |&(o, r)| (ci, o, r)))
        .collect();
    let results: Vec<(usize, MetricSet, Option<RunTrace>)> = jobs
        .par_iter()
        .map(|&(ci, o, r)| {
            let cell = &cells[ci];
            let trace = run_cell_from(&stream, cfg, cell, o, r, &inits[&(cell.kind, o, r)])?;
            let m = trace.metrics(&cfg.metrics).map_err(|source| ExperimentError::Metrics {
                cell: cell.to_string(),
                source,
            })?;
            Ok((ci, m, keep_traces.then_some(trace)))
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut per_cell: Vec<Vec<MetricSet>> = vec![Vec::new(); cells.len()];
    let mut traces = Vec::new();
    for (ci, m, t) in results {
        per_cell[ci].push(m);
        traces.extend(t);
    }
    let cells = cells
        .iter()
        .zip(per_cell)
        .map(|(c, sets)| {
            let agg = aggregate(&sets);
            CellResult {
                cell: *c,
                absent: agg.is_none(),
                runs: sets.len(),
                mean: agg.map(|a| a.0),
                std: agg.map(|a| a.1),
            }
        })
        .collect();
    Ok(GridOutput {
        report: ExperimentReport {
            eval_window: cfg.eval_window,
            offsets: cfg.offsets.clone(),
            init_repeats: cfg.init_repeats,
            test_span: cfg.test_span,
            master_seed: cfg.master_seed,
            metrics: cfg.metrics,
            cells,
        },
        traces,
    })
}
