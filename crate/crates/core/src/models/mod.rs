//! Calibration model families: multilinear OLS, a shallow tanh network
//! trained with Bayesian-regularized Levenberg-Marquardt, and a radial-basis
//! extreme learning machine whose output layer is updated by recursive least
//! squares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureVector, HourlyRecord, ModelKind, PlausibilityGates, N_FEATURES};
use crate::preprocess::PreprocessError;

mod elm;
mod linear;
mod snn;

pub use elm::{elm_fit, elm_refit, elm_update, ElmConfig, ElmModel};
pub use linear::{ols_fit, train_linear, LinearModel};
pub(crate) use snn::joint_standardizer;
pub use snn::{
    snn_gradient, snn_train, snn_train_report, snn_train_with, FixedRegularization, SnnConfig, SnnModel,
    SnnNet, StopReason, TrainReport,
};

/// One calibration tuple: raw features and the reference NO₂ (ppb).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: [f64; N_FEATURES],
    pub y: f64,
}

impl Sample {
    pub fn new(x: [f64; N_FEATURES], y: f64) -> Self {
        Sample { x, y }
    }

    /// `None` for outliers and unlabeled records.
    pub fn from_record(r: &HourlyRecord) -> Option<Self> {
        if !r.is_usable() {
            return None;
        }
        r.ref_no2.map(|y| Sample {
            x: r.features.to_array(),
            y,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("need at least {needed} labeled samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    Singular { rank: usize, cols: usize },
    #[error("system ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("training diverged at epoch {0}: non-finite loss")]
    Diverged(usize),
    #[error("covariance lost positive definiteness; refit required")]
    CovarianceNotPositive,
    #[error("model has no trained parameters")]
    NotTrained,
    #[error("input fails plausibility gate on `{0}`")]
    Implausible(&'static str),
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("model container: {0}")]
    Container(String),
}

/// Any trained calibration model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CalibrationModel {
    Multilinear(LinearModel),
    Snn(SnnModel),
    Elm(ElmModel),
}

impl CalibrationModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            CalibrationModel::Multilinear(_) => ModelKind::Multilinear,
            CalibrationModel::Snn(_) => ModelKind::Snn,
            CalibrationModel::Elm(_) => ModelKind::Elm,
        }
    }

    /// NO₂ estimate in ppb. Negative estimates are returned as-is.
    pub fn predict(&self, f: &FeatureVector) -> Result<f64, ModelError> {
        if let Some(channel) = PlausibilityGates::default().check(f) {
            return Err(ModelError::Implausible(channel));
        }
        let x = f.to_array();
        let y = match self {
            CalibrationModel::Multilinear(m) => m.predict_raw(&x)?,
            CalibrationModel::Snn(m) => m.predict_raw(&x)?,
            CalibrationModel::Elm(m) => m.predict_raw(&x)?,
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(ModelError::NotTrained)
        }
    }

    /// Serializes into the versioned text container.
    pub fn to_container(&self) -> String {
        let c = ContainerRef {
            format: CONTAINER_FORMAT,
            version: CONTAINER_VERSION,
            model: self,
        };
        serde_json::to_string_pretty(&c).expect("model serialization cannot fail")
    }

    pub fn from_container(text: &str) -> Result<Self, ModelError> {
        let c: Container = serde_json::from_str(text).map_err(|e| ModelError::Container(e.to_string()))?;
        if c.format != CONTAINER_FORMAT {
            return Err(ModelError::Container(format!("unexpected format `{}`", c.format)));
        }
        if c.version != CONTAINER_VERSION {
            return Err(ModelError::Container(format!("unsupported version {}", c.version)));
        }
        Ok(c.model)
    }
}

const CONTAINER_FORMAT: &str = "aqcal-model";
const CONTAINER_VERSION: u32 = 1;

#[derive(Serialize)]
struct ContainerRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a CalibrationModel,
}

#[derive(Deserialize)]
struct Container {
    format: String,
    version: u32,
    model: CalibrationModel,
}

/// Winner of a hidden-layer size scan and the validation MSE of every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult<M> {
    pub model: M,
    pub hidden: usize,
    pub scores: Vec<(usize, f64)>,
}

/// Trains one network per candidate size and keeps the one with the lowest
/// held-out MSE (ties go to the smaller size).
pub fn scan_snn(samples: &[Sample], sizes: &[usize], seed: u64, cfg: &SnnConfig) -> Result<ScanResult<SnnModel>, ModelError> {
    let mut best: Option<(SnnModel, usize, f64)> = None;
    let mut scores = Vec::new();
    for &h in sizes {
        let (model, report) = snn_train_report(samples, h, seed, cfg)?;
        let score = report.best_val_mse.unwrap_or(report.final_train_mse);
        scores.push((h, score));
        if best.as_ref().map_or(true, |(_, _, s)| score < *s) {
            best = Some((model, h, score));
        }
    }
    let (model, hidden, _) = best.ok_or_else(|| ModelError::BadHyperparameter("empty size list".into()))?;
    Ok(ScanResult { model, hidden, scores })
}

/// Scores each ELM size on a seeded hold-out split, then refits the winner on all samples.
pub fn scan_elm(
    samples: &[Sample],
    sizes: &[usize],
    seed: u64,
    cfg: &ElmConfig,
    val_fraction: f64,
) -> Result<ScanResult<ElmModel>, ModelError> {
    let (train, val) = split_holdout(samples, val_fraction, seed);
    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for &h in sizes {
        let m = elm_fit(&train, h, seed, cfg)?;
        let mse = val
            .iter()
            .map(|s| (m.predict_raw(&s.x).unwrap_or(f64::INFINITY) - s.y).powi(2))
            .sum::<f64>()
            / val.len().max(1) as f64;
        scores.push((h, mse));
        if best.map_or(true, |(_, s)| mse < s) {
            best = Some((h, mse));
        }
    }
    let (hidden, _) = best.ok_or_else(|| ModelError::BadHyperparameter("empty size list".into()))?;
    Ok(ScanResult {
        model: elm_fit(samples, hidden, seed, cfg)?,
        hidden,
        scores,
    })
}

/// Seeded shuffle split; the second part holds `round(n * fraction)` samples.
pub(crate) fn split_holdout(samples: &[Sample], fraction: f64, seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    let idx = holdout_indices(samples.len(), fraction, seed);
    let mut is_val = vec![false; samples.len()];
    for i in idx {
        is_val[i] = true;
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (s, v) in samples.iter().zip(is_val) {
        if v {
            val.push(*s);
        } else {
            train.push(*s);
        }
    }
    (train, val)
}

pub(crate) fn holdout_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    use rand::SeedableRng;
    let k = ((n as f64) * fraction).round() as usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut idx = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                let x = [
                    200.0 + (t * 0.37).sin() * 30.0,
                    210.0 + (t * 0.11).cos() * 5.0,
                    300.0 + (t * 0.05).sin() * 40.0,
                    280.0 + (t * 0.21).cos() * 3.0,
                    220.0 + (t * 0.13).sin() * 20.0,
                    230.0 + (t * 0.07).sin() * 4.0,
                    15.0 + (t * 0.26).sin() * 8.0,
                    55.0 + (t * 0.09).cos() * 20.0,
                ];
                Sample::new(x, 30.0 + 0.5 * (x[0] - 200.0) - 0.8 * (x[6] - 15.0))
            })
            .collect()
    }

    #[test]
    fn containers_round_trip_bit_exact() {
        let data = affine_samples(120);
        let models = vec![
            CalibrationModel::Multilinear(train_linear(&data).unwrap()),
            CalibrationModel::Snn(snn_train(&data, 3, 5, &SnnConfig { max_epochs: 5, ..SnnConfig::default() }).unwrap()),
            CalibrationModel::Elm(elm_fit(&data, 15, 5, &ElmConfig::default()).unwrap()),
        ];
        for m in models {
            let text = m.to_container();
            let back = CalibrationModel::from_container(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_container(), text);
            let f = FeatureVector::from_array(data[7].x);
            assert_eq!(back.predict(&f).unwrap().to_bits(), m.predict(&f).unwrap().to_bits());
        }
    }

    #[test]
    fn container_rejects_other_versions() {
        let m = CalibrationModel::Multilinear(train_linear(&affine_samples(30)).unwrap());
        let text = m.to_container().replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(CalibrationModel::from_container(&text), Err(ModelError::Container(_))));
    }

    #[test]
    fn implausible_input_is_rejected() {
        let m = CalibrationModel::Multilinear(train_linear(&affine_samples(30)).unwrap());
        let mut x = affine_samples(1)[0].x;
        x[7] = 130.0;
        assert_eq!(m.predict(&FeatureVector::from_array(x)), Err(ModelError::Implausible("rh")));
    }

    #[test]
    fn holdout_is_seeded_and_sized() {
        let a = holdout_indices(100, 0.25, 3);
        assert_eq!(a.len(), 25);
        assert_eq!(a, holdout_indices(100, 0.25, 3));
        assert_ne!(a, holdout_indices(100, 0.25, 4));
    }

    #[test]
    fn scans_pick_a_listed_size() {
        let data = affine_samples(200);
        let cfg = SnnConfig { max_epochs: 20, ..SnnConfig::default() };
        let s = scan_snn(&data, &[3, 5], 1, &cfg).unwrap();
        assert!([3, 5].contains(&s.hidden));
        assert_eq!(s.scores.len(), 2);
        let e = scan_elm(&data, &[15, 25], 1, &ElmConfig::default(), 0.25).unwrap();
        assert!([15, 25].contains(&e.hidden));
        assert_eq!(e.model.hidden(), e.hidden);
    }
}
