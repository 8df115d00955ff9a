//! Accuracy indicators and moving-average smoothing of error series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {truth} true values, {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no samples to score")]
    Empty,
    #[error("true value at index {0} is negative or non-finite")]
    BadTruth(usize),
    #[error("prediction at index {0} is non-finite")]
    BadPrediction(usize),
    #[error("MRE undefined: every true value is below the {0} ppb floor")]
    MreUndefined(f64),
    #[error("{0} undefined: normalizer is zero")]
    ZeroNormalizer(&'static str),
}

/// Normalizer used for MAnE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ManeNorm {
    /// max(y) − min(y)
    #[default]
    Range,
    Mean,
}

/// Normalizer used for nRMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NrmseNorm {
    /// Population standard deviation of the true values.
    #[default]
    Std,
    Range,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// True values below this (ppb) are left out of MRE.
    pub mre_floor: f64,
    pub mane_norm: ManeNorm,
    pub nrmse_norm: NrmseNorm,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            mre_floor: 1.0,
            mane_norm: ManeNorm::Range,
            nrmse_norm: NrmseNorm::Std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub mane: f64,
    pub mre: f64,
    pub rmse: f64,
    pub nrmse: f64,
    /// Samples scored.
    pub n: usize,
    /// Samples at or above the MRE floor.
    pub n_mre: usize,
}

impl MetricSet {
    pub const NAMES: [&'static str; 5] = ["mae", "mane", "mre", "rmse", "nrmse"];

    pub fn values(&self) -> [f64; 5] {
        [self.mae, self.mane, self.mre, self.rmse, self.nrmse]
    }
}

/// Scores predictions against reference values with the default configuration.
pub fn compute_metrics(truth: &[f64], pred: &[f64], mre_floor: f64) -> Result<MetricSet, MetricsError> {
    compute_metrics_with(
        truth,
        pred,
        &MetricsConfig {
            mre_floor,
            ..MetricsConfig::default()
        },
    )
}

pub fn compute_metrics_with(truth: &[f64], pred: &[f64], cfg: &MetricsConfig) -> Result<MetricSet, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = truth.iter().position(|y| !(y.is_finite() && *y >= 0.0)) {
        return Err(MetricsError::BadTruth(i));
    }
    if let Some(i) = pred.iter().position(|p| !p.is_finite()) {
        return Err(MetricsError::BadPrediction(i));
    }

    let n = truth.len() as f64;
    let (mut abs_sum, mut sq_sum, mut rel_sum, mut n_mre) = (0.0, 0.0, 0.0, 0usize);
    let (mut lo, mut hi, mut y_sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for (&y, &p) in truth.iter().zip(pred) {
        let e = (p - y).abs();
        abs_sum += e;
        sq_sum += e * e;
        if y >= cfg.mre_floor {
            rel_sum += e / y;
            n_mre += 1;
        }
        lo = lo.min(y);
        hi = hi.max(y);
        y_sum += y;
    }
    let mean_y = y_sum / n;
    let var_y = truth.iter().map(|y| (y - mean_y).powi(2)).sum::<f64>() / n;

    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();
    if n_mre == 0 {
        return Err(MetricsError::MreUndefined(cfg.mre_floor));
    }
    let mre = rel_sum / n_mre as f64;

    let mane_den = match cfg.mane_norm {
        ManeNorm::Range => hi - lo,
        ManeNorm::Mean => mean_y,
    };
    let nrmse_den = match cfg.nrmse_norm {
        NrmseNorm::Std => var_y.sqrt(),
        NrmseNorm::Range => hi - lo,
        NrmseNorm::Mean => mean_y,
    };
    let normalize = |num: f64, den: f64, name: &'static str| {
        if den > 0.0 {
            Ok(num / den)
        } else {
            Err(MetricsError::ZeroNormalizer(name))
        }
    };
    Ok(MetricSet {
        mae,
        mane: normalize(mae, mane_den, "MAnE")?,
        mre,
        rmse,
        nrmse: normalize(rmse, nrmse_den, "nRMSE")?,
        n: truth.len(),
        n_mre,
    })
}

/// Symmetric moving average: each output is the mean of the inputs within
/// `±window/2` positions, truncated at the series ends.
pub fn smooth_series(values: &[f64], window: usize) -> Result<Vec<f64>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let half = window / 2;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect())
}
