//! Hourly aggregation of raw sensor streams and joining of reference labels.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::dataset::{format_timestamp, Dataset, FeatureVector, Flag, HourlyRecord, HOUR, N_FEATURES};

/// Nominal raw rate is 10 samples per minute.
pub const EXPECTED_SAMPLES_PER_HOUR: usize = 600;

pub const DEFAULT_MIN_COVERAGE: f64 = 0.75;

/// One raw acquisition, timestamp in unix seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub timestamp: i64,
    pub features: FeatureVector,
}

/// One hourly row of a reference-analyzer export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub timestamp: i64,
    pub no2_ppb: Option<f64>,
    pub co_ppm: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("raw samples not sorted: index {index} goes back in time")]
    Unsorted { index: usize },
    #[error("raw sample {index} has a non-finite channel")]
    NonFinite { index: usize },
    #[error("duplicate reference timestamp {0}")]
    DuplicateReference(String),
    #[error("reference timestamp {0} is not on an hour boundary")]
    MisalignedReference(String),
    #[error("min_coverage must lie in [0, 1], got {0}")]
    BadCoverage(f64),
}

/// Averages raw samples into one record per hour that has at least one sample.
///
/// Hours with `coverage < min_coverage` are kept but flagged [`Flag::LowCoverage`].
pub fn aggregate_hourly(raw: &[RawSample], min_coverage: f64) -> Result<Dataset, IngestError> {
    if !(0.0..=1.0).contains(&min_coverage) {
        return Err(IngestError::BadCoverage(min_coverage));
    }
    if let Some(i) = (1..raw.len()).find(|&i| raw[i].timestamp < raw[i - 1].timestamp) {
        return Err(IngestError::Unsorted { index: i });
    }
    if let Some(i) = raw.iter().position(|s| !s.features.is_finite()) {
        return Err(IngestError::NonFinite { index: i });
    }

    let mut records = Vec::new();
    let mut start = 0;
    while start < raw.len() {
        let hour = raw[start].timestamp.div_euclid(HOUR) * HOUR;
        let end = start + raw[start..].partition_point(|s| s.timestamp < hour + HOUR);
        let count = end - start;
        let mut sum = [0.0; N_FEATURES];
        for s in &raw[start..end] {
            for (acc, v) in sum.iter_mut().zip(s.features.to_array()) {
                *acc += v;
            }
        }
        let mean = sum.map(|v| v / count as f64);
        let mut rec = HourlyRecord::new(hour, FeatureVector::from_array(mean));
        rec.coverage = (count as f64 / EXPECTED_SAMPLES_PER_HOUR as f64).min(1.0);
        if rec.coverage < min_coverage {
            rec.flags.insert(Flag::LowCoverage);
        }
        records.push(rec);
        start = end;
    }
    let mut d = Dataset::new(records, "raw");
    d.meta.params.push(("min_coverage".into(), min_coverage.to_string()));
    d.mark_gap_adjacent();
    Ok(d)
}

/// Outcome counts of [`join_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct JoinReport {
    pub matched: usize,
    /// Reference rows whose hour has no record in the dataset.
    pub ignored: usize,
}

/// Attaches reference labels by exact hour match. No records are created or dropped.
pub fn join_reference(d: &Dataset, refs: &[ReferenceRow]) -> Result<(Dataset, JoinReport), IngestError> {
    let mut by_hour: BTreeMap<i64, &ReferenceRow> = BTreeMap::new();
    for r in refs {
        if r.timestamp.rem_euclid(HOUR) != 0 {
            return Err(IngestError::MisalignedReference(format_timestamp(r.timestamp)));
        }
        if by_hour.insert(r.timestamp, r).is_some() {
            return Err(IngestError::DuplicateReference(format_timestamp(r.timestamp)));
        }
    }
    let index: HashMap<i64, usize> = d
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.timestamp, i))
        .collect();

    let mut out = d.clone();
    let mut report = JoinReport::default();
    for (ts, r) in by_hour {
        match index.get(&ts) {
            Some(&i) => {
                out.records[i].ref_no2 = r.no2_ppb;
                out.records[i].ref_co = r.co_ppm;
                report.matched += 1;
            }
            None => report.ignored += 1,
        }
    }
    Ok((out, report))
}
