//! Shared domain types: feature vectors, hourly records and datasets.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Seconds in one hour.
pub const HOUR: i64 = 3600;

/// Number of sensor inputs seen by every calibration model.
pub const N_FEATURES: usize = 8;

/// Column names of the eight model inputs, in storage order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "we_no2", "ae_no2", "we_co", "ae_co", "we_o3", "ae_o3", "temp", "rh",
];

/// One hour (or one raw sample) of electrode voltages plus environment.
///
/// Electrode voltages are in mV, `temp` in °C and `rh` in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub we_no2: f64,
    pub ae_no2: f64,
    pub we_co: f64,
    pub ae_co: f64,
    pub we_o3: f64,
    pub ae_o3: f64,
    pub temp: f64,
    pub rh: f64,
}

impl FeatureVector {
    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        FeatureVector {
            we_no2: a[0],
            ae_no2: a[1],
            we_co: a[2],
            ae_co: a[3],
            we_o3: a[4],
            ae_o3: a[5],
            temp: a[6],
            rh: a[7],
        }
    }

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.we_no2,
            self.ae_no2,
            self.we_co,
            self.ae_co,
            self.we_o3,
            self.ae_o3,
            self.temp,
            self.rh,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Physical plausibility limits for the environmental channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityGates {
    pub temp_min: f64,
    pub temp_max: f64,
    pub rh_min: f64,
    pub rh_max: f64,
}

impl Default for PlausibilityGates {
    fn default() -> Self {
        PlausibilityGates {
            temp_min: -40.0,
            temp_max: 60.0,
            rh_min: 0.0,
            rh_max: 100.0,
        }
    }
}

impl PlausibilityGates {
    /// Returns the name of the first channel outside its gate, if any.
    pub fn check(&self, f: &FeatureVector) -> Option<&'static str> {
        if !f.is_finite() {
            return Some("non-finite");
        }
        if f.temp < self.temp_min || f.temp > self.temp_max {
            return Some("temp");
        }
        if f.rh < self.rh_min || f.rh > self.rh_max {
            return Some("rh");
        }
        None
    }
}

/// Quality flags attached to an hourly record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Flag {
    Outlier,
    LowCoverage,
    GapAdjacent,
}

impl Flag {
    const ALL: [Flag; 3] = [Flag::Outlier, Flag::LowCoverage, Flag::GapAdjacent];

    fn bit(self) -> u8 {
        match self {
            Flag::Outlier => 1,
            Flag::LowCoverage => 2,
            Flag::GapAdjacent => 4,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Flag::Outlier => "OUTLIER",
            Flag::LowCoverage => "LOW_COVERAGE",
            Flag::GapAdjacent => "GAP_ADJACENT",
        }
    }
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Flag::ALL
            .into_iter()
            .find(|f| f.token() == s)
            .ok_or_else(|| format!("unknown flag `{s}`"))
    }
}

/// Small set of [`Flag`]s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flags(u8);

impl Flags {
    pub fn empty() -> Self {
        Flags(0)
    }

    pub fn contains(self, f: Flag) -> bool {
        self.0 & f.bit() != 0
    }

    pub fn insert(&mut self, f: Flag) {
        self.0 |= f.bit();
    }

    pub fn remove(&mut self, f: Flag) {
        self.0 &= !f.bit();
    }

    pub fn with(mut self, f: Flag) -> Self {
        self.insert(f);
        self
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Flag> {
        Flag::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<&str> = self.iter().map(Flag::token).collect();
        f.write_str(&tokens.join("|"))
    }
}

impl FromStr for Flags {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = Flags::empty();
        for tok in s.split('|').map(str::trim).filter(|t| !t.is_empty()) {
            flags.insert(tok.parse()?);
        }
        Ok(flags)
    }
}

/// One hour of averaged sensor features with optional reference labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    /// Unix seconds, UTC, at the start of the hour.
    pub timestamp: i64,
    pub features: FeatureVector,
    /// Reference NO₂ in ppb.
    pub ref_no2: Option<f64>,
    /// Reference CO in ppm.
    pub ref_co: Option<f64>,
    /// Fraction of the expected raw samples present in the hour.
    pub coverage: f64,
    pub flags: Flags,
}

impl HourlyRecord {
    pub fn new(timestamp: i64, features: FeatureVector) -> Self {
        HourlyRecord {
            timestamp,
            features,
            ref_no2: None,
            ref_co: None,
            coverage: 1.0,
            flags: Flags::empty(),
        }
    }

    /// Not an outlier and carrying an NO₂ label: may be used to train, update or score.
    pub fn is_usable(&self) -> bool {
        !self.flags.contains(Flag::Outlier) && self.ref_no2.is_some()
    }
}

/// Provenance of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    /// Free-form `key=value` creation parameters.
    pub params: Vec<(String, String)>,
}

/// Ordered, gap-aware sequence of hourly records.
///
/// Missing hours are simply absent. Construction does not enforce ordering;
/// use [`validate_dataset`] to check the invariants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<HourlyRecord>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(records: Vec<HourlyRecord>, source: impl Into<String>) -> Self {
        Dataset {
            records,
            meta: DatasetMeta {
                source: source.into(),
                params: Vec::new(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records eligible for training and scoring, in time order.
    pub fn usable(&self) -> Vec<&HourlyRecord> {
        self.records.iter().filter(|r| r.is_usable()).collect()
    }

    /// Sets [`Flag::GapAdjacent`] on every record whose previous or next hour is missing.
    /// Dataset ends are not treated as gaps.
    pub fn mark_gap_adjacent(&mut self) {
        let n = self.records.len();
        for i in 0..n {
            let ts = self.records[i].timestamp;
            let before = i > 0 && self.records[i - 1].timestamp != ts - HOUR;
            let after = i + 1 < n && self.records[i + 1].timestamp != ts + HOUR;
            if before || after {
                self.records[i].flags.insert(Flag::GapAdjacent);
            }
        }
    }
}

/// Calibration model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    Multilinear,
    Snn,
    Elm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Multilinear => "multilinear",
            ModelKind::Snn => "snn",
            ModelKind::Elm => "elm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "multilinear" | "linear" => Ok(ModelKind::Multilinear),
            "snn" => Ok(ModelKind::Snn),
            "elm" => Ok(ModelKind::Elm),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Which dataset invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    DuplicateTimestamp,
    OutOfOrder,
    Misaligned,
    NonFinite,
    Range,
    NegativeLabel,
    Coverage,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::DuplicateTimestamp => "DUPLICATE_TIMESTAMP",
            Rule::OutOfOrder => "OUT_OF_ORDER",
            Rule::Misaligned => "MISALIGNED",
            Rule::NonFinite => "NON_FINITE",
            Rule::Range => "RANGE",
            Rule::NegativeLabel => "NEGATIVE_LABEL",
            Rule::Coverage => "COVERAGE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}: {} ({})", self.index, self.rule.name(), self.detail)
    }
}

/// Checks every dataset invariant with the default plausibility gates.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    validate_dataset_with(d, &PlausibilityGates::default())
}

pub fn validate_dataset_with(d: &Dataset, gates: &PlausibilityGates) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |index: usize, rule: Rule, detail: String| {
        out.push(Violation {
            index,
            rule,
            detail,
        })
    };
    for (i, r) in d.records.iter().enumerate() {
        if r.timestamp.rem_euclid(HOUR) != 0 {
            push(i, Rule::Misaligned, format!("timestamp {}", r.timestamp));
        }
        if i > 0 {
            let prev = d.records[i - 1].timestamp;
            if r.timestamp == prev {
                push(i, Rule::DuplicateTimestamp, format_timestamp(r.timestamp));
            } else if r.timestamp < prev {
                push(i, Rule::OutOfOrder, format_timestamp(r.timestamp));
            }
        }
        let labels_finite = r.ref_no2.map_or(true, f64::is_finite) && r.ref_co.map_or(true, f64::is_finite);
        if !r.features.is_finite() || !labels_finite || !r.coverage.is_finite() {
            push(i, Rule::NonFinite, "non-finite value".into());
            continue;
        }
        if let Some(channel) = gates.check(&r.features) {
            let v = if channel == "temp" { r.features.temp } else { r.features.rh };
            push(i, Rule::Range, format!("{channel} = {v}"));
        }
        for (name, v) in [("ref_no2", r.ref_no2), ("ref_co", r.ref_co)] {
            if let Some(v) = v.filter(|v| *v < 0.0) {
                push(i, Rule::NegativeLabel, format!("{name} = {v}"));
            }
        }
        if !(0.0..=1.0).contains(&r.coverage) {
            push(i, Rule::Coverage, format!("coverage = {}", r.coverage));
        }
    }
    out
}

/// Formats unix seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(ts: i64) -> String {
    match Utc.timestamp_opt(ts, 0).single() {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => ts.to_string(),
    }
}

/// Parses unix seconds, RFC 3339, or `YYYY-MM-DD HH:MM[:SS]` (taken as UTC).
pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(format!("unrecognised timestamp `{s}`"))
}
