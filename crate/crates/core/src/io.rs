//! CSV forms of datasets, raw sensor streams and reference exports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! dataset read back from its own CSV is bit-identical to the original.

use std::io::{Read, Write};

use thiserror::Error;

use crate::dataset::{
    format_timestamp, parse_timestamp, Dataset, FeatureVector, Flags, HourlyRecord, FEATURE_NAMES,
    N_FEATURES,
};
use crate::ingest::{RawSample, ReferenceRow};

pub const DATASET_HEADER: [&str; 13] = [
    "timestamp", "we_no2", "ae_no2", "we_co", "ae_co", "we_o3", "ae_o3", "temp", "rh", "ref_no2",
    "ref_co", "coverage", "flags",
];

pub const REFERENCE_HEADER: [&str; 3] = ["timestamp", "no2_ppb", "co_ppm"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    Header {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}, column `{column}`: {message}")]
    Field {
        line: usize,
        column: String,
        message: String,
    },
}

fn field_err(line: usize, column: &str, message: impl Into<String>) -> CsvError {
    CsvError::Field {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), CsvError> {
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != expected {
        return Err(CsvError::Header {
            line: 1,
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize, column: &str) -> Result<f64, CsvError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| field_err(line, column, e.to_string()))
}

fn parse_opt(s: &str, line: usize, column: &str) -> Result<Option<f64>, CsvError> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line, column).map(Some)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_ts(s: &str, line: usize) -> Result<i64, CsvError> {
    parse_timestamp(s).map_err(|m| field_err(line, "timestamp", m))
}

fn parse_features(rec: &csv::StringRecord, line: usize) -> Result<FeatureVector, CsvError> {
    let mut a = [0.0; N_FEATURES];
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        a[k] = parse_f64(&rec[k + 1], line, name)?;
    }
    Ok(FeatureVector::from_array(a))
}

/// Writes the canonical dataset CSV.
pub fn write_dataset<W: Write>(d: &Dataset, w: W) -> Result<(), CsvError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(DATASET_HEADER)?;
    for r in &d.records {
        let mut row = Vec::with_capacity(DATASET_HEADER.len());
        row.push(format_timestamp(r.timestamp));
        row.extend(r.features.to_array().iter().map(|v| v.to_string()));
        row.push(fmt_opt(r.ref_no2));
        row.push(fmt_opt(r.ref_co));
        row.push(r.coverage.to_string());
        row.push(r.flags.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R, source: &str) -> Result<Dataset, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(&mut rdr, &DATASET_HEADER)?;
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != DATASET_HEADER.len() {
            return Err(field_err(line, "*", format!("expected 13 fields, found {}", row.len())));
        }
        let mut rec = HourlyRecord::new(parse_ts(&row[0], line)?, parse_features(&row, line)?);
        rec.ref_no2 = parse_opt(&row[9], line, "ref_no2")?;
        rec.ref_co = parse_opt(&row[10], line, "ref_co")?;
        rec.coverage = parse_f64(&row[11], line, "coverage")?;
        rec.flags = row[12]
            .parse::<Flags>()
            .map_err(|m| field_err(line, "flags", m))?;
        records.push(rec);
    }
    Ok(Dataset::new(records, source))
}

pub fn read_raw<R: Read>(r: R) -> Result<Vec<RawSample>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut header = vec!["timestamp"];
    header.extend(FEATURE_NAMES);
    check_header(&mut rdr, &header)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        out.push(RawSample {
            timestamp: parse_ts(&row[0], line)?,
            features: parse_features(&row, line)?,
        });
    }
    Ok(out)
}

pub fn write_raw<W: Write>(samples: &[RawSample], w: W) -> Result<(), CsvError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["timestamp"];
    header.extend(FEATURE_NAMES);
    wtr.write_record(&header)?;
    for s in samples {
        let mut row = vec![format_timestamp(s.timestamp)];
        row.extend(s.features.to_array().iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_reference<R: Read>(r: R) -> Result<Vec<ReferenceRow>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(&mut rdr, &REFERENCE_HEADER)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        out.push(ReferenceRow {
            timestamp: parse_ts(&row[0], line)?,
            no2_ppb: parse_opt(&row[1], line, "no2_ppb")?,
            co_ppm: parse_opt(&row[2], line, "co_ppm")?,
        });
    }
    Ok(out)
}

pub fn write_reference<W: Write>(rows: &[ReferenceRow], w: W) -> Result<(), CsvError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(REFERENCE_HEADER)?;
    for r in rows {
        wtr.write_record([format_timestamp(r.timestamp), fmt_opt(r.no2_ppb), fmt_opt(r.co_ppm)])?;
    }
    wtr.flush()?;
    Ok(())
}
