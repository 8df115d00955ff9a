//! Adaptive calibration of low-cost air-quality multisensor devices.
//!
//! The crate covers the whole chain from raw electrode readings to long-run
//! accuracy figures:
//!
//! * [`ingest`] averages raw streams into hourly records and joins reference labels,
//! * [`preprocess`] standardizes features and removes DBSCAN outliers,
//! * [`simulate`] produces synthetic multi-season deployments with sensor drift,
//! * [`models`] holds the multilinear, shallow-network and RBF-ELM calibrators,
//! * [`schedule`] decides when label tuples arrive and when models adapt,
//! * [`experiment`] runs static, retrained and updated models over a schedule grid,
//! * [`metrics`] scores the resulting predictions.

pub mod cli;
pub mod dataset;
pub mod experiment;
pub mod ingest;
pub mod io;
pub mod kv;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod schedule;
pub mod simulate;

pub use dataset::{
    validate_dataset, validate_dataset_with, Dataset, FeatureVector, Flag, Flags, HourlyRecord, ModelKind,
    PlausibilityGates, Violation,
};
