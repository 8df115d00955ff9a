//! Label-delivery and adaptation schedules over the post-calibration stream.
//!
//! A schedule is described by its period `tau` (samples between adaptations),
//! its label budget `pi` (labeled samples delivered per period) and a mode:
//! regular plans take the first `pi` samples of each period and switch models
//! right after them, opportunistic plans draw `pi` samples uniformly from the
//! period and switch at the period's end.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Adaptation periods, hours.
pub const TAU_SET: [usize; 7] = [2, 12, 24, 120, 240, 720, 2160];
/// Label budgets per period, hours.
pub const PI_SET: [usize; 6] = [1, 4, 12, 24, 120, 168];

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("pi ({pi}) must be smaller than tau ({tau})")]
    PiNotBelowTau { tau: usize, pi: usize },
    #[error("pi ({pi}) must not exceed tau ({tau})")]
    PiAboveTau { tau: usize, pi: usize },
    #[error("tau and pi must be positive")]
    Zero,
    #[error("stream length must be at least 1")]
    EmptyStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UpdateMode {
    Regular,
    Opportunistic,
}

impl UpdateMode {
    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::Regular => "regular",
            UpdateMode::Opportunistic => "opportunistic",
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "regular" => Ok(UpdateMode::Regular),
            "opportunistic" | "random" => Ok(UpdateMode::Opportunistic),
            other => Err(format!("unknown update mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub tau: usize,
    pub pi: usize,
    pub mode: UpdateMode,
    pub seed: u64,
    /// Accept `pi == tau` (the strict rule rejects it).
    pub allow_pi_eq_tau: bool,
}

impl UpdateSchedule {
    pub fn new(tau: usize, pi: usize, mode: UpdateMode, seed: u64) -> Self {
        UpdateSchedule {
            tau,
            pi,
            mode,
            seed,
            allow_pi_eq_tau: false,
        }
    }

    pub fn check(&self) -> Result<(), ScheduleError> {
        if self.tau == 0 || self.pi == 0 {
            return Err(ScheduleError::Zero);
        }
        if self.allow_pi_eq_tau {
            if self.pi > self.tau {
                return Err(ScheduleError::PiAboveTau {
                    tau: self.tau,
                    pi: self.pi,
                });
            }
        } else if self.pi >= self.tau {
            return Err(ScheduleError::PiNotBelowTau {
                tau: self.tau,
                pi: self.pi,
            });
        }
        Ok(())
    }
}

/// Labels delivered in one period and when the adapted model takes over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodPlan {
    pub period: usize,
    /// Stream indices of the labeled samples, ascending.
    pub labels: Vec<usize>,
    /// The model that has seen this period's labels predicts from `adaptation_point + 1` on.
    pub adaptation_point: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub schedule: UpdateSchedule,
    pub stream_length: usize,
    pub periods: Vec<PeriodPlan>,
}

impl SchedulePlan {
    pub fn total_labels(&self) -> usize {
        self.periods.iter().map(|p| p.labels.len()).sum()
    }

    /// Writes `period,label_indices,adaptation_point` rows; indices are `|`-joined.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["period", "label_indices", "adaptation_point"])?;
        for p in &self.periods {
            let labels: Vec<String> = p.labels.iter().map(|i| i.to_string()).collect();
            wtr.write_record([p.period.to_string(), labels.join("|"), p.adaptation_point.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// All plausible `(tau, pi)` pairs, tau ascending then pi ascending.
pub fn enumerate_grid() -> Vec<(usize, usize)> {
    enumerate_grid_with(false)
}

pub fn enumerate_grid_with(allow_pi_eq_tau: bool) -> Vec<(usize, usize)> {
    TAU_SET
        .iter()
        .flat_map(|&tau| {
            PI_SET
                .iter()
                .filter(move |&&pi| pi < tau || (allow_pi_eq_tau && pi == tau))
                .map(move |&pi| (tau, pi))
        })
        .collect()
}

/// Lays out label indices and adaptation points over `stream_length` samples.
///
/// A trailing partial period contributes only when its whole label window
/// (regular) or the whole period (opportunistic) fits in the stream.
pub fn plan(s: &UpdateSchedule, stream_length: usize) -> Result<SchedulePlan, ScheduleError> {
    s.check()?;
    if stream_length == 0 {
        return Err(ScheduleError::EmptyStream);
    }
    let mut periods = Vec::new();
    match s.mode {
        UpdateMode::Regular => {
            let mut k = 0;
            while k * s.tau + s.pi <= stream_length {
                let start = k * s.tau;
                periods.push(PeriodPlan {
                    period: k,
                    labels: (start..start + s.pi).collect(),
                    adaptation_point: start + s.pi - 1,
                });
                k += 1;
            }
        }
        UpdateMode::Opportunistic => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let mut k = 0;
            while (k + 1) * s.tau <= stream_length {
                let start = k * s.tau;
                let mut labels: Vec<usize> = sample(&mut rng, s.tau, s.pi).into_iter().map(|i| start + i).collect();
                labels.sort_unstable();
                periods.push(PeriodPlan {
                    period: k,
                    labels,
                    adaptation_point: start + s.tau - 1,
                });
                k += 1;
            }
        }
    }
    Ok(SchedulePlan {
        schedule: *s,
        stream_length,
        periods,
    })
}
