//! Synthetic co-location datasets with seasonal cycles and sensor drift.
//!
//! Every hour the simulator draws true concentrations (NO₂ in ppb, CO in ppm,
//! O₃ in ppb) and weather, then produces electrode voltages for the three
//! electrochemical cells:
//!
//! ```text
//! WE_g = b_g(t) + s_g(t)·C_g + kT_g·T + kRH_g·RH + Σ_o cross_g,o·C_o [+ q_g·(T − 20)²] + noise
//! AE_g = bA_g(t) + kTA_g·T + noise
//! ```
//!
//! The sensitivity `s_g(t)` decays linearly at its drift rate and the
//! baselines follow a deterministic trend plus a seeded random walk. Hours
//! inside injected gaps are removed from the dataset; the full ground-truth
//! trajectories are returned separately.
//!
//! All randomness comes from one seed, split into independent ChaCha streams
//! (one per component, see [`Stream`]) so that adding a component never
//! changes the draws of another.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv::{self, KvError};
use crate::dataset::{format_timestamp, Dataset, FeatureVector, HourlyRecord, HOUR};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario {0}")]
    Parse(#[from] KvError),
}

/// Diurnal and seasonal shape of the target gas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct No2Profile {
    /// ppb
    pub baseline: f64,
    pub morning_amp: f64,
    pub morning_hour: f64,
    pub evening_amp: f64,
    pub evening_hour: f64,
    /// Width (hours) of the rush-hour peaks.
    pub peak_width: f64,
    /// Relative seasonal modulation amplitude.
    pub seasonal_amp: f64,
    /// Hours after the start at which the seasonal factor peaks.
    pub seasonal_peak_hour: f64,
    pub ar_coeff: f64,
    /// ppb
    pub innovation_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct O3Profile {
    pub baseline: f64,
    pub seasonal_amp: f64,
    pub seasonal_peak_hour: f64,
    pub daytime_amp: f64,
    /// ppb O₃ removed per ppb NO₂ above the NO₂ baseline.
    pub titration: f64,
    pub ar_coeff: f64,
    pub innovation_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoProfile {
    /// ppm
    pub background: f64,
    /// ppm per ppb NO₂
    pub per_no2: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    /// °C
    pub mean: f64,
    pub seasonal_swing: f64,
    pub seasonal_peak_hour: f64,
    pub daily_amp: f64,
    pub daily_peak_hour: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumidityModel {
    /// %
    pub mean: f64,
    /// Moves opposite to the temperature cycles.
    pub seasonal_swing: f64,
    pub daily_amp: f64,
    pub noise_std: f64,
}

/// Response of one electrochemical cell. Voltages in mV; the concentration
/// unit is that of the cell's gas (ppb, or ppm for CO).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorResponse {
    /// mV per concentration unit at t = 0.
    pub sensitivity: f64,
    pub baseline_we: f64,
    pub baseline_ae: f64,
    /// mV/°C
    pub temp_coeff_we: f64,
    pub temp_coeff_ae: f64,
    /// mV/%
    pub rh_coeff: f64,
    /// mV per unit of [NO₂ ppb, CO ppm, O₃ ppb]; the cell's own entry is ignored.
    pub cross: [f64; 3],
    /// mV/°C², only with `quadratic_temperature`.
    pub temp_quad: f64,
    /// Fractional sensitivity loss per year.
    pub sensitivity_drift: f64,
    /// mV per year.
    pub baseline_trend: f64,
    /// mV per √h.
    pub baseline_walk_std: f64,
    pub ae_baseline_walk_std: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensors {
    pub no2: SensorResponse,
    pub co: SensorResponse,
    pub o3: SensorResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapModel {
    pub expected_count: f64,
    /// hours
    pub mean_length: f64,
}

/// Full parameter set of a synthetic deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftScenario {
    pub duration_hours: usize,
    /// Unix seconds of the first hour.
    pub start: i64,
    pub seed: u64,
    pub no2: No2Profile,
    pub o3: O3Profile,
    pub co: CoProfile,
    pub temperature: TemperatureModel,
    pub humidity: HumidityModel,
    pub sensors: Sensors,
    pub gaps: GapModel,
    pub quadratic_temperature: bool,
}

/// 2018-04-01T00:00:00Z
const DEFAULT_START: i64 = 1_522_540_800;

/// The documented default deployment: an April start, winter NO₂ maximum,
/// July temperature peaks near 38 °C and roughly 5 % of hours lost in gaps.
pub fn default_scenario(duration_hours: usize) -> DriftScenario {
    DriftScenario {
        duration_hours,
        start: DEFAULT_START,
        seed: 7,
        no2: No2Profile {
            baseline: 14.0,
            morning_amp: 16.0,
            morning_hour: 8.0,
            evening_amp: 12.0,
            evening_hour: 19.0,
            peak_width: 2.0,
            seasonal_amp: 0.45,
            seasonal_peak_hour: 6900.0,
            ar_coeff: 0.85,
            innovation_std: 4.0,
        },
        o3: O3Profile {
            baseline: 25.0,
            seasonal_amp: 12.0,
            seasonal_peak_hour: 2500.0,
            daytime_amp: 18.0,
            titration: 0.3,
            ar_coeff: 0.8,
            innovation_std: 3.0,
        },
        co: CoProfile {
            background: 0.25,
            per_no2: 0.012,
            noise_std: 0.05,
        },
        temperature: TemperatureModel {
            mean: 21.0,
            seasonal_swing: 9.0,
            seasonal_peak_hour: 2700.0,
            daily_amp: 4.5,
            daily_peak_hour: 15.0,
            noise_std: 1.0,
        },
        humidity: HumidityModel {
            mean: 58.0,
            seasonal_swing: 8.0,
            daily_amp: 12.0,
            noise_std: 4.0,
        },
        sensors: Sensors {
            no2: SensorResponse {
                sensitivity: -0.32,
                baseline_we: 225.0,
                baseline_ae: 240.0,
                temp_coeff_we: 1.0,
                temp_coeff_ae: 0.7,
                rh_coeff: 0.04,
                cross: [0.0, 0.0, -0.08],
                temp_quad: 0.01,
                sensitivity_drift: 0.4,
                baseline_trend: 4.0,
                baseline_walk_std: 0.01,
                ae_baseline_walk_std: 0.005,
                noise_std: 0.4,
            },
            co: SensorResponse {
                sensitivity: 320.0,
                baseline_we: 270.0,
                baseline_ae: 260.0,
                temp_coeff_we: 1.6,
                temp_coeff_ae: 1.2,
                rh_coeff: 0.1,
                cross: [0.05, 0.0, 0.0],
                temp_quad: 0.02,
                sensitivity_drift: 0.1,
                baseline_trend: 2.0,
                baseline_walk_std: 0.02,
                ae_baseline_walk_std: 0.01,
                noise_std: 2.0,
            },
            o3: SensorResponse {
                sensitivity: -0.35,
                baseline_we: 230.0,
                baseline_ae: 235.0,
                temp_coeff_we: 0.6,
                temp_coeff_ae: 0.5,
                rh_coeff: 0.03,
                cross: [-0.3, 0.0, 0.0],
                temp_quad: 0.01,
                sensitivity_drift: 0.2,
                baseline_trend: 2.0,
                baseline_walk_std: 0.01,
                ae_baseline_walk_std: 0.005,
                noise_std: 0.5,
            },
        },
        gaps: GapModel {
            expected_count: 0.00152 * duration_hours as f64,
            mean_length: 33.0,
        },
        quadratic_temperature: false,
    }
}

impl DriftScenario {
    /// Same scenario with every drift rate and random walk set to zero.
    pub fn without_drift(&self) -> Self {
        let mut s = self.clone();
        for r in [&mut s.sensors.no2, &mut s.sensors.co, &mut s.sensors.o3] {
            r.sensitivity_drift = 0.0;
            r.baseline_trend = 0.0;
            r.baseline_walk_std = 0.0;
            r.ae_baseline_walk_std = 0.0;
        }
        s
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |m: String| Err(SimulateError::Invalid(m));
        if self.duration_hours < 1 {
            return bad("duration_hours must be at least 1".into());
        }
        for (name, phi) in [("no2.ar_coeff", self.no2.ar_coeff), ("o3.ar_coeff", self.o3.ar_coeff)] {
            if !(0.0..1.0).contains(&phi) {
                return bad(format!("{name} must lie in [0, 1), got {phi}"));
            }
        }
        let mut stds = vec![
            ("no2.innovation_std", self.no2.innovation_std),
            ("o3.innovation_std", self.o3.innovation_std),
            ("co.noise_std", self.co.noise_std),
            ("temperature.noise_std", self.temperature.noise_std),
            ("humidity.noise_std", self.humidity.noise_std),
            ("gaps.expected_count", self.gaps.expected_count),
        ];
        for (gas, r) in self.sensor_list() {
            stds.push((gas, r.baseline_walk_std));
            stds.push((gas, r.ae_baseline_walk_std));
            stds.push((gas, r.noise_std));
        }
        for (name, v) in stds {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name}: standard deviations and counts must be finite and >= 0, got {v}"));
            }
        }
        if !(self.gaps.mean_length >= 1.0) {
            return bad(format!("gaps.mean_length must be >= 1, got {}", self.gaps.mean_length));
        }
        if !(self.no2.peak_width > 0.0) {
            return bad("no2.peak_width must be positive".into());
        }
        Ok(())
    }

    fn sensor_list(&self) -> [(&'static str, &SensorResponse); 3] {
        [
            ("sensors.no2", &self.sensors.no2),
            ("sensors.co", &self.sensors.co),
            ("sensors.o3", &self.sensors.o3),
        ]
    }

    /// Flat `key = value` text, one parameter per line, nested keys dotted.
    pub fn to_kv(&self) -> String {
        kv::to_kv(self)
    }

    /// Parses the flat text form. Keys not present fall back to
    /// [`default_scenario`] for the given (or default 13140 h) duration.
    pub fn from_kv(text: &str) -> Result<Self, SimulateError> {
        let pairs = kv::parse_pairs(text)?;
        let duration = match pairs.iter().find(|(_, k, _)| k == "duration_hours") {
            Some((line, _, v)) => v.parse::<usize>().map_err(|e| KvError {
                line: *line,
                message: format!("duration_hours: {e}"),
            })?,
            None => 13140,
        };
        let s: DriftScenario = kv::apply_pairs(&pairs, &default_scenario(duration))?;
        s.validate()?;
        Ok(s)
    }
}

/// Ground truth for one simulated hour (present even inside gaps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub timestamp: i64,
    pub in_dataset: bool,
    pub no2: f64,
    pub co: f64,
    pub o3: f64,
    pub temp: f64,
    pub rh: f64,
    /// Sensitivity, WE baseline and AE baseline of the NO₂, CO and O₃ cells.
    pub sensitivity: [f64; 3],
    pub baseline_we: [f64; 3],
    pub baseline_ae: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    pub truth: Vec<TruthRow>,
}

impl Simulation {
    pub fn write_truth_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![
            "timestamp".to_string(),
            "in_dataset".into(),
            "no2_ppb".into(),
            "co_ppm".into(),
            "o3_ppb".into(),
            "temp".into(),
            "rh".into(),
        ];
        for field in ["sensitivity", "baseline_we", "baseline_ae"] {
            for gas in ["no2", "co", "o3"] {
                header.push(format!("{field}_{gas}"));
            }
        }
        wtr.write_record(&header)?;
        for t in &self.truth {
            let mut row = vec![
                format_timestamp(t.timestamp),
                (t.in_dataset as u8).to_string(),
                t.no2.to_string(),
                t.co.to_string(),
                t.o3.to_string(),
                t.temp.to_string(),
                t.rh.to_string(),
            ];
            for arr in [t.sensitivity, t.baseline_we, t.baseline_ae] {
                row.extend(arr.iter().map(|v| v.to_string()));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Independent random streams, one per simulated component.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    No2 = 0,
    O3 = 1,
    Co = 2,
    Temperature = 3,
    Humidity = 4,
    No2Sensor = 5,
    CoSensor = 6,
    O3Sensor = 7,
    Gaps = 8,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std == 0.0 {
        // keep the stream position identical whether or not the term is active
        let _: f64 = rng.sample(rand_distr::StandardNormal);
        0.0
    } else {
        std * rng.sample::<f64, _>(rand_distr::StandardNormal)
    }
}

/// Circular distance between hours of day.
fn hour_bump(hod: f64, centre: f64, width: f64) -> f64 {
    let d = (hod - centre).rem_euclid(24.0);
    let d = d.min(24.0 - d);
    (-0.5 * (d / width).powi(2)).exp()
}

fn seasonal(t: f64, peak: f64) -> f64 {
    (2.0 * PI * (t - peak) / HOURS_PER_YEAR).cos()
}

/// Sensitivity after `t` hours of linear decay at `rate` per year.
pub fn sensitivity_at(s0: f64, rate: f64, t: f64) -> f64 {
    s0 * (1.0 - rate * t / HOURS_PER_YEAR).max(0.0)
}

struct CellState {
    walk_we: f64,
    walk_ae: f64,
    rng: ChaCha8Rng,
}

impl CellState {
    /// Advances the walks and returns (WE, AE, sensitivity, WE baseline, AE baseline).
    fn step(
        &mut self,
        r: &SensorResponse,
        t: f64,
        own: f64,
        conc: [f64; 3],
        own_idx: usize,
        temp: f64,
        rh: f64,
        quadratic: bool,
    ) -> (f64, f64, f64, f64, f64) {
        if t > 0.0 {
            self.walk_we += gauss(&mut self.rng, r.baseline_walk_std);
            self.walk_ae += gauss(&mut self.rng, r.ae_baseline_walk_std);
        } else {
            gauss(&mut self.rng, 0.0);
            gauss(&mut self.rng, 0.0);
        }
        let s = sensitivity_at(r.sensitivity, r.sensitivity_drift, t);
        let b_we = r.baseline_we + r.baseline_trend * t / HOURS_PER_YEAR + self.walk_we;
        let b_ae = r.baseline_ae + self.walk_ae;
        let cross: f64 = (0..3).filter(|&k| k != own_idx).map(|k| r.cross[k] * conc[k]).sum();
        let quad = if quadratic { r.temp_quad * (temp - 20.0).powi(2) } else { 0.0 };
        let we = b_we + s * own + r.temp_coeff_we * temp + r.rh_coeff * rh + cross + quad + gauss(&mut self.rng, r.noise_std);
        let ae = b_ae + r.temp_coeff_ae * temp + gauss(&mut self.rng, r.noise_std);
        (we, ae, s, b_we, b_ae)
    }
}

/// Runs the scenario. Identical scenarios (seed included) give bit-identical output.
pub fn generate(s: &DriftScenario) -> Result<Simulation, SimulateError> {
    s.validate()?;
    let n = s.duration_hours;
    let mut rng_no2 = stream(s.seed, Stream::No2);
    let mut rng_o3 = stream(s.seed, Stream::O3);
    let mut rng_co = stream(s.seed, Stream::Co);
    let mut rng_t = stream(s.seed, Stream::Temperature);
    let mut rng_rh = stream(s.seed, Stream::Humidity);
    let mut cells = [Stream::No2Sensor, Stream::CoSensor, Stream::O3Sensor].map(|k| CellState {
        walk_we: 0.0,
        walk_ae: 0.0,
        rng: stream(s.seed, k),
    });
    let responses = [&s.sensors.no2, &s.sensors.co, &s.sensors.o3];
    let gaps = draw_gaps(s, n);

    let start_hour = s.start.div_euclid(HOUR);
    let (mut ar_no2, mut ar_o3) = (0.0, 0.0);
    let mut truth = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for h in 0..n {
        let t = h as f64;
        let ts = (start_hour + h as i64) * HOUR;
        let hod = ((start_hour + h as i64).rem_euclid(24)) as f64;

        ar_no2 = s.no2.ar_coeff * ar_no2 + gauss(&mut rng_no2, s.no2.innovation_std);
        let diurnal = s.no2.baseline
            + s.no2.morning_amp * hour_bump(hod, s.no2.morning_hour, s.no2.peak_width)
            + s.no2.evening_amp * hour_bump(hod, s.no2.evening_hour, 1.25 * s.no2.peak_width);
        let no2 = (diurnal * (1.0 + s.no2.seasonal_amp * seasonal(t, s.no2.seasonal_peak_hour)) + ar_no2).max(0.0);

        ar_o3 = s.o3.ar_coeff * ar_o3 + gauss(&mut rng_o3, s.o3.innovation_std);
        let daylight = (2.0 * PI * (hod - 14.0) / 24.0).cos().max(0.0);
        let o3 = (s.o3.baseline + s.o3.seasonal_amp * seasonal(t, s.o3.seasonal_peak_hour) + s.o3.daytime_amp * daylight
            - s.o3.titration * (no2 - s.no2.baseline)
            + ar_o3)
            .max(0.0);
        let co = (s.co.background + s.co.per_no2 * no2 + gauss(&mut rng_co, s.co.noise_std)).max(0.0);

        let season_t = seasonal(t, s.temperature.seasonal_peak_hour);
        let daily_t = (2.0 * PI * (hod - s.temperature.daily_peak_hour) / 24.0).cos();
        let temp = s.temperature.mean
            + s.temperature.seasonal_swing * season_t
            + s.temperature.daily_amp * daily_t
            + gauss(&mut rng_t, s.temperature.noise_std);
        let rh = (s.humidity.mean - s.humidity.seasonal_swing * season_t - s.humidity.daily_amp * daily_t
            + gauss(&mut rng_rh, s.humidity.noise_std))
            .clamp(0.0, 100.0);

        let conc = [no2, co, o3];
        let mut we = [0.0; 3];
        let mut ae = [0.0; 3];
        let mut row = TruthRow {
            timestamp: ts,
            in_dataset: !gaps[h],
            no2,
            co,
            o3,
            temp,
            rh,
            sensitivity: [0.0; 3],
            baseline_we: [0.0; 3],
            baseline_ae: [0.0; 3],
        };
        for g in 0..3 {
            let (w, a, sens, bw, ba) =
                cells[g].step(responses[g], t, conc[g], conc, g, temp, rh, s.quadratic_temperature);
            we[g] = w;
            ae[g] = a;
            row.sensitivity[g] = sens;
            row.baseline_we[g] = bw;
            row.baseline_ae[g] = ba;
        }
        truth.push(row);
        if !gaps[h] {
            let f = FeatureVector::from_array([we[0], ae[0], we[1], ae[1], we[2], ae[2], temp, rh]);
            let mut rec = HourlyRecord::new(ts, f);
            rec.ref_no2 = Some(no2);
            rec.ref_co = Some(co);
            records.push(rec);
        }
    }
    let mut dataset = Dataset::new(records, "simulated");
    dataset.meta.params.push(("seed".into(), s.seed.to_string()));
    dataset.meta.params.push(("duration_hours".into(), n.to_string()));
    dataset.mark_gap_adjacent();
    Ok(Simulation { dataset, truth })
}

fn draw_gaps(s: &DriftScenario, n: usize) -> Vec<bool> {
    let mut rng = stream(s.seed, Stream::Gaps);
    let mut gap = vec![false; n];
    if s.gaps.expected_count <= 0.0 {
        return gap;
    }
    let count = Poisson::new(s.gaps.expected_count).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
    let extra = Exp::new(1.0 / (s.gaps.mean_length - 1.0).max(1e-9)).expect("positive rate");
    for _ in 0..count {
        let start = rng.gen_range(0..n);
        let len = 1 + extra.sample(&mut rng).round() as usize;
        for g in gap.iter_mut().skip(start).take(len) {
            *g = true;
        }
    }
    gap
}

/// Pearson correlation, `None` when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Monthly (730 h) Pearson correlation between `AE − WE` of the NO₂ cell and reference NO₂.
pub fn monthly_correlation(d: &Dataset, start: i64) -> Vec<Option<f64>> {
    let month = 730 * HOUR;
    let mut buckets: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &d.records {
        if let Some(y) = r.ref_no2 {
            let m = (r.timestamp - start).div_euclid(month);
            let e = buckets.entry(m).or_default();
            e.0.push(r.features.ae_no2 - r.features.we_no2);
            e.1.push(y);
        }
    }
    let last = buckets.keys().last().copied().unwrap_or(-1);
    (0..=last)
        .map(|m| buckets.get(&m).and_then(|(x, y)| pearson(x, y)))
        .collect()
}
