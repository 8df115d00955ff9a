//! Radial-basis extreme learning machine.
//!
//! The hidden layer (centers and one shared width) is drawn once and frozen;
//! only the linear output layer is learned. The initial fit is ridge
//! regression, and later label tuples are folded in by recursive least
//! squares, which costs `O((hidden + 1)²)` per tuple regardless of history.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Sample};
use crate::dataset::{FEATURE_NAMES, N_FEATURES};
use crate::preprocess::Standardizer;

/// Condition numbers above this are rejected at fit time.
const MAX_CONDITION: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    /// Ridge penalty on the output weights (bias included).
    pub ridge: f64,
    /// RLS forgetting factor in (0, 1].
    pub forgetting: f64,
}

impl Default for ElmConfig {
    fn default() -> Self {
        ElmConfig {
            ridge: 1e-3,
            forgetting: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// Centers in standardized feature space.
    pub centers: Vec<[f64; N_FEATURES]>,
    pub width: f64,
    /// One weight per hidden unit, then the output bias.
    pub weights: Vec<f64>,
    /// RLS inverse-correlation matrix, row-major `(hidden + 1)²`.
    pub covariance: Vec<f64>,
    pub ridge: f64,
    pub forgetting: f64,
    pub standardizer: Standardizer,
    pub seed: u64,
}

impl ElmModel {
    pub fn hidden(&self) -> usize {
        self.centers.len()
    }

    /// Hidden activations followed by a constant 1 for the bias.
    pub fn features(&self, x: &[f64; N_FEATURES]) -> Vec<f64> {
        let z: [f64; N_FEATURES] = std::array::from_fn(|k| self.standardizer.transform_dim(k, x[k]));
        let mut h = hidden_activations(&self.centers, self.width, &z);
        h.push(1.0);
        h
    }

    pub(crate) fn predict_raw(&self, x: &[f64; N_FEATURES]) -> Result<f64, ModelError> {
        let m = self.hidden() + 1;
        if self.centers.is_empty() || self.weights.len() != m || self.covariance.len() != m * m {
            return Err(ModelError::NotTrained);
        }
        Ok(self.features(x).iter().zip(&self.weights).map(|(h, w)| h * w).sum())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let m = self.hidden() + 1;
        DMatrix::from_row_slice(m, m, &self.covariance)
    }
}

/// Gaussian units, value 1 at their center.
fn hidden_activations(centers: &[[f64; N_FEATURES]], width: f64, z: &[f64; N_FEATURES]) -> Vec<f64> {
    let denom = 2.0 * width * width;
    centers
        .iter()
        .map(|c| {
            let d2: f64 = c.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / denom).exp()
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Draws the hidden layer and solves `(HᵀH + ridge·I) w = Hᵀy`.
pub fn elm_fit(samples: &[Sample], hidden: usize, seed: u64, cfg: &ElmConfig) -> Result<ElmModel, ModelError> {
    if hidden < 2 {
        return Err(ModelError::BadHyperparameter("ELM needs at least 2 hidden units".into()));
    }
    if !(cfg.ridge >= 0.0) || !(cfg.forgetting > 0.0 && cfg.forgetting <= 1.0) {
        return Err(ModelError::BadHyperparameter(format!(
            "ridge {} / forgetting {}",
            cfg.ridge, cfg.forgetting
        )));
    }
    if samples.len() < hidden + 1 {
        return Err(ModelError::TooFewSamples {
            needed: hidden + 1,
            got: samples.len(),
        });
    }
    let xs: Vec<[f64; N_FEATURES]> = samples.iter().map(|s| s.x).collect();
    let standardizer = Standardizer::fit(&xs, &FEATURE_NAMES)?;
    let z: Vec<[f64; N_FEATURES]> = xs
        .iter()
        .map(|x| std::array::from_fn(|k| standardizer.transform_dim(k, x[k])))
        .collect();

    let mut lo = [f64::INFINITY; N_FEATURES];
    let mut hi = [f64::NEG_INFINITY; N_FEATURES];
    for p in &z {
        for k in 0..N_FEATURES {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<[f64; N_FEATURES]> = (0..hidden)
        .map(|_| std::array::from_fn(|k| lo[k] + rng.gen::<f64>() * (hi[k] - lo[k])))
        .collect();
    let mut dists = Vec::with_capacity(hidden * (hidden - 1) / 2);
    for a in 0..hidden {
        for b in a + 1..hidden {
            let d2: f64 = centers[a].iter().zip(&centers[b]).map(|(u, v)| (u - v) * (u - v)).sum();
            dists.push(d2.sqrt());
        }
    }
    let width = median(dists);
    if !(width > 0.0) {
        return Err(ModelError::BadHyperparameter("degenerate RBF width".into()));
    }

    solve_output(centers, width, standardizer, samples, cfg, seed)
}

/// Re-solves the output layer of `model` on `samples` by batch ridge,
/// keeping its hidden layer and standardizer.
pub fn elm_refit(model: &ElmModel, samples: &[Sample]) -> Result<ElmModel, ModelError> {
    if samples.len() < model.hidden() + 1 {
        return Err(ModelError::TooFewSamples {
            needed: model.hidden() + 1,
            got: samples.len(),
        });
    }
    let cfg = ElmConfig {
        ridge: model.ridge,
        forgetting: model.forgetting,
    };
    solve_output(
        model.centers.clone(),
        model.width,
        model.standardizer.clone(),
        samples,
        &cfg,
        model.seed,
    )
}

fn solve_output(
    centers: Vec<[f64; N_FEATURES]>,
    width: f64,
    standardizer: Standardizer,
    samples: &[Sample],
    cfg: &ElmConfig,
    seed: u64,
) -> Result<ElmModel, ModelError> {
    let hidden = centers.len();
    let m = hidden + 1;
    let n = samples.len();
    let mut h = DMatrix::<f64>::zeros(n, m);
    for (i, s) in samples.iter().enumerate() {
        let p: [f64; N_FEATURES] = std::array::from_fn(|k| standardizer.transform_dim(k, s.x[k]));
        for (j, v) in hidden_activations(&centers, width, &p).into_iter().enumerate() {
            h[(i, j)] = v;
        }
        h[(i, hidden)] = 1.0;
    }
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.y));
    let mut a = h.tr_mul(&h);
    for k in 0..m {
        a[(k, k)] += cfg.ridge;
    }
    let eig = a.clone().symmetric_eigenvalues();
    let (emin, emax) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let cond = if emin > 0.0 { emax / emin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(ModelError::IllConditioned(cond));
    }
    let chol = a.cholesky().ok_or(ModelError::IllConditioned(cond))?;
    let weights = chol.solve(&h.tr_mul(&y));
    let cov = chol.inverse();
    Ok(ElmModel {
        centers,
        width,
        weights: weights.iter().copied().collect(),
        covariance: row_major(&symmetrize(cov)),
        ridge: cfg.ridge,
        forgetting: cfg.forgetting,
        standardizer,
        seed,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Recursive least squares over `tuples` in the given order, with the model's
/// forgetting factor. The hidden layer and standardizer are left untouched.
pub fn elm_update(model: &ElmModel, tuples: &[Sample]) -> Result<ElmModel, ModelError> {
    if tuples.is_empty() {
        return Ok(model.clone());
    }
    let m = model.hidden() + 1;
    if model.weights.len() != m || model.covariance.len() != m * m {
        return Err(ModelError::NotTrained);
    }
    let lambda = model.forgetting;
    let mut p = model.covariance_matrix();
    let mut w = DVector::from_column_slice(&model.weights);
    let mut ph = DVector::<f64>::zeros(m);
    for s in tuples {
        let h = DVector::from_vec(model.features(&s.x));
        p.mul_to(&h, &mut ph);
        let denom = lambda + h.dot(&ph);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(ModelError::CovarianceNotPositive);
        }
        let gain = &ph / denom;
        let err = s.y - h.dot(&w);
        w.axpy(err, &gain, 1.0);
        // P <- (P - k (Ph)ᵀ) / lambda
        p.ger(-1.0, &gain, &ph, 1.0);
        if lambda != 1.0 {
            p /= lambda;
        }
    }
    let p = symmetrize(p);
    if (0..m).any(|k| !(p[(k, k)] > 0.0)) || !w.iter().all(|v| v.is_finite()) {
        return Err(ModelError::CovarianceNotPositive);
    }
    Ok(ElmModel {
        weights: w.iter().copied().collect(),
        covariance: row_major(&p),
        ..model.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn samples(n: usize, seed: u64, level: f64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        (0..n)
            .map(|_| {
                let x: [f64; N_FEATURES] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let y = level + 3.0 * x[0] - 2.0 * x[1] * x[2] + noise.sample(&mut rng);
                Sample::new(x, y)
            })
            .collect()
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn huge_ridge_shrinks_weights() {
        let cfg = ElmConfig { ridge: 1e12, ..ElmConfig::default() };
        let m = elm_fit(&samples(200, 1, 20.0), 15, 3, &cfg).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn fit_is_deterministic() {
        let data = samples(100, 2, 0.0);
        let cfg = ElmConfig::default();
        assert_eq!(elm_fit(&data, 15, 7, &cfg).unwrap(), elm_fit(&data, 15, 7, &cfg).unwrap());
    }

    #[test]
    fn unit_at_its_center() {
        let mut m = elm_fit(&samples(100, 3, 0.0), 15, 7, &ElmConfig::default()).unwrap();
        let c = m.centers[4];
        let x: [f64; N_FEATURES] = std::array::from_fn(|k| m.standardizer.inverse_dim(k, c[k]));
        m.weights = vec![0.0; 16];
        m.weights[4] = 2.5;
        m.weights[15] = 0.75;
        assert!((m.predict_raw(&x).unwrap() - 3.25).abs() < 1e-12);
    }

    #[test]
    fn recursive_update_equals_batch_fit() {
        let cfg = ElmConfig::default();
        let all = samples(400, 4, 10.0);
        let batch = elm_fit(&all, 15, 9, &cfg).unwrap();
        // same hidden layer and standardizer, ridge solution on the first half only
        let first = &all[..200];
        let h_first = ridge_with_layer(&batch, first);
        let updated = elm_update(&h_first, &all[200..]).unwrap();
        assert!(rel_close(&updated.weights, &batch.weights, 1e-6));
    }

    #[test]
    fn refit_keeps_the_layer_and_matches_the_ridge_oracle() {
        let all = samples(300, 5, 3.0);
        let m = elm_fit(&all[..150], 15, 4, &ElmConfig::default()).unwrap();
        let refit = elm_refit(&m, &all).unwrap();
        assert_eq!((&refit.centers, refit.width, &refit.standardizer), (&m.centers, m.width, &m.standardizer));
        assert!(rel_close(&refit.weights, &ridge_with_layer(&m, &all).weights, 1e-8));
        let same = elm_refit(&m, &all[..150]).unwrap();
        assert!(rel_close(&same.weights, &m.weights, 1e-12));
    }

    /// Refits only the output layer of `layer` on `data`.
    fn ridge_with_layer(layer: &ElmModel, data: &[Sample]) -> ElmModel {
        let m = layer.hidden() + 1;
        let mut a = DMatrix::<f64>::identity(m, m) * layer.ridge;
        let mut b = DVector::<f64>::zeros(m);
        for s in data {
            let h = DVector::from_vec(layer.features(&s.x));
            a += &h * h.transpose();
            b += &h * s.y;
        }
        let inv = a.try_inverse().unwrap();
        ElmModel {
            weights: (&inv * b).iter().copied().collect(),
            covariance: row_major(&inv),
            ..layer.clone()
        }
    }

    #[test]
    fn empty_update_is_identity() {
        let m = elm_fit(&samples(50, 5, 0.0), 15, 1, &ElmConfig::default()).unwrap();
        assert_eq!(elm_update(&m, &[]).unwrap(), m);
    }

    #[test]
    fn batching_commutes_without_forgetting() {
        let data = samples(100, 6, 0.0);
        let m = elm_fit(&data[..60], 15, 2, &ElmConfig::default()).unwrap();
        let stream = &data[60..];
        let once = elm_update(&m, stream).unwrap();
        let twice = elm_update(&elm_update(&m, &stream[..17]).unwrap(), &stream[17..]).unwrap();
        for (a, b) in once.weights.iter().zip(&twice.weights) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(once.centers, m.centers);
        assert_eq!(once.standardizer, m.standardizer);
    }

    #[test]
    fn forgetting_tracks_a_level_shift_faster() {
        let before = samples(200, 7, 0.0);
        let after = samples(300, 8, 15.0);
        let mae_tail = |forgetting: f64| {
            let cfg = ElmConfig { forgetting, ..ElmConfig::default() };
            let mut m = elm_fit(&before, 15, 3, &cfg).unwrap();
            let mut errs = Vec::new();
            for s in &after {
                errs.push((m.predict_raw(&s.x).unwrap() - s.y).abs());
                m = elm_update(&m, std::slice::from_ref(s)).unwrap();
            }
            errs[errs.len() - 50..].iter().sum::<f64>() / 50.0
        };
        let fast = mae_tail(0.95);
        let slow = mae_tail(1.0);
        assert!(fast < slow, "lambda 0.95: {fast}, lambda 1: {slow}");
        assert!(fast < 2.0);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            elm_fit(&samples(10, 9, 0.0), 15, 1, &ElmConfig::default()).unwrap_err(),
            ModelError::TooFewSamples { needed: 16, got: 10 }
        );
    }
}
