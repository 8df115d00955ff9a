//! Shallow feed-forward network (8 inputs, tanh hidden layer, linear output)
//! trained by Levenberg-Marquardt on the Bayesian-regularized objective
//!
//! ```text
//! F(w) = beta * E_D + alpha * E_W,   E_D = sum of squared errors,  E_W = sum of squared weights
//! ```
//!
//! with `alpha` and `beta` re-estimated after every accepted step from the
//! effective number of parameters `gamma = N - alpha * tr((beta JᵀJ + alpha I)⁻¹)`:
//! `alpha = gamma / 2E_W`, `beta = (n - gamma) / 2E_D`. A held-out split is
//! monitored as an outer early-stopping criterion and the best snapshot is kept.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{holdout_indices, ModelError, Sample};
use crate::dataset::{FEATURE_NAMES, N_FEATURES};
use crate::preprocess::Standardizer;

/// Network weights in standardized input/output space.
///
/// Parameter layout: input weights (`hidden × 8`, unit-major), hidden biases,
/// output weights, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnNet {
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// tanh via one `exp`; absolute error near 1e-16.
fn activation(a: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * a).exp() + 1.0)
}

impl SnnNet {
    pub fn n_params(hidden: usize) -> usize {
        hidden * (N_FEATURES + 2) + 1
    }

    pub fn zeros(hidden: usize) -> Self {
        SnnNet {
            hidden,
            params: vec![0.0; Self::n_params(hidden)],
        }
    }

    /// Seeded uniform initialization scaled for standardized inputs.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(hidden);
        let in_scale = 1.0 / (N_FEATURES as f64).sqrt();
        let out_scale = 0.5 / (hidden as f64).sqrt();
        let h = hidden;
        for k in 0..h * N_FEATURES {
            net.params[k] = rng.gen_range(-1.0..1.0) * in_scale;
        }
        for j in 0..h {
            net.params[h * N_FEATURES + j] = rng.gen_range(-1.0..1.0);
            net.params[h * (N_FEATURES + 1) + j] = rng.gen_range(-1.0..1.0) * out_scale;
        }
        net
    }

    fn b1(&self) -> usize {
        self.hidden * N_FEATURES
    }

    fn w2(&self) -> usize {
        self.hidden * (N_FEATURES + 1)
    }

    fn b2(&self) -> usize {
        self.hidden * (N_FEATURES + 2)
    }

    pub fn forward(&self, z: &[f64; N_FEATURES]) -> f64 {
        let p = &self.params;
        let mut out = p[self.b2()];
        for j in 0..self.hidden {
            out += p[self.w2() + j] * activation(self.pre_activation(j, z));
        }
        out
    }

    fn pre_activation(&self, j: usize, z: &[f64; N_FEATURES]) -> f64 {
        let row = &self.params[j * N_FEATURES..(j + 1) * N_FEATURES];
        row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.params[self.b1() + j]
    }

    /// Like [`SnnNet::forward`], also storing the hidden activations in `h`.
    fn forward_hidden(&self, z: &[f64; N_FEATURES], h: &mut [f64]) -> f64 {
        let p = &self.params;
        let mut out = p[self.b2()];
        for j in 0..self.hidden {
            h[j] = activation(self.pre_activation(j, z));
            out += p[self.w2() + j] * h[j];
        }
        out
    }

    /// Output and its derivative with respect to every parameter.
    pub fn forward_jacobian(&self, z: &[f64; N_FEATURES], jac: &mut [f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.forward_hidden(z, &mut h);
        self.jacobian_from_hidden(z, &h, jac)
    }

    fn jacobian_from_hidden(&self, z: &[f64; N_FEATURES], h: &[f64], jac: &mut [f64]) -> f64 {
        let p = &self.params;
        let mut out = p[self.b2()];
        for j in 0..self.hidden {
            let w2 = p[self.w2() + j];
            out += w2 * h[j];
            let d = w2 * (1.0 - h[j] * h[j]);
            for i in 0..N_FEATURES {
                jac[j * N_FEATURES + i] = d * z[i];
            }
            jac[self.b1() + j] = d;
            jac[self.w2() + j] = h[j];
        }
        jac[self.b2()] = 1.0;
        out
    }

    pub fn sum_squared_weights(&self) -> f64 {
        self.params.iter().map(|w| w * w).sum()
    }

    pub fn sum_squared_errors(&self, z: &[[f64; N_FEATURES]], t: &[f64]) -> f64 {
        z.iter().zip(t).map(|(x, y)| (self.forward(x) - y).powi(2)).sum()
    }

    /// `beta * E_D + alpha * E_W`.
    pub fn objective(&self, z: &[[f64; N_FEATURES]], t: &[f64], alpha: f64, beta: f64) -> f64 {
        beta * self.sum_squared_errors(z, t) + alpha * self.sum_squared_weights()
    }

    /// Backpropagated gradient of [`SnnNet::objective`].
    pub fn gradient(&self, z: &[[f64; N_FEATURES]], t: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
        let np = self.params.len();
        let mut g: Vec<f64> = self.params.iter().map(|w| 2.0 * alpha * w).collect();
        let mut jac = vec![0.0; np];
        for (x, y) in z.iter().zip(t) {
            let e = self.forward_jacobian(x, &mut jac) - y;
            for k in 0..np {
                g[k] += 2.0 * beta * e * jac[k];
            }
        }
        g
    }
}

/// Trained network with its standardizer (eight features plus the label) and
/// the final regularization precisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnModel {
    pub net: SnnNet,
    pub alpha: f64,
    pub beta: f64,
    pub standardizer: Standardizer,
    pub seed: u64,
}

impl SnnModel {
    pub fn hidden(&self) -> usize {
        self.net.hidden
    }

    fn standardize(&self, x: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|k| self.standardizer.transform_dim(k, x[k]))
    }

    pub(crate) fn predict_raw(&self, x: &[f64; N_FEATURES]) -> Result<f64, ModelError> {
        if self.standardizer.dims() != N_FEATURES + 1 || self.net.params.len() != SnnNet::n_params(self.net.hidden) {
            return Err(ModelError::NotTrained);
        }
        let out = self.net.forward(&self.standardize(x));
        Ok(self.standardizer.inverse_dim(N_FEATURES, out))
    }
}

/// Fixed precisions for runs without evidence re-estimation. The data
/// precision is divided by the training-set size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedRegularization {
    pub alpha: f64,
    pub beta_per_sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnConfig {
    pub max_epochs: usize,
    /// Consecutive non-improving validation epochs tolerated.
    pub patience: usize,
    pub val_fraction: f64,
    pub min_samples: usize,
    pub mu_init: f64,
    pub mu_dec: f64,
    pub mu_inc: f64,
    pub mu_max: f64,
    /// Disables evidence re-estimation when set.
    pub fixed_regularization: Option<FixedRegularization>,
}

impl Default for SnnConfig {
    fn default() -> Self {
        SnnConfig {
            max_epochs: 500,
            patience: 10,
            val_fraction: 0.25,
            min_samples: 40,
            mu_init: 0.005,
            mu_dec: 0.1,
            mu_inc: 10.0,
            mu_max: 1e10,
            fixed_regularization: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
    /// No step reduced the objective before the damping limit.
    DampingLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub stop: StopReason,
    /// Held-out MSE (ppb²) after each epoch, starting with the initialization.
    pub val_history: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_mse: Option<f64>,
    /// Training MSE (ppb²) of the returned parameters.
    pub final_train_mse: f64,
    pub train_size: usize,
}

/// Gradient of the regularized objective at `model`'s current precisions,
/// for a batch given in raw units.
pub fn snn_gradient(model: &SnnModel, batch: &[Sample]) -> Vec<f64> {
    let z: Vec<[f64; N_FEATURES]> = batch.iter().map(|s| model.standardize(&s.x)).collect();
    let t: Vec<f64> = batch
        .iter()
        .map(|s| model.standardizer.transform_dim(N_FEATURES, s.y))
        .collect();
    model.net.gradient(&z, &t, model.alpha, model.beta)
}

pub fn snn_train(samples: &[Sample], hidden: usize, seed: u64, cfg: &SnnConfig) -> Result<SnnModel, ModelError> {
    snn_train_report(samples, hidden, seed, cfg).map(|(m, _)| m)
}

pub fn snn_train_report(
    samples: &[Sample],
    hidden: usize,
    seed: u64,
    cfg: &SnnConfig,
) -> Result<(SnnModel, TrainReport), ModelError> {
    check_inputs(samples, hidden, cfg)?;
    let standardizer = joint_standardizer(samples)?;
    train_impl(samples, hidden, seed, cfg, standardizer, None)
}

/// Trains with a caller-supplied standardizer and optional starting weights.
pub fn snn_train_with(
    samples: &[Sample],
    hidden: usize,
    seed: u64,
    cfg: &SnnConfig,
    standardizer: Standardizer,
    init: Option<&SnnNet>,
) -> Result<(SnnModel, TrainReport), ModelError> {
    check_inputs(samples, hidden, cfg)?;
    if standardizer.dims() != N_FEATURES + 1 {
        return Err(ModelError::BadHyperparameter("standardizer must cover features and label".into()));
    }
    if let Some(net) = init {
        if net.hidden != hidden || net.params.len() != SnnNet::n_params(hidden) {
            return Err(ModelError::BadHyperparameter("warm-start network has the wrong shape".into()));
        }
    }
    train_impl(samples, hidden, seed, cfg, standardizer, init.cloned())
}

fn check_inputs(samples: &[Sample], hidden: usize, cfg: &SnnConfig) -> Result<(), ModelError> {
    if hidden == 0 {
        return Err(ModelError::BadHyperparameter("hidden size must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(ModelError::BadHyperparameter(format!("val_fraction {}", cfg.val_fraction)));
    }
    if samples.len() < cfg.min_samples.max(2) {
        return Err(ModelError::TooFewSamples {
            needed: cfg.min_samples.max(2),
            got: samples.len(),
        });
    }
    Ok(())
}

pub(crate) fn joint_standardizer(samples: &[Sample]) -> Result<Standardizer, ModelError> {
    let rows: Vec<[f64; N_FEATURES + 1]> = samples
        .iter()
        .map(|s| std::array::from_fn(|k| if k < N_FEATURES { s.x[k] } else { s.y }))
        .collect();
    let mut names = FEATURE_NAMES.to_vec();
    names.push("ref_no2");
    Ok(Standardizer::fit(&rows, &names)?)
}

struct Batch {
    z: Vec<[f64; N_FEATURES]>,
    t: Vec<f64>,
}

fn train_impl(
    samples: &[Sample],
    hidden: usize,
    seed: u64,
    cfg: &SnnConfig,
    standardizer: Standardizer,
    init: Option<SnnNet>,
) -> Result<(SnnModel, TrainReport), ModelError> {
    let to_z = |s: &Sample| -> [f64; N_FEATURES] { std::array::from_fn(|k| standardizer.transform_dim(k, s.x[k])) };
    let val_idx = if cfg.val_fraction > 0.0 {
        holdout_indices(samples.len(), cfg.val_fraction, seed)
    } else {
        Vec::new()
    };
    let mut is_val = vec![false; samples.len()];
    for &i in &val_idx {
        is_val[i] = true;
    }
    let mut train = Batch { z: Vec::new(), t: Vec::new() };
    let mut val = Batch { z: Vec::new(), t: Vec::new() };
    for (s, v) in samples.iter().zip(&is_val) {
        let b = if *v { &mut val } else { &mut train };
        b.z.push(to_z(s));
        b.t.push(standardizer.transform_dim(N_FEATURES, s.y));
    }
    let n = train.z.len();
    let y_var = standardizer.std[N_FEATURES].powi(2);
    let np = SnnNet::n_params(hidden);

    let (mut alpha, mut beta) = match cfg.fixed_regularization {
        Some(f) => (f.alpha, f.beta_per_sample / n as f64),
        None => (0.0, 1.0),
    };
    let mut net = init.unwrap_or_else(|| SnnNet::init(hidden, seed));
    let val_mse = |net: &SnnNet| -> Option<f64> {
        (!val.z.is_empty()).then(|| net.sum_squared_errors(&val.z, &val.t) / val.z.len() as f64 * y_var)
    };

    let mut best = (net.clone(), alpha, beta, val_mse(&net), 0usize);
    let mut history: Vec<f64> = best.3.into_iter().collect();
    let mut since_best = 0;
    let mut mu = cfg.mu_init;
    let mut stop = StopReason::MaxEpochs;
    let mut epochs = 0;
    // one column per training sample
    let mut jt = DMatrix::<f64>::zeros(np, n);
    let mut resid = DVector::<f64>::zeros(n);

    // hidden activations of `net` on the training batch, refreshed by each accepted step
    let mut acts = vec![0.0; n * hidden];
    for (z, h) in train.z.iter().zip(acts.chunks_exact_mut(hidden)) {
        net.forward_hidden(z, h);
    }
    let mut trial_acts = vec![0.0; n * hidden];

    for epoch in 1..=cfg.max_epochs {
        for (i, (col, h)) in jt.as_mut_slice().chunks_exact_mut(np).zip(acts.chunks_exact(hidden)).enumerate() {
            resid[i] = net.jacobian_from_hidden(&train.z[i], h, col) - train.t[i];
        }
        let jtj = &jt * jt.transpose();
        let jte = &jt * &resid;
        let ed = resid.norm_squared();
        let ew = net.sum_squared_weights();
        let f = beta * ed + alpha * ew;
        if !f.is_finite() {
            return Err(ModelError::Diverged(epoch));
        }
        let w = DVector::from_column_slice(&net.params);
        let grad = &jte * beta + &w * alpha;

        let mut accepted = None;
        while mu <= cfg.mu_max {
            let mut a = &jtj * beta;
            for k in 0..np {
                a[(k, k)] += alpha + mu;
            }
            if let Some(chol) = a.cholesky() {
                let step = chol.solve(&(-&grad));
                let cand = SnnNet {
                    hidden,
                    params: (&w + step).iter().copied().collect(),
                };
                let ed_new: f64 = train
                    .z
                    .iter()
                    .zip(&train.t)
                    .zip(trial_acts.chunks_exact_mut(hidden))
                    .map(|((z, y), h)| (cand.forward_hidden(z, h) - y).powi(2))
                    .sum();
                let ew_new = cand.sum_squared_weights();
                let f_new = beta * ed_new + alpha * ew_new;
                if f_new.is_finite() && f_new < f {
                    mu = (mu * cfg.mu_dec).max(1e-20);
                    accepted = Some((cand, ed_new, ew_new));
                    break;
                }
            }
            mu *= cfg.mu_inc;
        }
        let Some((cand, ed_new, ew_new)) = accepted else {
            stop = StopReason::DampingLimit;
            break;
        };
        net = cand;
        std::mem::swap(&mut acts, &mut trial_acts);
        epochs = epoch;

        if cfg.fixed_regularization.is_none() {
            let gamma = if alpha > 0.0 {
                let mut h = &jtj * beta;
                for k in 0..np {
                    h[(k, k)] += alpha;
                }
                match h.cholesky() {
                    Some(c) => np as f64 - alpha * c.inverse().trace(),
                    None => np as f64,
                }
            } else {
                np as f64
            };
            let gamma = gamma.clamp(0.0, np as f64);
            if ew_new > 0.0 {
                alpha = gamma / (2.0 * ew_new);
            }
            if ed_new > 0.0 {
                beta = (n as f64 - gamma).max(1.0) / (2.0 * ed_new);
            }
        }

        if let Some(v) = val_mse(&net) {
            if !v.is_finite() {
                return Err(ModelError::Diverged(epoch));
            }
            history.push(v);
            if v < best.3.unwrap_or(f64::INFINITY) {
                best = (net.clone(), alpha, beta, Some(v), epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stop = StopReason::EarlyStopping;
                    break;
                }
            }
        }
    }

    let (net, alpha, beta, best_val, best_epoch) = if val.z.is_empty() {
        (net, alpha, beta, None, epochs)
    } else {
        best
    };
    let final_train_mse = net.sum_squared_errors(&train.z, &train.t) / n as f64 * y_var;
    let report = TrainReport {
        epochs,
        stop,
        val_history: history,
        best_epoch,
        best_val_mse: best_val,
        final_train_mse,
        train_size: n,
    };
    Ok((
        SnnModel {
            net,
            alpha,
            beta,
            standardizer,
            seed,
        },
        report,
    ))
}
