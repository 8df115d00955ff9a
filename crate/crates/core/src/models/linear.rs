use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ModelError, Sample};
use crate::dataset::{FEATURE_NAMES, N_FEATURES};
use crate::preprocess::Standardizer;

/// Multivariate linear calibration: eight slopes and an intercept.
///
/// With a standardizer the slopes are ppb per standardized unit; without one
/// they apply to the inputs as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Slopes for the eight features followed by the intercept.
    pub weights: Vec<f64>,
    pub standardizer: Option<Standardizer>,
}

impl LinearModel {
    pub fn slopes(&self) -> &[f64] {
        &self.weights[..N_FEATURES]
    }

    pub fn intercept(&self) -> f64 {
        self.weights[N_FEATURES]
    }

    pub(crate) fn predict_raw(&self, x: &[f64; N_FEATURES]) -> Result<f64, ModelError> {
        if self.weights.len() != N_FEATURES + 1 {
            return Err(ModelError::NotTrained);
        }
        let z = match &self.standardizer {
            Some(st) => st.transform(x),
            None => x.to_vec(),
        };
        Ok(z.iter().zip(self.slopes()).map(|(a, b)| a * b).sum::<f64>() + self.intercept())
    }
}

/// Ordinary least squares with an intercept column, solved by Householder QR.
pub fn ols_fit(x: &[[f64; N_FEATURES]], y: &[f64]) -> Result<LinearModel, ModelError> {
    let n = x.len();
    let cols = N_FEATURES + 1;
    if n < cols || y.len() != n {
        return Err(ModelError::TooFewSamples {
            needed: cols,
            got: n.min(y.len()),
        });
    }
    let a = DMatrix::from_fn(n, cols, |i, j| if j < N_FEATURES { x[i][j] } else { 1.0 });
    let b = DVector::from_column_slice(y);
    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..cols).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    let tol = diag_max * 1e-10 * n as f64;
    let rank = (0..cols).filter(|&k| r[(k, k)].abs() > tol).count();
    if rank < cols {
        return Err(ModelError::Singular { rank, cols });
    }
    let qtb = qr.q().tr_mul(&b);
    let w = r
        .solve_upper_triangular(&qtb)
        .ok_or(ModelError::Singular { rank, cols })?;
    Ok(LinearModel {
        weights: w.iter().copied().collect(),
        standardizer: None,
    })
}

/// Standardizes the features of `samples` and fits OLS in that space.
pub fn train_linear(samples: &[Sample]) -> Result<LinearModel, ModelError> {
    let xs: Vec<[f64; N_FEATURES]> = samples.iter().map(|s| s.x).collect();
    let st = Standardizer::fit(&xs, &FEATURE_NAMES)?;
    let z: Vec<[f64; N_FEATURES]> = xs
        .iter()
        .map(|x| {
            let v = st.transform(x);
            std::array::from_fn(|k| v[k])
        })
        .collect();
    let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let mut m = ols_fit(&z, &y)?;
    m.standardizer = Some(st);
    Ok(m)
}
