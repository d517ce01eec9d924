//! Ordinary least squares solved through a Householder QR factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{Dataset, Role, Xy};

#[derive(Debug, Error, PartialEq)]
pub enum OlsError {
    #[error("need at least {needed} samples for {features} features, got {got}")]
    TooFewSamples {
        needed: usize,
        features: usize,
        got: usize,
    },
    #[error("RankDeficient: design matrix column {0} is (nearly) dependent")]
    RankDeficient(usize),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, data: &Xy) -> Result<Vec<f64>, OlsError> {
        if data.n_features != self.weights.len() {
            return Err(OlsError::DimensionMismatch {
                expected: self.weights.len(),
                got: data.n_features,
            });
        }
        Ok((0..data.len())
            .map(|i| self.predict_row(data.row(i)))
            .collect())
    }

    /// Feature roles, for models fitted on airfoil data.
    pub fn roles(&self) -> Vec<Role> {
        self.features
            .iter()
            .filter_map(|f| f.parse().ok())
            .collect()
    }
}

// relative to the largest |R_jj|
const RANK_TOL: f64 = 1e-10;

pub fn fit_ols_xy(data: &Xy, features: Vec<String>) -> Result<LinearModel, OlsError> {
    let p = data.n_features;
    if data.len() < p + 1 {
        return Err(OlsError::TooFewSamples {
            needed: p + 1,
            features: p,
            got: data.len(),
        });
    }
    let design = DMatrix::from_fn(data.len(), p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            data.x[i * p + j - 1]
        }
    });
    let y = DVector::from_column_slice(&data.y);
    let qr = design.qr();
    let r = qr.r();
    let max_diag = (0..=p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if let Some(j) = (0..=p).find(|&j| r[(j, j)].abs() <= RANK_TOL * max_diag) {
        return Err(OlsError::RankDeficient(j));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(OlsError::RankDeficient(0))?;
    Ok(LinearModel {
        features,
        weights: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
    })
}

/// Least squares of `cl` on the given (unscaled) feature roles.
pub fn fit_ols(train: &Dataset, roles: &[Role]) -> Result<LinearModel, OlsError> {
    fit_ols_xy(
        &train.to_xy(roles),
        roles.iter().map(|r| r.name().to_string()).collect(),
    )
}
