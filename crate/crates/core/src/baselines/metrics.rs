use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {pred} predictions vs {target} targets")]
    LengthMismatch { pred: usize, target: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFew(usize),
    #[error("ZeroVariance: targets are constant")]
    ZeroVariance,
}

fn check(pred: &[f64], target: &[f64]) -> Result<(), MetricsError> {
    if pred.len() != target.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            target: target.len(),
        });
    }
    if pred.len() < 2 {
        return Err(MetricsError::TooFew(pred.len()));
    }
    Ok(())
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64, MetricsError> {
    check(pred, target)?;
    let ss: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(ss / pred.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`; may be negative.
pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64, MetricsError> {
    check(pred, target)?;
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub r2: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Self, MetricsError> {
        Ok(MetricsReport {
            mse: mse(pred, target)?,
            r2: r2(pred, target)?,
            n: pred.len(),
        })
    }
}
