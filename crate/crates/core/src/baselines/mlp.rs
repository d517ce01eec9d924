//! Fully connected regression network with leaky-rectifier hidden layers,
//! a linear output and Huber loss, trained with minibatch Adam.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::metrics::{self, MetricsReport};
use crate::dataio::Xy;
use crate::kan::tree_reduce;
use crate::optim::Adam;
use crate::rng;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid layer dims {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("DimensionMismatch: expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("DivergenceDetected in epoch {epoch}: loss is not finite")]
    DivergenceDetected { epoch: usize },
    #[error("metrics: {0}")]
    Metrics(#[from] metrics::MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub dims: Vec<usize>,
    pub learning_rate: f64,
    pub huber_delta: f64,
    pub negative_slope: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation R² improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            dims: vec![9, 9, 6, 3, 2, 1],
            learning_rate: 0.001,
            huber_delta: 0.1,
            negative_slope: 0.01,
            batch_size: 256,
            epochs: 500,
            patience: 20,
            seed: 2024,
        }
    }
}

pub fn huber(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

pub fn huber_derivative(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dims: Vec<usize>,
    /// `weights[l]` is `dims[l+1] x dims[l]`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub negative_slope: f64,
}

impl MlpModel {
    /// Uniform `±1/sqrt(fan_in)` initialization of weights and biases.
    pub fn init(dims: &[usize], negative_slope: f64, seed: u64) -> Result<Self, MlpError> {
        if dims.len() < 2 || dims.contains(&0) || *dims.last().unwrap() != 1 {
            return Err(MlpError::InvalidDims(dims.to_vec()));
        }
        let mut rng = rng::seeded(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            weights.push(
                (0..w[0] * w[1])
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            biases.push((0..w[1]).map(|_| rng.gen_range(-bound..bound)).collect());
        }
        Ok(MlpModel {
            dims: dims.to_vec(),
            weights,
            biases,
            negative_slope,
        })
    }

    fn leaky(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.negative_slope * z
        }
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.weights[l];
            let last = l + 1 == self.n_layers();
            a = (0..n_out)
                .map(|o| {
                    let z = self.biases[l][o]
                        + w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(&a)
                            .map(|(w, v)| w * v)
                            .sum::<f64>();
                    if last {
                        z
                    } else {
                        self.leaky(z)
                    }
                })
                .collect();
        }
        a[0]
    }

    pub fn predict(&self, data: &Xy) -> Result<Vec<f64>, MlpError> {
        if data.n_features != self.dims[0] {
            return Err(MlpError::DimensionMismatch {
                expected: self.dims[0],
                got: data.n_features,
            });
        }
        Ok((0..data.len())
            .into_par_iter()
            .map(|i| self.eval(data.row(i)))
            .collect())
    }

    pub fn evaluate(&self, data: &Xy) -> Result<MetricsReport, MlpError> {
        Ok(MetricsReport::compute(&self.predict(data)?, &data.y)?)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Layer by layer: weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[off..off + nw]);
            off += nw;
            b.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    /// Mean Huber loss over the batch and its gradient.
    pub fn loss_and_grad(&self, data: &Xy, delta: f64) -> Result<(f64, Vec<f64>), MlpError> {
        if data.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        if data.n_features != self.dims[0] {
            return Err(MlpError::DimensionMismatch {
                expected: self.dims[0],
                got: data.n_features,
            });
        }
        const CHUNK: usize = 64;
        let inv_n = 1.0 / data.len() as f64;
        let n_chunks = data.len().div_ceil(CHUNK);
        let parts: Vec<(f64, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut grad = vec![0.0; self.param_count()];
                let mut loss = 0.0;
                for i in c * CHUNK..((c + 1) * CHUNK).min(data.len()) {
                    loss += self.backprop(data.row(i), data.y[i], delta, inv_n, &mut grad);
                }
                (loss, grad)
            })
            .collect();
        let (loss, grad) = tree_reduce(parts, |a, b| {
            a.0 += b.0;
            a.1.iter_mut().zip(b.1).for_each(|(x, y)| *x += y);
        });
        Ok((loss * inv_n, grad))
    }

    fn backprop(&self, x: &[f64], target: f64, delta: f64, scale: f64, grad: &mut [f64]) -> f64 {
        let nl = self.n_layers();
        // pre-activations and activations per layer
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(nl);
        for l in 0..nl {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.weights[l];
            let a = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    self.biases[l][o]
                        + w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(a)
                            .map(|(w, v)| w * v)
                            .sum::<f64>()
                })
                .collect();
            let next = if l + 1 == nl {
                z.clone()
            } else {
                z.iter().map(|&v| self.leaky(v)).collect()
            };
            pre.push(z);
            acts.push(next);
        }
        let r = acts[nl][0] - target;
        let mut delta_out = vec![huber_derivative(r, delta) * scale];

        let mut offsets = Vec::with_capacity(nl);
        let mut off = 0;
        for l in 0..nl {
            offsets.push(off);
            off += self.weights[l].len() + self.biases[l].len();
        }
        for l in (0..nl).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            if l + 1 != nl {
                for (d, z) in delta_out.iter_mut().zip(&pre[l]) {
                    if *z <= 0.0 {
                        *d *= self.negative_slope;
                    }
                }
            }
            let w = &self.weights[l];
            let o = offsets[l];
            let mut delta_in = vec![0.0; n_in];
            for (j, &d) in delta_out.iter().enumerate().take(n_out) {
                for i in 0..n_in {
                    grad[o + j * n_in + i] += d * acts[l][i];
                    delta_in[i] += d * w[j * n_in + i];
                }
                grad[o + n_in * n_out + j] += d;
            }
            delta_out = delta_in;
        }
        huber(r, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpReport {
    pub history: Vec<MlpEpoch>,
    pub best_epoch: usize,
    pub best_val_r2: f64,
    pub stopped_early: bool,
}

/// Minibatch Adam with seeded per-epoch shuffling; keeps the epoch with the
/// best validation R².
pub fn train_mlp(train: &Xy, val: &Xy, cfg: &MlpConfig) -> Result<(MlpModel, MlpReport), MlpError> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(MlpError::InvalidConfig(
            "epochs, batch_size and learning_rate must be positive".into(),
        ));
    }
    if train.is_empty() || val.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    let mut model = MlpModel::init(&cfg.dims, cfg.negative_slope, cfg.seed)?;
    if train.n_features != cfg.dims[0] {
        return Err(MlpError::DimensionMismatch {
            expected: cfg.dims[0],
            got: train.n_features,
        });
    }
    let mut params = model.params();
    let mut adam = Adam::new(cfg.learning_rate, params.len());
    let mut rng = rng::seeded(cfg.seed ^ 0x6d6c_7000);
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let order = rng::permutation(train.len(), &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.select(chunk);
            let (loss, grad) = model.loss_and_grad(&batch, cfg.huber_delta)?;
            if !loss.is_finite() {
                return Err(MlpError::DivergenceDetected { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut params, &grad);
            model.set_params(&params);
        }
        let val_r2 = model.evaluate(val)?.r2;
        history.push(MlpEpoch {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_r2,
        });
        if val_r2 > best.0 {
            best = (val_r2, epoch, params.clone());
        } else if epoch - best.1 >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    model.set_params(&best.2);
    Ok((
        model,
        MlpReport {
            history,
            best_epoch: best.1,
            best_val_r2: best.0,
            stopped_early,
        },
    ))
}
