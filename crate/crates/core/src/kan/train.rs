use serde::{Deserialize, Serialize};

use super::{KanError, KanNetwork, Regularization};
use crate::baselines::metrics;
use crate::dataio::Xy;
use crate::optim::{Adam, Lbfgs};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainBatch {
    Full,
    Size(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch: TrainBatch,
    pub lambda_l1: f64,
    pub lambda_entropy: f64,
    /// Stop once validation R² has not improved for this many steps.
    pub patience: usize,
    /// Return the best-validation parameters rather than the final ones.
    pub restore_best: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            steps: 2000,
            batch: TrainBatch::Full,
            lambda_l1: 0.0,
            lambda_entropy: 0.0,
            patience: 200,
            restore_best: true,
            seed: 2024,
        }
    }
}

impl TrainConfig {
    /// The sparsification phase run ahead of pruning.
    pub fn sparsify(steps: usize, seed: u64) -> Self {
        TrainConfig {
            steps,
            lambda_l1: 1e-3,
            lambda_entropy: 1e-3,
            patience: usize::MAX,
            // regularization trades fit for sparsity, so the best-fitting
            // step is usually the first one
            restore_best: false,
            seed,
            ..Default::default()
        }
    }

    pub fn regularization(&self) -> Regularization {
        Regularization {
            lambda_l1: self.lambda_l1,
            lambda_entropy: self.lambda_entropy,
        }
    }

    pub fn validate(&self) -> Result<(), KanError> {
        if self.steps == 0 {
            return Err(KanError::InvalidConfig("steps must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(KanError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.lambda_l1 < 0.0 || self.lambda_entropy < 0.0 {
            return Err(KanError::InvalidConfig(
                "regularization weights must be >= 0".into(),
            ));
        }
        if matches!(self.batch, TrainBatch::Size(0)) {
            return Err(KanError::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub train_loss: f64,
    pub val_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<HistoryEntry>,
    pub best_step: usize,
    pub best_val_r2: f64,
    pub stopped_early: bool,
    /// Edge evaluations clamped into a grid domain over the whole run.
    pub clamped_evals: u64,
}

/// Trains a copy of `net` and returns the parameters with the best
/// validation R² seen, or the final ones when `restore_best` is off.
pub fn train(
    net: &KanNetwork,
    train: &Xy,
    val: &Xy,
    cfg: &TrainConfig,
) -> Result<(KanNetwork, TrainReport), KanError> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(KanError::EmptyBatch);
    }
    for d in [train, val] {
        if d.n_features != net.n_inputs() {
            return Err(KanError::DimensionMismatch {
                expected: net.n_inputs(),
                got: d.n_features,
            });
        }
    }
    let reg = cfg.regularization();
    let mut net = net.clone();
    let mut params = net.params();
    let mut adam = Adam::new(cfg.learning_rate, params.len());
    let mut lbfgs = Lbfgs::new(cfg.learning_rate, 10);
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0usize;

    let mut history = Vec::with_capacity(cfg.steps);
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut clamped_evals = 0u64;
    let mut stopped_early = false;
    let mut last_good = net.clone();

    // L-BFGS carries its value/gradient from the line search
    let mut carried: Option<(f64, Vec<f64>)> = None;

    for step in 0..cfg.steps {
        let batch_owned;
        let batch = match cfg.batch {
            TrainBatch::Full => train,
            TrainBatch::Size(b) => {
                if cursor + b > order.len() {
                    order = rng::permutation(train.len(), &mut rng);
                    cursor = 0;
                }
                let end = (cursor + b).min(order.len());
                batch_owned = train.select(&order[cursor..end]);
                cursor = end;
                &batch_owned
            }
        };

        let (loss, grad) = match carried.take() {
            Some(fg) if cfg.batch == TrainBatch::Full => fg,
            _ => {
                let g = net.gradients(batch, &reg)?;
                clamped_evals += g.clamped;
                (g.loss.total, g.grad)
            }
        };
        if !loss.is_finite() || grad.iter().any(|v| !v.is_finite()) {
            return Err(KanError::DivergenceDetected {
                step,
                last_good: Box::new(last_good),
            });
        }
        let val_r2 = net.evaluate(val).map(|m| m.r2).or_else(|e| match e {
            KanError::Metrics(metrics::MetricsError::ZeroVariance) => Ok(f64::NAN),
            e => Err(e),
        })?;
        history.push(HistoryEntry {
            step,
            train_loss: loss,
            val_r2,
        });
        last_good = net.clone();
        if val_r2 > best.0 || (step == 0 && best.0 == f64::NEG_INFINITY) {
            best = (val_r2, step, params.clone());
        }
        if step - best.1 >= cfg.patience {
            stopped_early = true;
            break;
        }
        if step + 1 == cfg.steps {
            break;
        }

        match cfg.optimizer {
            OptimizerKind::Adam => adam.step(&mut params, &grad),
            OptimizerKind::Lbfgs => {
                let mut probe = net.clone();
                let mut evals = 0u64;
                let next = lbfgs.step(&mut params, loss, &grad, |p| {
                    probe.set_params(p);
                    match probe.gradients(batch, &reg) {
                        Ok(g) => {
                            evals += g.clamped;
                            (g.loss.total, g.grad)
                        }
                        Err(_) => (f64::NAN, vec![0.0; p.len()]),
                    }
                });
                clamped_evals += evals;
                carried = Some(next);
            }
        }
        net.set_params(&params);
    }

    if cfg.restore_best {
        net.set_params(&best.2);
    }
    Ok((
        net,
        TrainReport {
            history,
            best_step: best.1,
            best_val_r2: best.0,
            stopped_early,
            clamped_evals,
        },
    ))
}
