//! Comparison models: ordinary least squares and a small fully connected
//! network, plus the metrics every model is scored with.

pub mod metrics;
pub mod mlp;
pub mod ols;

pub use metrics::{mse, r2, MetricsError, MetricsReport};
pub use mlp::{train_mlp, MlpConfig, MlpError, MlpModel};
pub use ols::{fit_ols, fit_ols_xy, LinearModel, OlsError};

use serde::{Deserialize, Serialize};

use crate::dataio::FeatureScaler;

pub const BASELINE_SCHEMA_VERSION: u32 = 1;

/// On-disk wrapper shared by the baseline models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope<T> {
    pub schema_version: u32,
    /// `"lr"` or `"mlp"`.
    pub kind: String,
    pub prng: String,
    pub seed: u64,
    pub inputs: Vec<String>,
    /// Present when the model consumes scaled inputs.
    pub scaler: Option<FeatureScaler>,
    pub model: T,
}

impl<T: Serialize + for<'de> Deserialize<'de>> ModelEnvelope<T> {
    pub fn new(
        kind: &str,
        seed: u64,
        inputs: Vec<String>,
        scaler: Option<FeatureScaler>,
        model: T,
    ) -> Self {
        ModelEnvelope {
            schema_version: BASELINE_SCHEMA_VERSION,
            kind: kind.to_string(),
            prng: crate::rng::PRNG_ID.to_string(),
            seed,
            inputs,
            scaler,
            model,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
