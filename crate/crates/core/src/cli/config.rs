use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::baselines::MlpConfig;
use crate::dataio::{ColumnMap, Role, SplitSpec, DEFAULT_DEDUP_KEY};
use crate::kan::TrainConfig;
use crate::symbolic::{UnaryFn, LIBRARY};

pub const SEED_ENV: &str = "KANFOIL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KanSettings {
    pub width: Vec<usize>,
    pub grid: usize,
    pub k: usize,
    /// Trailing share of the training split held out for early stopping.
    pub val_fraction: f64,
    pub train: TrainConfig,
}

impl Default for KanSettings {
    fn default() -> Self {
        KanSettings {
            width: vec![9, 9, 1],
            grid: 6,
            k: 2,
            val_fraction: 0.1,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrSettings {
    pub correlation_threshold: f64,
    /// Explicit feature list; the correlation filter decides when absent.
    pub features: Option<Vec<Role>>,
}

impl Default for LrSettings {
    fn default() -> Self {
        LrSettings {
            correlation_threshold: 0.5,
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneSettings {
    pub percentile: f64,
    /// Regularized training steps run before scoring (0 = off). Without
    /// them most edges carry some signal and pruning cuts into the fit.
    pub sparsify_steps: usize,
    /// Plain training steps run on the pruned network (0 = off).
    pub finetune_steps: usize,
}

impl Default for PruneSettings {
    fn default() -> Self {
        PruneSettings {
            percentile: 75.0,
            sparsify_steps: 500,
            finetune_steps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolicSettings {
    pub library: Vec<UnaryFn>,
    pub precision: usize,
}

impl Default for SymbolicSettings {
    fn default() -> Self {
        SymbolicSettings {
            library: LIBRARY.to_vec(),
            precision: 2,
        }
    }
}

/// Everything a command needs; written to `run.json` in every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub columns: ColumnMap,
    pub dedup_key: Vec<Role>,
    pub split: SplitSpec,
    pub kan: KanSettings,
    pub mlp: MlpConfig,
    pub lr: LrSettings,
    pub prune: PruneSettings,
    pub symbolic: SymbolicSettings,
    pub metrics: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            seed: 2024,
            input: None,
            data_dir: None,
            model_path: None,
            out: None,
            model: None,
            columns: ColumnMap::default(),
            dedup_key: DEFAULT_DEDUP_KEY.to_vec(),
            split: SplitSpec::default(),
            kan: KanSettings::default(),
            mlp: MlpConfig::default(),
            lr: LrSettings::default(),
            prune: PruneSettings::default(),
            symbolic: SymbolicSettings::default(),
            metrics: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid by the config file (if any), then by the seed
    /// environment variable. Flags are applied by the caller afterwards.
    pub fn base(config_file: Option<&Path>) -> Result<Self> {
        let mut cfg = match config_file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("MissingFile: cannot read config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
        }
        Ok(cfg)
    }

    /// Pushes the single run seed into every seeded component.
    pub fn propagate_seed(&mut self) {
        self.split.seed = self.seed;
        self.kan.train.seed = self.seed;
        self.mlp.seed = self.seed;
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("run.json"), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
