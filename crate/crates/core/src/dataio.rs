//! Loading, cleaning, splitting and scaling of the airfoil table.
//!
//! A row carries eight CST shape coefficients, the angle of attack and the
//! lift coefficient. Feature columns are scaled to `[-1, 1]` from the training
//! split; the target is left in its original units.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("MissingFile: {0}")]
    MissingFile(String),
    #[error("MissingColumn({0:?})")]
    MissingColumn(String),
    #[error("ParseError(row {row}, column {column:?}): {value:?}")]
    ParseError {
        row: usize,
        column: String,
        value: String,
    },
    #[error("EmptyFile")]
    EmptyFile,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("unknown column role {0:?}")]
    UnknownRole(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// What a CSV column means to the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    Aoa,
    Cl,
}

pub const FEATURE_ROLES: [Role; 9] = [
    Role::C1,
    Role::C2,
    Role::C3,
    Role::C4,
    Role::C5,
    Role::C6,
    Role::C7,
    Role::C8,
    Role::Aoa,
];

pub const ALL_ROLES: [Role; 10] = [
    Role::C1,
    Role::C2,
    Role::C3,
    Role::C4,
    Role::C5,
    Role::C6,
    Role::C7,
    Role::C8,
    Role::Aoa,
    Role::Cl,
];

/// The nine variables of interest: shape coefficients and lift, not aoa.
pub const DEFAULT_DEDUP_KEY: [Role; 9] = [
    Role::C1,
    Role::C2,
    Role::C3,
    Role::C4,
    Role::C5,
    Role::C6,
    Role::C7,
    Role::C8,
    Role::Cl,
];

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::C1 => "c1",
            Role::C2 => "c2",
            Role::C3 => "c3",
            Role::C4 => "c4",
            Role::C5 => "c5",
            Role::C6 => "c6",
            Role::C7 => "c7",
            Role::C8 => "c8",
            Role::Aoa => "aoa",
            Role::Cl => "cl",
        }
    }

    /// Position in the 9-wide feature vector, `None` for the target.
    pub fn feature_index(self) -> Option<usize> {
        FEATURE_ROLES.iter().position(|&r| r == self)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        ALL_ROLES
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or(DataError::UnknownRole(s))
    }
}

pub fn parse_roles(list: &str) -> Result<Vec<Role>, DataError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Role::from_str)
        .collect()
}

/// Role → CSV header name. Unlisted roles use their canonical name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMap(pub BTreeMap<Role, String>);

impl ColumnMap {
    pub fn header_for(&self, role: Role) -> &str {
        self.0.get(&role).map(String::as_str).unwrap_or(role.name())
    }

    /// Parses `role=header` pairs.
    pub fn parse_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<Self, DataError> {
        let mut map = BTreeMap::new();
        for pair in pairs {
            let pair = pair.as_ref();
            let (role, header) = pair
                .split_once('=')
                .ok_or_else(|| DataError::UnknownRole(pair.to_string()))?;
            map.insert(role.parse()?, header.trim().to_string());
        }
        Ok(ColumnMap(map))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirfoilSample {
    pub c: [f64; 8],
    pub aoa: f64,
    pub cl: f64,
}

impl AirfoilSample {
    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Aoa => self.aoa,
            Role::Cl => self.cl,
            r => self.c[r.feature_index().expect("shape coefficient")],
        }
    }

    fn set(&mut self, role: Role, v: f64) {
        match role {
            Role::Aoa => self.aoa = v,
            Role::Cl => self.cl = v,
            r => self.c[r.feature_index().expect("shape coefficient")] = v,
        }
    }

    /// `[c1..c8, aoa]`.
    pub fn features(&self) -> [f64; 9] {
        let mut f = [0.0; 9];
        f[..8].copy_from_slice(&self.c);
        f[8] = self.aoa;
        f
    }

    fn with_features(&self, f: &[f64]) -> Self {
        let mut c = [0.0; 8];
        c.copy_from_slice(&f[..8]);
        AirfoilSample {
            c,
            aoa: f[8],
            cl: self.cl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<AirfoilSample>,
    pub source: String,
}

impl Dataset {
    pub fn new(samples: Vec<AirfoilSample>, source: impl Into<String>) -> Self {
        Dataset {
            samples,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.cl).collect()
    }

    /// Design matrix over the given feature roles, target = `cl`.
    pub fn to_xy(&self, roles: &[Role]) -> Xy {
        let mut x = Vec::with_capacity(self.len() * roles.len());
        for s in &self.samples {
            x.extend(roles.iter().map(|&r| s.get(r)));
        }
        Xy {
            n_features: roles.len(),
            x,
            y: self.targets(),
        }
    }

    /// All nine features.
    pub fn to_feature_xy(&self) -> Xy {
        self.to_xy(&FEATURE_ROLES)
    }

    /// Column means of the nine features.
    pub fn centroid(&self) -> [f64; 9] {
        let mut m = [0.0; 9];
        for s in &self.samples {
            for (acc, v) in m.iter_mut().zip(s.features()) {
                *acc += v;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// Row-major feature matrix with a target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Xy {
    pub n_features: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Xy {
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_features), "ragged rows");
        assert_eq!(rows.len(), y.len(), "row/target count mismatch");
        Xy {
            n_features,
            x: rows.concat(),
            y,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.x[i * self.n_features + j])
            .collect()
    }

    pub fn select(&self, idx: &[usize]) -> Xy {
        let mut x = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Xy {
            n_features: self.n_features,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Splits off the trailing `fraction` of rows (rows are assumed already shuffled).
    pub fn split_tail(&self, fraction: f64) -> (Xy, Xy) {
        let n_tail = ((self.len() as f64) * fraction).round() as usize;
        let n_tail = n_tail.min(self.len().saturating_sub(1));
        let head: Vec<usize> = (0..self.len() - n_tail).collect();
        let tail: Vec<usize> = (self.len() - n_tail..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }
}

pub fn load_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let mut index = Vec::with_capacity(ALL_ROLES.len());
    for role in ALL_ROLES {
        let name = columns.header_for(role);
        let col = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        index.push((role, col, name.to_string()));
    }

    let mut samples = Vec::new();
    let mut out_of_range = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_no + 1;
        let mut sample = AirfoilSample {
            c: [0.0; 8],
            aoa: 0.0,
            cl: 0.0,
        };
        for (role, col, name) in &index {
            let raw = record.get(*col).unwrap_or("");
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::ParseError {
                    row,
                    column: name.clone(),
                    value: raw.to_string(),
                })?;
            sample.set(*role, v);
        }
        if !(-4.0..=8.0).contains(&sample.aoa) {
            out_of_range += 1;
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(DataError::EmptyFile);
    }
    if out_of_range > 0 {
        warn!("{out_of_range} rows have aoa outside [-4, 8] degrees");
    }
    Ok(Dataset::new(samples, path.display().to_string()))
}

/// Writes the canonical layout `c1..c8,aoa,cl` using shortest round-trip floats.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ALL_ROLES.iter().map(|r| r.name()))?;
    for s in &d.samples {
        w.write_record(ALL_ROLES.iter().map(|&r| s.get(r).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn value_key(v: f64) -> u64 {
    // +0.0 folds -0.0 onto 0.0
    (v + 0.0).to_bits()
}

/// Keeps the first row of every distinct key tuple, preserving order.
pub fn dedup(d: &Dataset, key_roles: &[Role]) -> Dataset {
    assert!(
        !key_roles.is_empty(),
        "dedup key must name at least one role"
    );
    let mut seen = HashSet::with_capacity(d.len());
    let samples = d
        .samples
        .iter()
        .filter(|s| {
            let key: Vec<u64> = key_roles.iter().map(|&r| value_key(s.get(r))).collect();
            seen.insert(key)
        })
        .copied()
        .collect();
    Dataset::new(samples, d.source.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 2024,
        }
    }
}

impl SplitSpec {
    pub fn train_count(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).round() as usize
    }
}

/// Seeded shuffle then prefix split.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    if d.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DataError::InvalidSplit(format!(
            "train_fraction {} not in (0, 1)",
            spec.train_fraction
        )));
    }
    let order = rng::permutation(d.len(), &mut rng::seeded(spec.seed));
    let n_train = spec.train_count(d.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| d.samples[i]).collect::<Vec<_>>();
    Ok((
        Dataset::new(pick(&order[..n_train]), format!("{}#train", d.source)),
        Dataset::new(pick(&order[n_train..]), format!("{}#test", d.source)),
    ))
}

/// Per-feature min/max affine map onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit_xy(xy: &Xy, names: Vec<String>) -> Result<Self, DataError> {
        if xy.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        assert_eq!(names.len(), xy.n_features);
        let mut min = vec![f64::INFINITY; xy.n_features];
        let mut max = vec![f64::NEG_INFINITY; xy.n_features];
        for i in 0..xy.len() {
            for (j, &v) in xy.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(FeatureScaler { names, min, max })
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.max[j] <= self.min[j]
    }

    pub fn scale(&self, j: usize, v: f64) -> f64 {
        if self.is_degenerate(j) {
            0.0
        } else {
            2.0 * (v - self.min[j]) / (self.max[j] - self.min[j]) - 1.0
        }
    }

    pub fn unscale(&self, j: usize, v: f64) -> f64 {
        if self.is_degenerate(j) {
            self.min[j]
        } else {
            (v + 1.0) * 0.5 * (self.max[j] - self.min[j]) + self.min[j]
        }
    }

    /// `(s, o)` with `scale(j, v) == s * v + o` up to rounding.
    pub fn affine(&self, j: usize) -> (f64, f64) {
        if self.is_degenerate(j) {
            (0.0, 0.0)
        } else {
            let w = self.max[j] - self.min[j];
            (2.0 / w, -2.0 * self.min[j] / w - 1.0)
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| self.scale(j, v))
            .collect()
    }

    pub fn apply_xy(&self, xy: &Xy) -> Xy {
        assert_eq!(xy.n_features, self.n_features());
        let mut x = Vec::with_capacity(xy.x.len());
        for i in 0..xy.len() {
            x.extend(self.scale_row(xy.row(i)));
        }
        Xy {
            n_features: xy.n_features,
            x,
            y: xy.y.clone(),
        }
    }

    pub fn apply(&self, d: &Dataset) -> Dataset {
        self.map_dataset(d, |j, v| self.scale(j, v))
    }

    pub fn invert(&self, d: &Dataset) -> Dataset {
        self.map_dataset(d, |j, v| self.unscale(j, v))
    }

    fn map_dataset(&self, d: &Dataset, f: impl Fn(usize, f64) -> f64) -> Dataset {
        assert_eq!(self.n_features(), FEATURE_ROLES.len());
        let samples = d
            .samples
            .iter()
            .map(|s| {
                let mapped: Vec<f64> = s
                    .features()
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| f(j, v))
                    .collect();
                s.with_features(&mapped)
            })
            .collect();
        Dataset::new(samples, d.source.clone())
    }
}

/// Fits on the nine airfoil features; `cl` is never scaled.
pub fn fit_scaler(train: &Dataset) -> Result<FeatureScaler, DataError> {
    let names = FEATURE_ROLES.iter().map(|r| r.name().to_string()).collect();
    let scaler = FeatureScaler::fit_xy(&train.to_feature_xy(), names)?;
    for j in 0..scaler.n_features() {
        if scaler.is_degenerate(j) {
            warn!(
                "feature {} is constant on the training split",
                scaler.names[j]
            );
        }
    }
    Ok(scaler)
}

pub fn apply_scaler(s: &FeatureScaler, d: &Dataset) -> Dataset {
    s.apply(d)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFilter {
    pub retained: Vec<Role>,
    pub dropped: Vec<Role>,
    /// Zero-variance features: excluded from correlation, always retained.
    pub degenerate: Vec<Role>,
}

/// Greedy multicollinearity filter: for each still-retained pair in index
/// order with `|r| > threshold`, the higher-indexed feature is dropped.
pub fn correlation_filter(train: &Dataset, threshold: f64) -> Result<CorrelationFilter, DataError> {
    if train.len() < 2 {
        return Err(DataError::TooFewSamples {
            needed: 2,
            got: train.len(),
        });
    }
    let xy = train.to_feature_xy();
    let cols: Vec<Vec<f64>> = (0..xy.n_features).map(|j| xy.column(j)).collect();
    let degenerate: Vec<bool> = cols.iter().map(|c| c.iter().all(|&v| v == c[0])).collect();
    let mut keep = vec![true; cols.len()];
    for i in 0..cols.len() {
        if !keep[i] || degenerate[i] {
            continue;
        }
        for j in i + 1..cols.len() {
            if !keep[j] || degenerate[j] {
                continue;
            }
            if let Some(r) = pearson(&cols[i], &cols[j]) {
                if r.abs() > threshold {
                    keep[j] = false;
                }
            }
        }
    }
    let pick = |pred: &dyn Fn(usize) -> bool| -> Vec<Role> {
        (0..cols.len())
            .filter(|&j| pred(j))
            .map(|j| FEATURE_ROLES[j])
            .collect()
    };
    let out = CorrelationFilter {
        retained: pick(&|j| keep[j]),
        dropped: pick(&|j| !keep[j]),
        degenerate: pick(&|j| degenerate[j]),
    };
    for r in &out.degenerate {
        warn!("DegenerateFeature: {r} has zero variance; retained without correlation check");
    }
    Ok(out)
}

/// JSON sidecar written next to prepared splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepSidecar {
    pub source: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub prng: String,
    pub dedup_key: Vec<Role>,
    pub rows_loaded: usize,
    pub rows_after_dedup: usize,
    pub rows_train: usize,
    pub rows_test: usize,
    pub scaler: FeatureScaler,
}
