use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use super::config::{write_json, KanSettings, RunConfig};
use super::report::{build_report, MetricsFile};
use super::{Cli, Command, FormulaCommand, ModelKind, OptimizerArg};
use crate::baselines::{
    self, fit_ols, train_mlp, LinearModel, MetricsReport, MlpModel, ModelEnvelope,
};
use crate::dataio::{
    self, correlation_filter, dedup, fit_scaler, load_csv, parse_roles, split, write_csv,
    ColumnMap, Dataset, PrepSidecar, FEATURE_ROLES,
};
use crate::kan::{self, EdgeAddr, KanNetwork, OptimizerKind, TrainConfig, TrainReport};
use crate::prune::{self, ImportanceReport};
use crate::rng::PRNG_ID;
use crate::symbolic::{
    differentiate, formula_predictions, outer_skeleton, symbolify_network, EdgeFit, FormulaNode,
    UnaryFn,
};

/// Bad argument values detected after parsing; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub(super) fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::base(cli.config.as_deref())?;
    match cli.command {
        Command::Prep(a) => {
            cfg.command = "prep".into();
            cfg.input = Some(a.input);
            cfg.out = Some(a.out);
            if !a.columns.is_empty() {
                cfg.columns =
                    ColumnMap::parse_pairs(&a.columns).map_err(|e| usage(e.to_string()))?;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(f) = a.train_fraction {
                cfg.split.train_fraction = f;
            }
            cfg.propagate_seed();
            prepare(&cfg).map(|_| ())
        }
        Command::Train(a) => {
            cfg.command = "train".into();
            cfg.model = Some(a.model.name().into());
            cfg.data_dir = Some(a.data);
            cfg.out = Some(a.out);
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(s) = a.steps {
                cfg.kan.train.steps = s;
            }
            if let Some(o) = a.optimizer {
                cfg.kan.train.optimizer = match o {
                    OptimizerArg::Adam => OptimizerKind::Adam,
                    OptimizerArg::Lbfgs => OptimizerKind::Lbfgs,
                };
            }
            if let Some(e) = a.epochs {
                cfg.mlp.epochs = e;
            }
            if let Some(list) = a.lr_features {
                cfg.lr.features = Some(parse_roles(&list).map_err(|e| usage(e.to_string()))?);
            }
            cfg.propagate_seed();
            cmd_train(&cfg, a.model)
        }
        Command::Evaluate(a) => {
            cfg.command = "evaluate".into();
            cfg.model_path = Some(a.model);
            cfg.input = Some(a.data);
            cfg.out = a.out;
            if !a.columns.is_empty() {
                cfg.columns =
                    ColumnMap::parse_pairs(&a.columns).map_err(|e| usage(e.to_string()))?;
            }
            cmd_evaluate(&cfg)
        }
        Command::Prune(a) => {
            cfg.command = "prune".into();
            cfg.model_path = Some(a.model);
            cfg.data_dir = Some(a.data);
            cfg.out = Some(a.out);
            if let Some(p) = a.percentile {
                if !(0.0..=100.0).contains(&p) {
                    return Err(usage(format!("--percentile must lie in [0, 100], got {p}")));
                }
                cfg.prune.percentile = p;
            }
            if let Some(s) = a.sparsify_steps {
                cfg.prune.sparsify_steps = s;
            }
            if let Some(s) = a.finetune_steps {
                cfg.prune.finetune_steps = s;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cfg.propagate_seed();
            cmd_prune(&cfg).map(|_| ())
        }
        Command::Importance(a) => {
            cfg.command = "importance".into();
            cfg.model_path = Some(a.model);
            cfg.data_dir = Some(a.data);
            cfg.out = Some(a.out);
            cmd_importance(&cfg)
        }
        Command::Symbolify(a) => {
            cfg.command = "symbolify".into();
            cfg.model_path = Some(a.model);
            cfg.data_dir = Some(a.data);
            cfg.out = Some(a.out);
            if let Some(list) = a.library {
                cfg.symbolic.library = list
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        UnaryFn::from_name(s)
                            .ok_or_else(|| usage(format!("unknown function {s:?}")))
                    })
                    .collect::<Result<_>>()?;
                if cfg.symbolic.library.is_empty() {
                    return Err(usage("--library is empty"));
                }
            }
            if let Some(p) = a.precision {
                cfg.symbolic.precision = p;
            }
            cmd_symbolify(&cfg).map(|_| ())
        }
        Command::Formula(f) => cmd_formula(f),
        Command::Report(a) => {
            cfg.command = "report".into();
            cfg.metrics = a.metrics;
            cfg.out = a.out;
            cmd_report(&cfg)
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| usage(format!("missing {what}")))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        bail!("MissingFile: {}", path.display());
    }
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn feature_names() -> Vec<String> {
    FEATURE_ROLES.iter().map(|r| r.name().to_string()).collect()
}

// --------------------------------------------------------------------- prep

/// Prepared splits written by `prep`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub sidecar: PrepSidecar,
}

pub fn prepare(cfg: &RunConfig) -> Result<PrepSidecar> {
    let input = required(&cfg.input, "--input")?;
    let out = required(&cfg.out, "--out")?;
    let raw = load_csv(input, &cfg.columns)?;
    let unique = dedup(&raw, &cfg.dedup_key);
    let (train, test) = split(&unique, &cfg.split)?;
    let scaler = fit_scaler(&train)?;
    let sidecar = PrepSidecar {
        source: input.display().to_string(),
        seed: cfg.split.seed,
        train_fraction: cfg.split.train_fraction,
        prng: PRNG_ID.into(),
        dedup_key: cfg.dedup_key.clone(),
        rows_loaded: raw.len(),
        rows_after_dedup: unique.len(),
        rows_train: train.len(),
        rows_test: test.len(),
        scaler,
    };
    ensure_dir(out)?;
    write_csv(&train, out.join("train.csv"))?;
    write_csv(&test, out.join("test.csv"))?;
    write_json(&out.join("prep.json"), &sidecar)?;
    cfg.write(out)?;
    println!("rows loaded: {}", sidecar.rows_loaded);
    println!("rows after dedup: {}", sidecar.rows_after_dedup);
    println!(
        "train / test: {} / {}",
        sidecar.rows_train, sidecar.rows_test
    );
    Ok(sidecar)
}

pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    let sidecar: PrepSidecar = serde_json::from_str(&read_text(&dir.join("prep.json"))?)
        .with_context(|| format!("invalid {}", dir.join("prep.json").display()))?;
    let cols = ColumnMap::default();
    Ok(Prepared {
        train: load_csv(dir.join("train.csv"), &cols)?,
        test: load_csv(dir.join("test.csv"), &cols)?,
        sidecar,
    })
}

// -------------------------------------------------------------------- train

/// Trains the configured network on scaled features, holding out the tail of
/// the training split for early stopping. The returned network carries the
/// scaler so it accepts raw features.
pub fn train_kan_model(
    settings: &KanSettings,
    data: &Prepared,
    seed: u64,
) -> Result<(KanNetwork, TrainReport)> {
    let scaler = data.sidecar.scaler.clone();
    let xy = scaler.apply_xy(&data.train.to_feature_xy());
    let (fit, val) = xy.split_tail(settings.val_fraction);
    let mut net = KanNetwork::init(&settings.width, settings.grid, settings.k, seed)?;
    if net.n_inputs() == FEATURE_ROLES.len() {
        net.inputs = feature_names();
    }
    let (mut net, report) = kan::train(&net, &fit, &val, &settings.train)?;
    net.scaler = Some(scaler);
    Ok((net, report))
}

fn kan_metrics(net: &KanNetwork, d: &Dataset) -> Result<MetricsReport> {
    let xy = d.to_feature_xy();
    Ok(MetricsReport::compute(&net.predict_raw(&xy)?, &xy.y)?)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn cmd_train(cfg: &RunConfig, kind: ModelKind) -> Result<()> {
    let data = load_prepared(required(&cfg.data_dir, "--data")?)?;
    let out = required(&cfg.out, "--out")?;
    let metrics = match kind {
        ModelKind::Kan => {
            let (net, report) = train_kan_model(&cfg.kan, &data, cfg.seed)?;
            let m = MetricsFile {
                model: "kan".into(),
                features: net.inputs.clone(),
                scaled_inputs: true,
                train: kan_metrics(&net, &data.train)?,
                test: kan_metrics(&net, &data.test)?,
            };
            ensure_dir(out)?;
            net.save(out.join("model.json"))?;
            write_jsonl(&out.join("history.jsonl"), &report.history)?;
            m
        }
        ModelKind::Lr => {
            let roles = match &cfg.lr.features {
                Some(r) => r.clone(),
                None => correlation_filter(&data.train, cfg.lr.correlation_threshold)?.retained,
            };
            let model = fit_ols(&data.train, &roles)?;
            let eval = |d: &Dataset| -> Result<MetricsReport> {
                let xy = d.to_xy(&roles);
                Ok(MetricsReport::compute(&model.predict(&xy)?, &xy.y)?)
            };
            let m = MetricsFile {
                model: "lr".into(),
                features: model.features.clone(),
                scaled_inputs: false,
                train: eval(&data.train)?,
                test: eval(&data.test)?,
            };
            ensure_dir(out)?;
            let env = ModelEnvelope::new("lr", cfg.seed, model.features.clone(), None, model);
            std::fs::write(out.join("model.json"), env.to_json()? + "\n")?;
            m
        }
        ModelKind::Mlp => {
            let scaler = data.sidecar.scaler.clone();
            let xy = scaler.apply_xy(&data.train.to_feature_xy());
            let (fit, val) = xy.split_tail(cfg.kan.val_fraction);
            let (model, report) = train_mlp(&fit, &val, &cfg.mlp)?;
            let eval = |d: &Dataset| -> Result<MetricsReport> {
                let xy = scaler.apply_xy(&d.to_feature_xy());
                Ok(model.evaluate(&xy)?)
            };
            let m = MetricsFile {
                model: "mlp".into(),
                features: feature_names(),
                scaled_inputs: true,
                train: eval(&data.train)?,
                test: eval(&data.test)?,
            };
            ensure_dir(out)?;
            let env = ModelEnvelope::new("mlp", cfg.seed, feature_names(), Some(scaler), model);
            std::fs::write(out.join("model.json"), env.to_json()? + "\n")?;
            write_jsonl(&out.join("history.jsonl"), &report.history)?;
            m
        }
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    cfg.write(out)?;
    println!(
        "{}: train r2 {:.4}, test r2 {:.4}, test mse {:.6}",
        metrics.model, metrics.train.r2, metrics.test.r2, metrics.test.mse
    );
    Ok(())
}

// ----------------------------------------------------------------- evaluate

/// A saved model of any kind.
pub enum SavedModel {
    Kan(KanNetwork),
    Lr(ModelEnvelope<LinearModel>),
    Mlp(ModelEnvelope<MlpModel>),
}

impl SavedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let head: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))?;
        match head.get("kind").and_then(|k| k.as_str()) {
            Some("kan") => Ok(SavedModel::Kan(KanNetwork::from_json(&text)?)),
            Some("lr") => Ok(SavedModel::Lr(ModelEnvelope::from_json(&text)?)),
            Some("mlp") => Ok(SavedModel::Mlp(ModelEnvelope::from_json(&text)?)),
            other => bail!("{}: unknown model kind {other:?}", path.display()),
        }
    }

    /// Predictions on raw-unit samples.
    pub fn predict(&self, d: &Dataset) -> Result<Vec<f64>> {
        Ok(match self {
            SavedModel::Kan(net) => net.predict_raw(&d.to_feature_xy())?,
            SavedModel::Lr(env) => env.model.predict(&d.to_xy(&env.model.roles()))?,
            SavedModel::Mlp(env) => {
                let xy = d.to_feature_xy();
                let xy = match &env.scaler {
                    Some(s) => s.apply_xy(&xy),
                    None => xy,
                };
                env.model.predict(&xy)?
            }
        })
    }
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let model = SavedModel::load(required(&cfg.model_path, "--model")?)?;
    let d = load_csv(required(&cfg.input, "--data")?, &cfg.columns)?;
    let m = MetricsReport::compute(&model.predict(&d)?, &d.targets())?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    if let Some(out) = &cfg.out {
        ensure_dir(out)?;
        write_json(&out.join("evaluation.json"), &m)?;
        cfg.write(out)?;
    }
    Ok(())
}

// -------------------------------------------------------------------- prune

fn load_kan(path: &Path) -> Result<KanNetwork> {
    match SavedModel::load(path)? {
        SavedModel::Kan(net) => Ok(net),
        _ => bail!("{} is not a spline-edge network model", path.display()),
    }
}

fn scaled_features(net: &KanNetwork, d: &Dataset) -> dataio::Xy {
    let xy = d.to_feature_xy();
    match &net.scaler {
        Some(s) => s.apply_xy(&xy),
        None => xy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub train: MetricsReport,
    pub test: MetricsReport,
}

fn split_metrics(net: &KanNetwork, data: &Prepared) -> Result<SplitMetrics> {
    Ok(SplitMetrics {
        train: kan_metrics(net, &data.train)?,
        test: kan_metrics(net, &data.test)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub percentile: f64,
    /// `None` stands for `-inf` (nothing at or below).
    pub edge_threshold: Option<f64>,
    pub node_threshold: Option<f64>,
    pub nodes_before: usize,
    pub edges_before: usize,
    pub surviving_nodes: usize,
    pub surviving_edges: usize,
    pub removed_edges: Vec<EdgeAddr>,
    pub scoring_set: String,
    pub scoring_n: usize,
    pub sparsify_steps: usize,
    pub finetune_steps: usize,
    /// The model as loaded.
    pub trained: SplitMetrics,
    /// The network entering pruning, after any sparsify pass.
    pub before: SplitMetrics,
    pub after: SplitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureScore {
    feature: String,
    importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ImportanceFile {
    #[serde(flatten)]
    report: ImportanceReport,
    feature_importance: Vec<FeatureScore>,
    /// Features from most to least important.
    ranking: Vec<String>,
}

fn importance_file(net: &KanNetwork, report: &ImportanceReport) -> ImportanceFile {
    let fi = prune::feature_importance(report);
    let feature_importance: Vec<FeatureScore> = net
        .inputs
        .iter()
        .zip(&fi)
        .map(|(f, v)| FeatureScore {
            feature: f.clone(),
            importance: *v,
        })
        .collect();
    let mut order: Vec<usize> = (0..fi.len()).collect();
    order.sort_by(|&a, &b| fi[b].total_cmp(&fi[a]).then(a.cmp(&b)));
    ImportanceFile {
        report: report.clone(),
        feature_importance,
        ranking: order.into_iter().map(|i| net.inputs[i].clone()).collect(),
    }
}

pub fn cmd_prune(cfg: &RunConfig) -> Result<PruneSummary> {
    let original = load_kan(required(&cfg.model_path, "--model")?)?;
    let data = load_prepared(required(&cfg.data_dir, "--data")?)?;
    let out = required(&cfg.out, "--out")?;
    let scoring = scaled_features(&original, &data.train);
    let trained = split_metrics(&original, &data)?;

    let mut net = original.clone();
    if cfg.prune.sparsify_steps > 0 {
        let (fit, val) = scoring.split_tail(cfg.kan.val_fraction);
        net = kan::train(
            &net,
            &fit,
            &val,
            &TrainConfig::sparsify(cfg.prune.sparsify_steps, cfg.seed),
        )?
        .0;
    }
    let before = split_metrics(&net, &data)?;
    let mut report = prune::score(&net, &scoring)?;
    report.scoring_set = "train".into();
    let result = prune::prune(&net, &report, cfg.prune.percentile)?;
    let mut pruned = result.net.clone();
    if cfg.prune.finetune_steps > 0 {
        let (fit, val) = scoring.split_tail(cfg.kan.val_fraction);
        let tc = TrainConfig {
            steps: cfg.prune.finetune_steps,
            seed: cfg.seed,
            ..cfg.kan.train.clone()
        };
        pruned = kan::train(&pruned, &fit, &val, &tc)?.0;
    }
    let summary = PruneSummary {
        percentile: result.percentile,
        edge_threshold: result
            .thresholds
            .edge
            .is_finite()
            .then_some(result.thresholds.edge),
        node_threshold: result
            .thresholds
            .node
            .is_finite()
            .then_some(result.thresholds.node),
        nodes_before: prune::surviving_nodes(&net),
        edges_before: net.active_edge_count(),
        surviving_nodes: result.surviving_nodes,
        surviving_edges: result.surviving_edges,
        removed_edges: result.removed.clone(),
        scoring_set: report.scoring_set.clone(),
        scoring_n: report.scoring_n,
        sparsify_steps: cfg.prune.sparsify_steps,
        finetune_steps: cfg.prune.finetune_steps,
        trained,
        before,
        after: split_metrics(&pruned, &data)?,
    };

    ensure_dir(out)?;
    pruned.save(out.join("pruned_model.json"))?;
    write_json(
        &out.join("importance.json"),
        &importance_file(&net, &report),
    )?;
    write_json(&out.join("prune.json"), &summary)?;
    std::fs::write(out.join("graph.dot"), prune::to_dot(&pruned, &report))?;
    cfg.write(out)?;
    println!(
        "percentile {}: {} nodes, {} edges survive (of {} / {}); test r2 {:.4} trained, {:.4} before, {:.4} after",
        summary.percentile,
        summary.surviving_nodes,
        summary.surviving_edges,
        summary.nodes_before,
        summary.edges_before,
        summary.trained.test.r2,
        summary.before.test.r2,
        summary.after.test.r2
    );
    Ok(summary)
}

fn cmd_importance(cfg: &RunConfig) -> Result<()> {
    let net = load_kan(required(&cfg.model_path, "--model")?)?;
    let data = load_prepared(required(&cfg.data_dir, "--data")?)?;
    let out = required(&cfg.out, "--out")?;
    let mut report = prune::score(&net, &scaled_features(&net, &data.train))?;
    report.scoring_set = "train".into();
    let file = importance_file(&net, &report);
    ensure_dir(out)?;
    write_json(&out.join("importance.json"), &file)?;
    std::fs::write(out.join("graph.dot"), prune::to_dot(&net, &report))?;
    cfg.write(out)?;
    for fs in &file.ranking {
        let v = file
            .feature_importance
            .iter()
            .find(|f| &f.feature == fs)
            .map_or(0.0, |f| f.importance);
        println!("{fs:>4} {v:.4}");
    }
    Ok(())
}

// ---------------------------------------------------------------- symbolify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub outer: UnaryFn,
    pub inner_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolifySummary {
    pub edges: Vec<EdgeFit>,
    pub min_edge_r2: f64,
    /// Formula against the network's own predictions on the scoring set.
    pub formula_vs_net_r2: f64,
    pub formula_train_r2: f64,
    pub formula_test_r2: f64,
    pub net_test_r2: f64,
    /// Test rows where the formula leaves a function's domain (excluded above).
    pub undefined_test_points: usize,
    pub raw_units: bool,
    pub skeleton: Option<Skeleton>,
    pub centroid: BTreeMap<String, f64>,
    /// Slope with respect to `aoa` at the training centroid, when `aoa` appears.
    pub slope_aoa_at_centroid: Option<f64>,
}

fn defined_r2(
    formula: &FormulaNode,
    names: &[String],
    xy: &dataio::Xy,
    target: &[f64],
) -> (f64, usize) {
    let (mut p, mut t) = (Vec::new(), Vec::new());
    let mut undefined = 0;
    for i in 0..xy.len() {
        let vars: BTreeMap<String, f64> = names
            .iter()
            .cloned()
            .zip(xy.row(i).iter().copied())
            .collect();
        match formula.eval(&vars) {
            Ok(v) => {
                p.push(v);
                t.push(target[i]);
            }
            Err(_) => undefined += 1,
        }
    }
    (baselines::r2(&p, &t).unwrap_or(f64::NAN), undefined)
}

pub fn cmd_symbolify(cfg: &RunConfig) -> Result<SymbolifySummary> {
    let net = load_kan(required(&cfg.model_path, "--model")?)?;
    let data = load_prepared(required(&cfg.data_dir, "--data")?)?;
    let out = required(&cfg.out, "--out")?;
    let scoring = scaled_features(&net, &data.train);
    let sym = symbolify_network(&net, &scoring, &cfg.symbolic.library)?;
    let names = net.inputs.clone();

    let train_raw = data.train.to_feature_xy();
    let test_raw = data.test.to_feature_xy();
    let net_train = net.predict(&scoring)?;
    let net_test = net.predict_raw(&test_raw)?;
    let formula_vs_net_r2 = match formula_predictions(&sym.formula, &names, &train_raw) {
        Ok(p) => baselines::r2(&p, &net_train).unwrap_or(f64::NAN),
        Err(_) => defined_r2(&sym.formula, &names, &train_raw, &net_train).0,
    };
    let (formula_train_r2, _) = defined_r2(&sym.formula, &names, &train_raw, &train_raw.y);
    let (formula_test_r2, undefined_test_points) =
        defined_r2(&sym.formula, &names, &test_raw, &test_raw.y);

    let c = data.train.centroid();
    let centroid: BTreeMap<String, f64> = feature_names().into_iter().zip(c).collect();
    let slope_aoa_at_centroid = sym
        .formula
        .variables()
        .iter()
        .any(|v| v == "aoa")
        .then(|| differentiate(&sym.formula, "aoa").eval(&centroid).ok())
        .flatten();

    let summary = SymbolifySummary {
        min_edge_r2: sym.min_edge_r2(),
        edges: sym.edges.clone(),
        formula_vs_net_r2,
        formula_train_r2,
        formula_test_r2,
        net_test_r2: baselines::r2(&net_test, &test_raw.y).unwrap_or(f64::NAN),
        undefined_test_points,
        raw_units: net.scaler.is_some(),
        skeleton: outer_skeleton(&sym.formula)
            .map(|(outer, inner_terms)| Skeleton { outer, inner_terms }),
        centroid,
        slope_aoa_at_centroid,
    };
    let p = cfg.symbolic.precision;
    ensure_dir(out)?;
    std::fs::write(
        out.join("formula.txt"),
        format!("cl = {}\n", sym.formula.render(p)),
    )?;
    std::fs::write(
        out.join("formula.tex"),
        format!("C_L = {}\n", sym.formula.render_latex(p)),
    )?;
    std::fs::write(out.join("formula.json"), sym.formula.to_json() + "\n")?;
    write_json(&out.join("symbolify.json"), &summary)?;
    cfg.write(out)?;
    println!("cl = {}", sym.formula.render(p));
    println!(
        "formula test r2 {:.4} (network {:.4}); formula vs network r2 {:.4}; weakest edge fit r2 {:.4}",
        summary.formula_test_r2, summary.net_test_r2, summary.formula_vs_net_r2, summary.min_edge_r2
    );
    Ok(summary)
}

// ------------------------------------------------------------------ formula

fn load_formula(path: &Path) -> Result<FormulaNode> {
    FormulaNode::from_json(&read_text(path)?)
        .with_context(|| format!("invalid formula {}", path.display()))
}

fn cmd_formula(cmd: FormulaCommand) -> Result<()> {
    match cmd {
        FormulaCommand::Eval { file, at } => {
            let f = load_formula(&file)?;
            let point: BTreeMap<String, f64> = serde_json::from_str(&at)
                .map_err(|e| usage(format!("--at must be a JSON object of numbers: {e}")))?;
            println!("{}", f.eval(&point).map_err(|e| anyhow!(e))?);
        }
        FormulaCommand::Render {
            file,
            precision,
            latex,
        } => {
            let f = load_formula(&file)?;
            println!(
                "{}",
                if latex {
                    f.render_latex(precision)
                } else {
                    f.render(precision)
                }
            );
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- report

fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let files: Vec<MetricsFile> = cfg
        .metrics
        .iter()
        .map(|p| {
            serde_json::from_str(&read_text(p)?)
                .with_context(|| format!("invalid metrics {}", p.display()))
        })
        .collect::<Result<_>>()?;
    let report = build_report(&files);
    let md = report.to_markdown();
    print!("{md}");
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(out) = &cfg.out {
        ensure_dir(out)?;
        std::fs::write(out.join("report.md"), &md)?;
        write_json(&out.join("report.json"), &report)?;
        cfg.write(out)?;
    }
    Ok(())
}
