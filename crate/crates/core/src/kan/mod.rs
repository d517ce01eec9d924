//! Kolmogorov–Arnold network: every edge carries
//! `phi(x) = w_base * silu(x) + w_spline * spline(x)` and every node sums its
//! active incoming edges.
//!
//! Parameters are exposed as one flat vector (layer by layer, edges in
//! row-major `(input, output)` order, each edge as `coeffs.., w_base,
//! w_spline`) so the optimizers in [`crate::optim`] stay model-agnostic.

mod grid;
mod model_file;
mod train;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::metrics::{self, MetricsReport};
use crate::dataio::{FeatureScaler, Xy};
use crate::rng;
use crate::spline::{KnotGrid, SplineCoeffs, SplineError};

pub use model_file::{ModelFile, KAN_SCHEMA_VERSION};
pub use train::{train, HistoryEntry, OptimizerKind, TrainBatch, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum KanError {
    #[error("InvalidWidth: {0}")]
    InvalidWidth(String),
    #[error("DimensionMismatch: expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("DivergenceDetected at step {step}: loss is not finite")]
    DivergenceDetected {
        step: usize,
        last_good: Box<KanNetwork>,
    },
    #[error("metrics: {0}")]
    Metrics(#[from] metrics::MetricsError),
    #[error("spline: {0}")]
    Spline(#[from] SplineError),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub grid: KnotGrid,
    pub coeffs: SplineCoeffs,
    pub w_base: f64,
    pub w_spline: f64,
    pub active: bool,
}

impl Edge {
    pub fn param_count(&self) -> usize {
        self.coeffs.0.len() + 2
    }

    /// The activation, ignoring the mask.
    pub fn activation(&self, x: f64) -> f64 {
        self.w_base * silu(x)
            + self.w_spline * crate::spline::eval_spline(&self.grid, &self.coeffs, x)
    }

    /// Contribution to the target node: 0 when masked.
    pub fn eval(&self, x: f64) -> f64 {
        if self.active {
            self.activation(x)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major: edge `(i, j)` at `i * out_dim + j`.
    pub edges: Vec<Edge>,
}

impl KanLayer {
    pub fn edge(&self, i: usize, j: usize) -> &Edge {
        &self.edges[i * self.out_dim + j]
    }

    pub fn edge_mut(&mut self, i: usize, j: usize) -> &mut Edge {
        &mut self.edges[i * self.out_dim + j]
    }

    pub fn forward(&self, input: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &x) in input.iter().enumerate() {
            for j in 0..self.out_dim {
                out[j] += self.edge(i, j).eval(x);
            }
        }
    }
}

/// Address of one edge: layer, source node, target node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeAddr {
    pub layer: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork {
    pub width: Vec<usize>,
    pub layers: Vec<KanLayer>,
    pub seed: u64,
    /// Names of the input features, in order.
    pub inputs: Vec<String>,
    /// Maps raw features onto the grid domain; `None` when inputs arrive pre-scaled.
    pub scaler: Option<FeatureScaler>,
}

/// Per-edge inputs and outputs recorded by [`KanNetwork::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// `layer_inputs[l]` has `width[l]` entries; the last entry holds the output.
    pub layer_inputs: Vec<Vec<f64>>,
    /// `activations[l][i * out + j]`, zero for masked edges.
    pub activations: Vec<Vec<f64>>,
}

/// Sparsity terms added to the mean-squared error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Regularization {
    pub lambda_l1: f64,
    pub lambda_entropy: f64,
}

impl Regularization {
    pub fn is_off(&self) -> bool {
        self.lambda_l1 == 0.0 && self.lambda_entropy == 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub mse: f64,
    pub l1: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: LossBreakdown,
    pub grad: Vec<f64>,
    /// Edge evaluations whose input fell outside the grid domain.
    pub clamped: u64,
}

const CHUNK: usize = 256;

impl KanNetwork {
    pub fn init(width: &[usize], g: usize, k: usize, seed: u64) -> Result<Self, KanError> {
        if width.len() < 2 || width.contains(&0) {
            return Err(KanError::InvalidWidth(format!("{width:?}")));
        }
        let grid = KnotGrid::new(g, k, -1.0, 1.0)?;
        let sigma = 0.1 / ((g + k) as f64).sqrt();
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let mut rng = rng::seeded(seed);
        let layers = width
            .windows(2)
            .map(|w| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let edges = (0..in_dim * out_dim)
                    .map(|_| Edge {
                        grid,
                        coeffs: SplineCoeffs(
                            (0..grid.basis_count())
                                .map(|_| normal.sample(&mut rng))
                                .collect(),
                        ),
                        w_base: 1.0,
                        w_spline: 1.0,
                        active: true,
                    })
                    .collect();
                KanLayer {
                    in_dim,
                    out_dim,
                    edges,
                }
            })
            .collect();
        Ok(KanNetwork {
            width: width.to_vec(),
            layers,
            seed,
            inputs: (1..=width[0]).map(|i| format!("x{i}")).collect(),
            scaler: None,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.width[0]
    }

    pub fn node_count(&self) -> usize {
        self.width.iter().sum()
    }

    pub fn edge_count(&self) -> usize {
        self.layers.iter().map(|l| l.edges.len()).sum()
    }

    pub fn active_edge_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.edges.iter().filter(|e| e.active).count())
            .sum()
    }

    pub fn spline_coeff_count(&self) -> usize {
        self.edges().map(|(_, e)| e.coeffs.0.len()).sum()
    }

    pub fn edge(&self, addr: EdgeAddr) -> &Edge {
        self.layers[addr.layer].edge(addr.from, addr.to)
    }

    pub fn edge_mut(&mut self, addr: EdgeAddr) -> &mut Edge {
        self.layers[addr.layer].edge_mut(addr.from, addr.to)
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeAddr, &Edge)> {
        self.layers.iter().enumerate().flat_map(|(l, layer)| {
            layer.edges.iter().enumerate().map(move |(e, edge)| {
                (
                    EdgeAddr {
                        layer: l,
                        from: e / layer.out_dim,
                        to: e % layer.out_dim,
                    },
                    edge,
                )
            })
        })
    }

    fn check_dim(&self, got: usize) -> Result<(), KanError> {
        if got != self.n_inputs() {
            return Err(KanError::DimensionMismatch {
                expected: self.n_inputs(),
                got,
            });
        }
        Ok(())
    }

    /// Output for one (already scaled) input row.
    pub fn eval(&self, x: &[f64]) -> Result<f64, KanError> {
        self.check_dim(x.len())?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = vec![0.0; layer.out_dim];
            layer.forward(&cur, &mut next);
            cur = next;
        }
        Ok(cur[0])
    }

    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache), KanError> {
        self.check_dim(x.len())?;
        let mut layer_inputs = vec![x.to_vec()];
        let mut activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = layer_inputs.last().expect("non-empty");
            let mut acts = vec![0.0; layer.edges.len()];
            let mut next = vec![0.0; layer.out_dim];
            for (i, &xi) in input.iter().enumerate() {
                for j in 0..layer.out_dim {
                    let a = layer.edge(i, j).eval(xi);
                    acts[i * layer.out_dim + j] = a;
                    next[j] += a;
                }
            }
            activations.push(acts);
            layer_inputs.push(next);
        }
        let y = layer_inputs.last().expect("non-empty")[0];
        Ok((
            y,
            ForwardCache {
                layer_inputs,
                activations,
            },
        ))
    }

    /// Predictions for pre-scaled inputs.
    pub fn predict(&self, data: &Xy) -> Result<Vec<f64>, KanError> {
        self.check_dim(data.n_features)?;
        Ok((0..data.len())
            .into_par_iter()
            .map(|i| self.eval(data.row(i)).expect("checked width"))
            .collect())
    }

    /// Predictions for raw inputs, scaled through the stored scaler if any.
    pub fn predict_raw(&self, data: &Xy) -> Result<Vec<f64>, KanError> {
        match &self.scaler {
            Some(s) => self.predict(&s.apply_xy(data)),
            None => self.predict(data),
        }
    }

    /// MSE and R² against `data.y` (pre-scaled inputs).
    pub fn evaluate(&self, data: &Xy) -> Result<MetricsReport, KanError> {
        let pred = self.predict(data)?;
        Ok(MetricsReport::compute(&pred, &data.y)?)
    }

    pub fn param_count(&self) -> usize {
        self.edges().map(|(_, e)| e.param_count()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for (_, e) in self.edges() {
            p.extend_from_slice(&e.coeffs.0);
            p.push(e.w_base);
            p.push(e.w_spline);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter vector length");
        let mut off = 0;
        for layer in &mut self.layers {
            for e in &mut layer.edges {
                let n = e.coeffs.0.len();
                e.coeffs.0.copy_from_slice(&p[off..off + n]);
                e.w_base = p[off + n];
                e.w_spline = p[off + n + 1];
                off += n + 2;
            }
        }
    }

    /// Offset of each edge's parameter block in the flat vector.
    pub fn param_offsets(&self) -> Vec<Vec<usize>> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|layer| {
                layer
                    .edges
                    .iter()
                    .map(|e| {
                        let o = off;
                        off += e.param_count();
                        o
                    })
                    .collect()
            })
            .collect()
    }

    /// `mean |phi|` per edge over the batch (0 for masked edges).
    pub fn mean_abs_activations(&self, data: &Xy) -> Result<Vec<Vec<f64>>, KanError> {
        self.check_dim(data.n_features)?;
        if data.is_empty() {
            return Err(KanError::EmptyBatch);
        }
        let n_chunks = data.len().div_ceil(CHUNK);
        let partials: Vec<Vec<Vec<f64>>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc: Vec<Vec<f64>> = self
                    .layers
                    .iter()
                    .map(|l| vec![0.0; l.edges.len()])
                    .collect();
                for n in c * CHUNK..((c + 1) * CHUNK).min(data.len()) {
                    let (_, cache) = self.forward(data.row(n)).expect("checked width");
                    for (a, acts) in acc.iter_mut().zip(&cache.activations) {
                        for (s, v) in a.iter_mut().zip(acts) {
                            *s += v.abs();
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = tree_reduce(partials, |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
            }
        });
        let inv = 1.0 / data.len() as f64;
        total.iter_mut().flatten().for_each(|v| *v *= inv);
        Ok(total)
    }

    /// Regularized mean-squared error over the batch.
    pub fn loss(&self, data: &Xy, reg: &Regularization) -> Result<LossBreakdown, KanError> {
        let pred = self.predict(data)?;
        if pred.is_empty() {
            return Err(KanError::EmptyBatch);
        }
        let mse = pairwise_sum(
            &pred
                .iter()
                .zip(&data.y)
                .map(|(p, t)| (p - t) * (p - t))
                .collect::<Vec<_>>(),
        ) / pred.len() as f64;
        let mut out = LossBreakdown {
            mse,
            ..Default::default()
        };
        if !reg.is_off() {
            let means = self.mean_abs_activations(data)?;
            let (l1, ent, _) = self.regularizer_terms(&means);
            out.l1 = l1;
            out.entropy = ent;
        }
        out.total = out.mse + reg.lambda_l1 * out.l1 + reg.lambda_entropy * out.entropy;
        Ok(out)
    }

    /// Returns `(sum of mean|phi|, sum of per-layer entropies, dH/dA per edge)`.
    fn regularizer_terms(&self, means: &[Vec<f64>]) -> (f64, f64, Vec<Vec<f64>>) {
        let mut l1 = 0.0;
        let mut ent = 0.0;
        let mut dh = Vec::with_capacity(means.len());
        for (layer, a) in self.layers.iter().zip(means) {
            let s: f64 = a
                .iter()
                .zip(&layer.edges)
                .filter(|(_, e)| e.active)
                .map(|(v, _)| *v)
                .sum();
            l1 += s;
            let mut h = 0.0;
            if s > 0.0 {
                for (v, e) in a.iter().zip(&layer.edges) {
                    if e.active && *v > 0.0 {
                        let p = v / s;
                        h -= p * p.ln();
                    }
                }
            }
            ent += h;
            dh.push(
                a.iter()
                    .zip(&layer.edges)
                    .map(|(v, e)| {
                        if e.active && *v > 0.0 && s > 0.0 {
                            -((v / s).ln() + h) / s
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
        }
        (l1, ent, dh)
    }

    /// Loss and its gradient with respect to every parameter.
    ///
    /// Samples are processed in fixed chunks reduced pairwise in chunk order,
    /// so the result does not depend on the thread count.
    pub fn gradients(&self, data: &Xy, reg: &Regularization) -> Result<Gradient, KanError> {
        self.check_dim(data.n_features)?;
        if data.is_empty() {
            return Err(KanError::EmptyBatch);
        }
        let n = data.len();
        let inv_n = 1.0 / n as f64;

        let mut loss = LossBreakdown::default();
        let seeds: Option<Vec<Vec<f64>>> = if reg.is_off() {
            None
        } else {
            let means = self.mean_abs_activations(data)?;
            let (l1, ent, dh) = self.regularizer_terms(&means);
            loss.l1 = l1;
            loss.entropy = ent;
            Some(
                dh.into_iter()
                    .map(|row| {
                        row.into_iter()
                            .map(|d| (reg.lambda_l1 + reg.lambda_entropy * d) * inv_n)
                            .collect()
                    })
                    .collect(),
            )
        };

        let offsets = self.param_offsets();
        let n_params = self.param_count();
        let n_chunks = n.div_ceil(CHUNK);
        let partials: Vec<(f64, u64, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut ws = Workspace::new(self);
                let mut grad = vec![0.0; n_params];
                let mut sq = 0.0;
                let mut clamped = 0u64;
                for s in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let (err2, cl) = self.backprop_sample(
                        data.row(s),
                        data.y[s],
                        inv_n,
                        seeds.as_deref(),
                        &offsets,
                        &mut grad,
                        &mut ws,
                    );
                    sq += err2;
                    clamped += cl;
                }
                (sq, clamped, grad)
            })
            .collect();
        let (sq, clamped, grad) = tree_reduce(partials, |a, b| {
            a.0 += b.0;
            a.1 += b.1;
            for (x, y) in a.2.iter_mut().zip(b.2) {
                *x += y;
            }
        });
        loss.mse = sq * inv_n;
        loss.total = loss.mse + reg.lambda_l1 * loss.l1 + reg.lambda_entropy * loss.entropy;
        Ok(Gradient {
            loss,
            grad,
            clamped,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn backprop_sample(
        &self,
        x: &[f64],
        target: f64,
        inv_n: f64,
        seeds: Option<&[Vec<f64>]>,
        offsets: &[Vec<usize>],
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> (f64, u64) {
        let mut clamped = 0u64;
        ws.nodes[0].copy_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let (lower, upper) = ws.nodes.split_at_mut(l + 1);
            let input = &lower[l];
            let out = &mut upper[0];
            out.iter_mut().for_each(|v| *v = 0.0);
            let recs = &mut ws.edges[l];
            for (e, edge) in layer.edges.iter().enumerate() {
                let rec = &mut recs[e];
                if !edge.active {
                    rec.phi = 0.0;
                    continue;
                }
                let xi = input[e / layer.out_dim];
                let k = edge.grid.k;
                rec.start = edge.grid.eval_local(
                    xi,
                    &mut rec.basis[..=k],
                    Some(&mut rec.dbasis[..=k]),
                    &mut ws.scratch,
                );
                if edge.grid.clamp(xi).1 {
                    clamped += 1;
                }
                let c = &edge.coeffs.0[rec.start..rec.start + k + 1];
                rec.spline = rec.basis[..=k].iter().zip(c).map(|(b, c)| b * c).sum();
                rec.dspline = rec.dbasis[..=k].iter().zip(c).map(|(b, c)| b * c).sum();
                let ex = (-xi).exp();
                let sig = 1.0 / (1.0 + ex);
                rec.silu = xi / (1.0 + ex);
                rec.dsilu = sig * (1.0 + xi * (1.0 - sig));
                rec.phi = edge.w_base * rec.silu + edge.w_spline * rec.spline;
                out[e % layer.out_dim] += rec.phi;
            }
        }
        let y = ws.nodes[self.layers.len()][0];
        let resid = y - target;

        // backward
        let last = self.layers.len();
        ws.delta[last].iter_mut().for_each(|d| *d = 0.0);
        ws.delta[last][0] = 2.0 * resid * inv_n;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let (dl, du) = ws.delta.split_at_mut(l + 1);
            let din = &mut dl[l];
            let dout = &du[0];
            din.iter_mut().for_each(|d| *d = 0.0);
            for (e, edge) in layer.edges.iter().enumerate() {
                if !edge.active {
                    continue;
                }
                let rec = &ws.edges[l][e];
                let mut up = dout[e % layer.out_dim];
                if let Some(s) = seeds {
                    up += s[l][e] * sign(rec.phi);
                }
                if up == 0.0 {
                    continue;
                }
                let off = offsets[l][e];
                let k = edge.grid.k;
                let nb = edge.coeffs.0.len();
                let ws_up = up * edge.w_spline;
                for (r, b) in rec.basis[..=k].iter().enumerate() {
                    grad[off + rec.start + r] += ws_up * b;
                }
                grad[off + nb] += up * rec.silu;
                grad[off + nb + 1] += up * rec.spline;
                if l > 0 {
                    din[e / layer.out_dim] +=
                        up * (edge.w_base * rec.dsilu + edge.w_spline * rec.dspline);
                }
            }
        }
        (resid * resid, clamped)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Default)]
struct EdgeRec {
    start: usize,
    basis: Vec<f64>,
    dbasis: Vec<f64>,
    silu: f64,
    dsilu: f64,
    spline: f64,
    dspline: f64,
    phi: f64,
}

struct Workspace {
    nodes: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    edges: Vec<Vec<EdgeRec>>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(net: &KanNetwork) -> Self {
        let kmax = net.edges().map(|(_, e)| e.grid.k).max().unwrap_or(1);
        Workspace {
            nodes: net.width.iter().map(|&w| vec![0.0; w]).collect(),
            delta: net.width.iter().map(|&w| vec![0.0; w]).collect(),
            edges: net
                .layers
                .iter()
                .map(|l| {
                    vec![
                        EdgeRec {
                            basis: vec![0.0; kmax + 1],
                            dbasis: vec![0.0; kmax + 1],
                            ..Default::default()
                        };
                        l.edges.len()
                    ]
                })
                .collect(),
            scratch: vec![0.0; kmax],
        }
    }
}

/// Pairwise reduction in index order.
pub(crate) fn tree_reduce<T>(mut items: Vec<T>, mut combine: impl FnMut(&mut T, T)) -> T {
    assert!(!items.is_empty(), "nothing to reduce");
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                combine(&mut a, b);
            }
            next.push(a);
        }
        items = next;
    }
    items.pop().expect("one item left")
}

pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge(alpha: f64) -> KanNetwork {
        let mut net = KanNetwork::init(&[1, 1], 4, 2, 0).unwrap();
        let e = &mut net.layers[0].edges[0];
        e.w_base = 0.0;
        e.w_spline = 1.0;
        e.coeffs.0.iter_mut().for_each(|c| *c = alpha);
        net
    }

    #[test]
    fn init_counts() {
        let net = KanNetwork::init(&[9, 9, 1], 6, 2, 2024).unwrap();
        assert_eq!(net.node_count(), 19);
        assert_eq!(net.edge_count(), 90);
        assert_eq!(net.spline_coeff_count(), 720);
        assert_eq!(net.active_edge_count(), 90);
        assert!(net
            .edges()
            .all(|(_, e)| e.w_base == 1.0 && e.w_spline == 1.0));

        let tiny = KanNetwork::init(&[1, 1], 6, 2, 1).unwrap();
        assert_eq!((tiny.node_count(), tiny.edge_count()), (2, 1));
    }

    #[test]
    fn init_is_deterministic() {
        let a = KanNetwork::init(&[9, 9, 1], 6, 2, 2024).unwrap();
        let b = KanNetwork::init(&[9, 9, 1], 6, 2, 2024).unwrap();
        let c = KanNetwork::init(&[9, 9, 1], 6, 2, 2025).unwrap();
        let bits = |n: &KanNetwork| n.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn invalid_width() {
        assert!(matches!(
            KanNetwork::init(&[3], 6, 2, 0),
            Err(KanError::InvalidWidth(_))
        ));
        assert!(matches!(
            KanNetwork::init(&[3, 0, 1], 6, 2, 0),
            Err(KanError::InvalidWidth(_))
        ));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = KanNetwork::init(&[3, 4, 1], 5, 2, 9).unwrap();
        for l in &mut net.layers {
            for e in &mut l.edges {
                e.w_base = 0.0;
                e.coeffs.0.iter_mut().for_each(|c| *c = 0.0);
            }
        }
        assert_eq!(net.eval(&[0.3, -0.7, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn constant_spline_edge() {
        let net = single_edge(0.42);
        for x in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            assert!((net.eval(&[x]).unwrap() - 0.42).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = KanNetwork::init(&[2, 1], 3, 1, 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(KanError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn forward_cache_consistent() {
        let net = KanNetwork::init(&[2, 3, 1], 4, 2, 5).unwrap();
        let (y, cache) = net.forward(&[0.2, -0.4]).unwrap();
        assert_eq!(cache.layer_inputs.len(), 3);
        let sum_last: f64 = cache.activations[1].iter().sum();
        assert!((sum_last - y).abs() < 1e-15);
        assert_eq!(net.eval(&[0.2, -0.4]).unwrap(), y);
    }

    #[test]
    fn masking_removes_exactly_the_edge_activation() {
        let mut net = KanNetwork::init(&[2, 3, 1], 4, 2, 5).unwrap();
        let x = [0.3, -0.1];
        let (y, cache) = net.forward(&x).unwrap();
        net.layers[1].edge_mut(1, 0).active = false;
        let y2 = net.eval(&x).unwrap();
        assert!((y - y2 - cache.activations[1][1]).abs() < 1e-15);
    }

    #[test]
    fn loss_hand_values() {
        let zero = {
            let mut n = single_edge(0.0);
            n.layers[0].edges[0].w_base = 0.0;
            n
        };
        let data = Xy::from_rows(&[vec![0.1], vec![0.5]], vec![1.0, -1.0]);
        let l = zero.loss(&data, &Regularization::default()).unwrap();
        assert_eq!(l.total, 1.0);

        let c = single_edge(0.3);
        let data = Xy::from_rows(&[vec![0.1], vec![-0.5]], vec![0.3, 0.3]);
        let reg = Regularization {
            lambda_l1: 1.0,
            lambda_entropy: 2.0,
        };
        let l = c.loss(&data, &reg).unwrap();
        assert!(l.mse < 1e-30);
        assert!((l.total - 0.3).abs() < 1e-12);
        assert_eq!(l.entropy, 0.0);
    }

    #[test]
    fn zero_residual_has_zero_gradient() {
        let net = KanNetwork::init(&[2, 3, 1], 4, 2, 11).unwrap();
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()])
            .collect();
        let y = rows.iter().map(|r| net.eval(r).unwrap()).collect();
        let data = Xy::from_rows(&rows, y);
        let g = net.gradients(&data, &Regularization::default()).unwrap();
        assert!(g.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_edges_get_no_gradient() {
        let mut net = KanNetwork::init(&[2, 3, 1], 4, 2, 3).unwrap();
        net.layers[0].edge_mut(1, 2).active = false;
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1 - 0.5, 0.3]).collect();
        let data = Xy::from_rows(&rows, vec![1.0; 10]);
        let reg = Regularization {
            lambda_l1: 0.1,
            lambda_entropy: 0.1,
        };
        let g = net.gradients(&data, &reg).unwrap();
        let off = net.param_offsets()[0][3 + 2];
        let n = net.layers[0].edge(1, 2).param_count();
        assert!(g.grad[off..off + n].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn params_round_trip() {
        let mut net = KanNetwork::init(&[2, 2, 1], 3, 2, 1).unwrap();
        let mut p = net.params();
        p.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64);
        net.set_params(&p);
        assert_eq!(net.params(), p);
        assert_eq!(net.layers[0].edges[0].w_base, 5.0);
    }

    #[test]
    fn tree_reduce_order() {
        let v: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        assert_eq!(tree_reduce(v, |a, b| a.push_str(&b)), "01234");
    }
}
