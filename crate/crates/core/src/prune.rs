//! Importance scores for edges and nodes, percentile pruning and
//! input-feature importance.
//!
//! Edge score: mean `|phi|` over a scoring set. Node score: an input node
//! takes the max over its outgoing edges, a hidden node takes
//! `min(max incoming, max outgoing)`, and the output node is never pruned
//! (scored `+inf`).

use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataio::Xy;
use crate::kan::{EdgeAddr, KanError, KanNetwork};

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("EmptyModel: pruning at percentile {0} removes every input-to-output path")]
    EmptyModel(f64),
    #[error("percentile must lie in [0, 100], got {0}")]
    InvalidPercentile(f64),
    #[error("importance report does not match the network layout")]
    ReportMismatch,
    #[error(transparent)]
    Kan(#[from] KanError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// `edge_scores[l][i * out + j]`.
    pub edge_scores: Vec<Vec<f64>>,
    /// One vector per layer of nodes, inputs first; the output layer is `+inf`
    /// (written as `null` in JSON).
    #[serde(serialize_with = "ser_scores", deserialize_with = "de_scores")]
    pub node_scores: Vec<Vec<f64>>,
    pub scoring_n: usize,
    /// Free-form label of the scoring set, e.g. "train".
    #[serde(default)]
    pub scoring_set: String,
}

fn ser_scores<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    let mapped: Vec<Vec<Option<f64>>> = v
        .iter()
        .map(|l| l.iter().map(|x| x.is_finite().then_some(*x)).collect())
        .collect();
    mapped.serialize(s)
}

fn de_scores<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    let raw: Vec<Vec<Option<f64>>> = Deserialize::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|l| l.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
        .collect())
}

impl ImportanceReport {
    pub fn edge_score(&self, a: EdgeAddr, out_dim: usize) -> f64 {
        self.edge_scores[a.layer][a.from * out_dim + a.to]
    }

    fn matches(&self, net: &KanNetwork) -> bool {
        self.edge_scores.len() == net.layers.len()
            && self
                .edge_scores
                .iter()
                .zip(&net.layers)
                .all(|(s, l)| s.len() == l.edges.len())
            && self.node_scores.len() == net.width.len()
            && self
                .node_scores
                .iter()
                .zip(&net.width)
                .all(|(s, w)| s.len() == *w)
    }
}

/// Scores every edge and node of `net` on `data` (already scaled inputs).
pub fn score(net: &KanNetwork, data: &Xy) -> Result<ImportanceReport, KanError> {
    let edge_scores = net.mean_abs_activations(data)?;
    let node_scores = node_scores_from_edges(net, &edge_scores);
    Ok(ImportanceReport {
        edge_scores,
        node_scores,
        scoring_n: data.len(),
        scoring_set: String::new(),
    })
}

fn node_scores_from_edges(net: &KanNetwork, edge_scores: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_layers = net.layers.len();
    let max_out = |l: usize, i: usize| {
        let out = net.layers[l].out_dim;
        (0..out)
            .map(|j| edge_scores[l][i * out + j])
            .fold(0.0, f64::max)
    };
    let max_in = |l: usize, j: usize| {
        let (inp, out) = (net.layers[l].in_dim, net.layers[l].out_dim);
        (0..inp)
            .map(|i| edge_scores[l][i * out + j])
            .fold(0.0, f64::max)
    };
    (0..=n_layers)
        .map(|l| {
            (0..net.width[l])
                .map(|i| match l {
                    0 => max_out(0, i),
                    l if l == n_layers => f64::INFINITY,
                    l => max_in(l - 1, i).min(max_out(l, i)),
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub edge: f64,
    pub node: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub net: KanNetwork,
    pub thresholds: Thresholds,
    pub surviving_nodes: usize,
    pub surviving_edges: usize,
    pub percentile: f64,
    /// Edges that were active before pruning and are masked afterwards.
    pub removed: Vec<EdgeAddr>,
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the
/// sample at or below it. `p = 0` gives `-inf`, so nothing lies at or below.
pub fn nearest_rank(values: &[f64], p: f64) -> f64 {
    if p <= 0.0 || values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// Masks edges and hidden nodes at or below the pooled percentile
/// thresholds, then removes hidden nodes left without an active incoming or
/// outgoing edge. Surviving parameters are left untouched.
pub fn prune(
    net: &KanNetwork,
    report: &ImportanceReport,
    percentile: f64,
) -> Result<PruneResult, PruneError> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(PruneError::InvalidPercentile(percentile));
    }
    if !report.matches(net) {
        return Err(PruneError::ReportMismatch);
    }
    let n_layers = net.layers.len();
    let pooled_edges: Vec<f64> = report.edge_scores.iter().flatten().copied().collect();
    let pooled_nodes: Vec<f64> = report.node_scores[..n_layers]
        .iter()
        .flatten()
        .copied()
        .collect();
    let thresholds = Thresholds {
        edge: nearest_rank(&pooled_edges, percentile),
        node: nearest_rank(&pooled_nodes, percentile),
    };

    let mut out = net.clone();
    if percentile > 0.0 {
        for (l, layer) in out.layers.iter_mut().enumerate() {
            for (e, edge) in layer.edges.iter_mut().enumerate() {
                if report.edge_scores[l][e] <= thresholds.edge {
                    edge.active = false;
                }
            }
        }
        for l in 1..n_layers {
            for h in 0..net.width[l] {
                if report.node_scores[l][h] <= thresholds.node {
                    deactivate_node(&mut out, l, h);
                }
            }
        }
        remove_orphans(&mut out);
    }

    let out_layer = &out.layers[n_layers - 1];
    if !out_layer.edges.iter().any(|e| e.active) {
        return Err(PruneError::EmptyModel(percentile));
    }
    let removed = net
        .edges()
        .filter(|(a, e)| e.active && !out.edge(*a).active)
        .map(|(a, _)| a)
        .collect();
    Ok(PruneResult {
        surviving_nodes: surviving_nodes(&out),
        surviving_edges: out.active_edge_count(),
        net: out,
        thresholds,
        percentile,
        removed,
    })
}

fn deactivate_node(net: &mut KanNetwork, l: usize, h: usize) {
    let incoming = &mut net.layers[l - 1];
    for i in 0..incoming.in_dim {
        incoming.edge_mut(i, h).active = false;
    }
    let outgoing = &mut net.layers[l];
    for j in 0..outgoing.out_dim {
        outgoing.edge_mut(h, j).active = false;
    }
}

fn has_active_in(net: &KanNetwork, l: usize, h: usize) -> bool {
    let layer = &net.layers[l - 1];
    (0..layer.in_dim).any(|i| layer.edge(i, h).active)
}

fn has_active_out(net: &KanNetwork, l: usize, h: usize) -> bool {
    let layer = &net.layers[l];
    (0..layer.out_dim).any(|j| layer.edge(h, j).active)
}

fn remove_orphans(net: &mut KanNetwork) {
    let n_layers = net.layers.len();
    loop {
        let mut changed = false;
        for l in 1..n_layers {
            for h in 0..net.width[l] {
                let (a_in, a_out) = (has_active_in(net, l, h), has_active_out(net, l, h));
                if (a_in || a_out) && !(a_in && a_out) {
                    deactivate_node(net, l, h);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Nodes with at least one active incident edge, plus the output node.
pub fn surviving_nodes(net: &KanNetwork) -> usize {
    let n_layers = net.layers.len();
    let mut count = net.width[n_layers];
    for l in 0..n_layers {
        for i in 0..net.width[l] {
            let alive = has_active_out(net, l, i) || (l > 0 && has_active_in(net, l, i));
            count += alive as usize;
        }
    }
    count
}

/// Sum of each input's layer-0 edge scores, normalized to 1. All zeros when
/// every layer-0 edge scores zero.
pub fn feature_importance(report: &ImportanceReport) -> Vec<f64> {
    let n_in = report.node_scores[0].len();
    let scores = &report.edge_scores[0];
    let out = scores.len() / n_in.max(1);
    let raw: Vec<f64> = (0..n_in)
        .map(|i| scores[i * out..(i + 1) * out].iter().sum())
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        raw
    }
}

/// Graphviz rendering of the active topology; pen width grows with edge score.
pub fn to_dot(net: &KanNetwork, report: &ImportanceReport) -> String {
    let n_layers = net.layers.len();
    let max = report
        .edge_scores
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut s = String::from("digraph kan {\n  rankdir=BT;\n  node [shape=circle, fontsize=10];\n");
    for l in 0..=n_layers {
        for i in 0..net.width[l] {
            let alive =
                l == n_layers || has_active_out(net, l, i) || (l > 0 && has_active_in(net, l, i));
            if !alive {
                continue;
            }
            let label = match l {
                0 => net.inputs[i].clone(),
                l if l == n_layers => "out".to_string(),
                _ => String::new(),
            };
            let _ = writeln!(s, "  n{l}_{i} [label=\"{label}\"];");
        }
    }
    for (a, e) in net.edges() {
        if !e.active {
            continue;
        }
        let sc = report.edge_score(a, net.layers[a.layer].out_dim);
        let _ = writeln!(
            s,
            "  n{}_{} -> n{}_{} [penwidth={:.3}, tooltip=\"{:.4}\"];",
            a.layer,
            a.from,
            a.layer + 1,
            a.to,
            0.3 + 4.0 * sc / max,
            sc
        );
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_xy(n: usize, dim: usize, seed: u64) -> Xy {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Xy::from_rows(&rows, vec![0.0; n])
    }

    #[test]
    fn constant_activation_scores_its_value() {
        let mut net = KanNetwork::init(&[1, 1], 5, 2, 0).unwrap();
        let e = &mut net.layers[0].edges[0];
        e.w_base = 0.0;
        e.coeffs.0.iter_mut().for_each(|c| *c = 2.0);
        let r = score(&net, &sample_xy(30, 1, 4)).unwrap();
        assert!((r.edge_scores[0][0] - 2.0).abs() < 1e-12);
        assert!(r.node_scores[1][0].is_infinite());
    }

    #[test]
    fn masked_edge_scores_zero() {
        let mut net = KanNetwork::init(&[2, 2, 1], 4, 2, 3).unwrap();
        net.layers[0].edges[1].active = false;
        let r = score(&net, &sample_xy(20, 2, 1)).unwrap();
        assert_eq!(r.edge_scores[0][1], 0.0);
    }

    #[test]
    fn scores_match_brute_force() {
        let net = KanNetwork::init(&[2, 2, 1], 5, 2, 11).unwrap();
        let data = sample_xy(50, 2, 12);
        let r = score(&net, &data).unwrap();
        for (a, e) in net.edges() {
            let mut acc = 0.0;
            for n in 0..data.len() {
                let x = data.row(n);
                let input = if a.layer == 0 {
                    x[a.from]
                } else {
                    (0..2)
                        .map(|i| net.layers[0].edge(i, a.from).eval(x[i]))
                        .sum()
                };
                acc += e.eval(input).abs();
            }
            let want = acc / data.len() as f64;
            let got = r.edge_score(a, net.layers[a.layer].out_dim);
            assert!((got - want).abs() < 1e-12, "{a:?}: {got} vs {want}");
        }
        let e = &r.edge_scores;
        for h in 0..2 {
            let want = e[0][h].max(e[0][2 + h]).min(e[1][h]);
            assert_eq!(r.node_scores[1][h], want);
        }
        assert_eq!(r.node_scores[0][0], e[0][0].max(e[0][1]));
    }

    #[test]
    fn report_json_round_trip() {
        let net = KanNetwork::init(&[2, 2, 1], 4, 2, 5).unwrap();
        let r = score(&net, &sample_xy(10, 2, 2)).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("null"));
        let back: ImportanceReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn percentile_zero_keeps_everything() {
        let net = KanNetwork::init(&[9, 9, 1], 6, 2, 2024).unwrap();
        let r = score(&net, &sample_xy(40, 9, 0)).unwrap();
        let p = prune(&net, &r, 0.0).unwrap();
        assert_eq!(p.surviving_nodes, 19);
        assert_eq!(p.surviving_edges, 90);
        assert_eq!(p.net, net);
        assert!(p.removed.is_empty());
    }

    #[test]
    fn percentile_hundred_is_empty_model() {
        let net = KanNetwork::init(&[3, 2, 1], 4, 2, 1).unwrap();
        let r = score(&net, &sample_xy(20, 3, 0)).unwrap();
        assert!(matches!(
            prune(&net, &r, 100.0),
            Err(PruneError::EmptyModel(_))
        ));
        assert!(matches!(
            prune(&net, &r, 101.0),
            Err(PruneError::InvalidPercentile(_))
        ));
    }

    #[test]
    fn weak_hidden_unit_is_removed() {
        let mut net = KanNetwork::init(&[2, 2, 1], 4, 2, 9).unwrap();
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for (e, edge) in layer.edges.iter_mut().enumerate() {
                // edges into / out of hidden unit 0 are strong
                let v = match (l, e) {
                    (0, 0) => 1.0,
                    (0, 2) | (1, 0) => 3.0,
                    _ => 0.01,
                };
                edge.w_base = 0.0;
                edge.coeffs.0.iter_mut().for_each(|c| *c = v);
            }
        }
        let r = score(&net, &sample_xy(30, 2, 3)).unwrap();
        let p = prune(&net, &r, 50.0).unwrap();
        // hidden unit 1 and all four of its edges go; the strong path stays
        for i in 0..2 {
            assert!(!p.net.layers[0].edge(i, 1).active);
            assert!(p.net.layers[0].edge(i, 0).active);
        }
        assert!(!p.net.layers[1].edge(1, 0).active);
        assert!(p.net.layers[1].edge(0, 0).active);
        assert_eq!(p.surviving_edges, 3);
        assert_eq!(p.surviving_nodes, 4);
    }

    #[test]
    fn feature_importance_contract() {
        let mut net = KanNetwork::init(&[2, 3, 1], 4, 2, 8).unwrap();
        for j in 0..3 {
            net.layers[0].edge_mut(0, j).active = false;
        }
        let r = score(&net, &sample_xy(25, 2, 5)).unwrap();
        let fi = feature_importance(&r);
        assert_eq!(fi[0], 0.0);
        assert!((fi[1] - 1.0).abs() < 1e-15);

        let mut sym = KanNetwork::init(&[2, 1], 4, 2, 8).unwrap();
        sym.layers[0].edges[1] = sym.layers[0].edges[0].clone();
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0; 2]).collect();
        let r = score(&sym, &Xy::from_rows(&rows, vec![0.0; 10])).unwrap();
        assert_eq!(feature_importance(&r), vec![0.5, 0.5]);
    }

    #[test]
    fn dot_lists_only_active_edges() {
        let mut net = KanNetwork::init(&[2, 2, 1], 4, 2, 8).unwrap();
        net.layers[0].edges[0].active = false;
        let r = score(&net, &sample_xy(10, 2, 5)).unwrap();
        let dot = to_dot(&net, &r);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("->").count(), 5);
        assert!(!dot.contains("n0_0 -> n1_0"));
    }

    #[test]
    fn nearest_rank_definition() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(nearest_rank(&v, 0.0), f64::NEG_INFINITY);
        assert_eq!(nearest_rank(&v, 20.0), 1.0);
        assert_eq!(nearest_rank(&v, 21.0), 2.0);
        assert_eq!(nearest_rank(&v, 75.0), 4.0);
        assert_eq!(nearest_rank(&v, 100.0), 5.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn raising_percentile_never_adds_edges(seed in 0u64..1000, p in 0.0f64..95.0, dp in 0.0f64..5.0) {
            let net = KanNetwork::init(&[3, 3, 1], 4, 2, seed).unwrap();
            let r = score(&net, &sample_xy(20, 3, seed)).unwrap();
            let lo = prune(&net, &r, p);
            let hi = prune(&net, &r, p + dp);
            if let (Ok(lo), Ok(hi)) = (&lo, &hi) {
                prop_assert!(hi.surviving_edges <= lo.surviving_edges);
            }
            if lo.is_err() {
                prop_assert!(hi.is_err());
            }
        }

        #[test]
        fn pruning_only_masks(seed in 0u64..1000, p in 0.0f64..90.0) {
            let net = KanNetwork::init(&[3, 2, 1], 4, 2, seed).unwrap();
            let r = score(&net, &sample_xy(20, 3, seed + 1)).unwrap();
            if let Ok(res) = prune(&net, &r, p) {
                prop_assert_eq!(res.net.params(), net.params());
                for (a, e) in res.net.edges() {
                    prop_assert!(!e.active || net.edge(a).active);
                }
                prop_assert_eq!(res.surviving_edges, res.net.active_edge_count());
            }
        }

        #[test]
        fn scores_ignore_sample_order(seed in 0u64..1000) {
            let net = KanNetwork::init(&[2, 2, 1], 4, 2, seed).unwrap();
            let data = sample_xy(40, 2, seed);
            let mut rng = crate::rng::seeded(seed);
            let perm = crate::rng::permutation(data.len(), &mut rng);
            let a = score(&net, &data).unwrap();
            let b = score(&net, &data.select(&perm)).unwrap();
            for (x, y) in a.edge_scores.iter().flatten().zip(b.edge_scores.iter().flatten()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
