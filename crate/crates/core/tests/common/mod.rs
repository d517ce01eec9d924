//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::path::Path;

use kanfoil::baselines::MlpModel;
use kanfoil::dataio::Xy;
use kanfoil::kan::{EdgeAddr, KanNetwork, Regularization};
use kanfoil::symbolic::{affine, constant, sum, unary, var, FormulaNode, UnaryFn};
use rand::Rng;

/// The published closed-form lift model, term by term as printed.
pub fn lift_formula() -> FormulaNode {
    use UnaryFn::*;
    let term = |c: f64, f: UnaryFn, a: f64, name: &str, b: f64| {
        affine(c, 0.0, unary(f, affine(a, b, var(name))))
    };
    let inner = sum(vec![
        term(-0.28, Sin, 1.47, "c1", 4.60),
        term(0.09, Cos, 2.10, "c2", -0.99),
        term(0.48, Sqrt, 0.84, "c3", 1.00),
        term(-0.42, Cos, 1.22, "c4", -5.56),
        term(-0.03, Cos, 6.32, "c5", 6.84),
        term(0.08, Sin, 2.30, "c6", -0.35),
        term(-0.05, Sin, 3.51, "c7", 8.97),
        term(0.08, Cos, 2.98, "c8", -7.59),
        affine(0.04, 0.0, var("aoa")),
        constant(-4.19),
    ]);
    sum(vec![constant(0.69), affine(-2.42, 0.0, unary(Sin, inner))])
}

pub const FEATURES: [&str; 9] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "aoa"];

/// Plausible shape coefficients: upper surface positive, lower surface
/// mostly negative; angle of attack in degrees.
pub fn random_airfoil(rng: &mut impl Rng) -> [f64; 9] {
    let mut p = [0.0; 9];
    for (i, v) in p.iter_mut().enumerate().take(8) {
        *v = if i < 4 {
            rng.gen_range(0.05..0.35)
        } else {
            rng.gen_range(-0.25..0.05)
        };
    }
    p[8] = rng.gen_range(-4.0..8.0);
    p
}

pub fn bind(p: &[f64; 9]) -> std::collections::BTreeMap<String, f64> {
    FEATURES
        .iter()
        .map(|s| s.to_string())
        .zip(p.iter().copied())
        .collect()
}

/// Writes a lift dataset generated from [`lift_formula`] plus `n_dup`
/// repeated rows; `cd` is an extra column the loader must ignore.
pub fn write_surrogate_csv(path: &Path, n: usize, n_dup: usize, seed: u64) {
    let f = lift_formula();
    let mut rng = kanfoil::rng::seeded(seed);
    let mut rows: Vec<[f64; 9]> = (0..n).map(|_| random_airfoil(&mut rng)).collect();
    for i in 0..n_dup {
        rows.push(rows[(i * 7) % n]);
    }
    let mut s = String::from("c1,c2,c3,c4,c5,c6,c7,c8,alpha,cl,cd\n");
    for p in &rows {
        let cl = f.eval(&bind(p)).unwrap();
        let cols: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{},{},{}\n", cols.join(","), cl, 0.01));
    }
    std::fs::write(path, s).unwrap();
}

pub fn uniform_xy(
    n: usize,
    dim: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    f: impl Fn(&[f64]) -> f64,
) -> Xy {
    let mut rng = kanfoil::rng::seeded(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect())
        .collect();
    let y = rows.iter().map(|r| f(r)).collect();
    Xy::from_rows(&rows, y)
}

/// Sets every coefficient of an edge so the spline reproduces `f` at the
/// Greville abscissae (exact for linear `f`), with no base term.
pub fn set_edge_to(
    net: &mut KanNetwork,
    layer: usize,
    from: usize,
    to: usize,
    f: impl Fn(f64) -> f64,
) {
    let e = net.layers[layer].edge_mut(from, to);
    e.w_base = 0.0;
    e.w_spline = 1.0;
    let knots = e.grid.knots();
    let k = e.grid.k;
    for (i, c) in e.coeffs.0.iter_mut().enumerate() {
        let greville = knots[i + 1..=i + k].iter().sum::<f64>() / k as f64;
        *c = f(greville);
    }
}

/// Largest per-node gap between a pruned network and the full network
/// minus the removed edges, both evaluated on the pruned network's own
/// layer inputs at `x`.
pub fn nodewise_prune_gap(
    full: &KanNetwork,
    pruned: &KanNetwork,
    removed: &[EdgeAddr],
    x: &[f64],
) -> f64 {
    let (_, cache) = pruned.forward(x).unwrap();
    let mut worst: f64 = 0.0;
    for (l, layer) in full.layers.iter().enumerate() {
        let input = &cache.layer_inputs[l];
        for j in 0..layer.out_dim {
            let full_sum: f64 = (0..layer.in_dim)
                .map(|i| layer.edge(i, j).eval(input[i]))
                .sum();
            let removed_sum: f64 = removed
                .iter()
                .filter(|a| a.layer == l && a.to == j)
                .map(|a| layer.edge(a.from, j).eval(input[a.from]))
                .sum();
            worst = worst.max((cache.layer_inputs[l + 1][j] - (full_sum - removed_sum)).abs());
        }
    }
    worst
}

/// Whether every removed edge either feeds the output directly or feeds a
/// node that no longer reaches it, so the end-to-end identity applies.
pub fn removal_is_output_local(pruned: &KanNetwork, removed: &[EdgeAddr]) -> bool {
    let last = pruned.layers.len() - 1;
    removed.iter().all(|a| {
        a.layer == last || {
            let next = &pruned.layers[a.layer + 1];
            (0..next.out_dim).all(|j| !next.edge(a.to, j).active)
        }
    })
}

/// Gap between the pruned output and the full output minus the removed
/// output-layer edges, evaluated on the full network's hidden values.
pub fn end_to_end_prune_gap(
    full: &KanNetwork,
    pruned: &KanNetwork,
    removed: &[EdgeAddr],
    x: &[f64],
) -> f64 {
    let last = full.layers.len() - 1;
    let (y_full, cache) = full.forward(x).unwrap();
    let removed_sum: f64 = removed
        .iter()
        .filter(|a| a.layer == last)
        .map(|a| {
            full.layers[last]
                .edge(a.from, a.to)
                .eval(cache.layer_inputs[last][a.from])
        })
        .sum();
    (pruned.eval(x).unwrap() - (y_full - removed_sum)).abs()
}

/// [2, 2, 1] network whose splines reproduce library functions.
pub fn planted_library_net() -> KanNetwork {
    let mut net = KanNetwork::init(&[2, 2, 1], 40, 3, 1).unwrap();
    set_edge_to(&mut net, 0, 0, 0, |x| 0.5 * x.sin());
    set_edge_to(&mut net, 0, 1, 0, |x| 0.3 * x * x);
    set_edge_to(&mut net, 0, 0, 1, |x| 0.4 * x);
    set_edge_to(&mut net, 0, 1, 1, |x| 0.3 * x.tanh());
    set_edge_to(&mut net, 1, 0, 0, |x| 0.8 * x + 0.1);
    set_edge_to(&mut net, 1, 1, 0, |x| (1.5 * x).sin());
    net
}

const FD_STEP: f64 = 1e-6;

/// Relative error with a small absolute floor so near-zero partials compare
/// on an absolute scale.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

/// Worst relative error between backprop and central differences over every
/// parameter of `net`.
pub fn kan_gradient_error(net: &KanNetwork, reg: &Regularization, data: &Xy) -> f64 {
    let g = net.gradients(data, reg).unwrap();
    let p0 = net.params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] = p0[i] + FD_STEP;
        probe.set_params(&p);
        let up = probe.loss(data, reg).unwrap().total;
        p[i] = p0[i] - FD_STEP;
        probe.set_params(&p);
        let down = probe.loss(data, reg).unwrap().total;
        worst = worst.max(rel_err(g.grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// A [2, 3, 1] network with randomized weights large enough that hidden
/// values cross several knots, and data for it.
pub fn random_small_kan(trial: u64) -> (KanNetwork, Xy) {
    let mut rng = kanfoil::rng::seeded(1000 + trial);
    let g = rng.gen_range(4..=6);
    let mut net = KanNetwork::init(&[2, 3, 1], g, 2, 100 + trial).unwrap();
    for layer in &mut net.layers {
        for e in &mut layer.edges {
            e.coeffs.0.iter_mut().for_each(|c| *c *= 5.0);
            e.w_base = rng.gen_range(0.5..1.5);
            e.w_spline = rng.gen_range(0.5..1.5);
        }
    }
    let data = uniform_xy(40, 2, -0.95, 0.95, trial, |x| x[0].sin() + x[1] * x[1]);
    (net, data)
}

/// Same check for an MLP under the Huber loss.
pub fn mlp_gradient_error(m: &MlpModel, data: &Xy, delta: f64) -> f64 {
    let (_, grad) = m.loss_and_grad(data, delta).unwrap();
    let p0 = m.params();
    let mut probe = m.clone();
    let mut worst: f64 = 0.0;
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] += FD_STEP;
        probe.set_params(&p);
        let up = probe.loss_and_grad(data, delta).unwrap().0;
        p[i] = p0[i] - FD_STEP;
        probe.set_params(&p);
        let down = probe.loss_and_grad(data, delta).unwrap().0;
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}
