use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{self, affine, constant, simplify, sum, unary, var, FormulaNode};
use super::library::UnaryFn;
use crate::dataio::Xy;
use crate::kan::{EdgeAddr, KanError, KanNetwork};

#[derive(Debug, Error)]
pub enum SymbolicError {
    #[error("DegenerateInput: {0}")]
    DegenerateInput(String),
    #[error("NoValidFit for edge {0:?}")]
    NoValidFit(EdgeAddr),
    #[error("edge {0:?} is masked")]
    InactiveEdge(EdgeAddr),
    #[error(transparent)]
    Kan(#[from] KanError),
}

/// `c * f(a * x + b) + d` and its R² on the fitting sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub func: UnaryFn,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `-inf` when the function is undefined somewhere on the sample.
    #[serde(with = "r2_serde")]
    pub r2: f64,
}

mod r2_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

impl AffineFit {
    pub fn predict(&self, x: f64) -> Option<f64> {
        self.func
            .apply(self.a * x + self.b)
            .map(|v| self.c * v + self.d)
    }

    fn invalid(func: UnaryFn) -> Self {
        AffineFit {
            func,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            r2: f64::NEG_INFINITY,
        }
    }

    /// The fit applied to `arg`.
    pub fn to_formula(&self, arg: FormulaNode) -> FormulaNode {
        affine(
            self.c,
            self.d,
            unary(self.func, affine(self.a, self.b, arg)),
        )
    }
}

pub const MIN_FIT_POINTS: usize = 10;
const LEVELS: usize = 3;
const GRID: usize = 21;
const HALF_WIDTH: f64 = 10.0;
const ZOOM: f64 = 10.0;
/// R² values closer than this count as a tie; the earlier library entry wins.
pub const R2_TIE: f64 = 1e-9;

struct Sample<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    y_mean: f64,
    ss_tot: f64,
}

impl Sample<'_> {
    fn r2(&self, ss_res: f64) -> f64 {
        if self.ss_tot > 0.0 {
            1.0 - ss_res / self.ss_tot
        } else if ss_res <= 1e-30 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Best `(c, d)` for fixed `(a, b)` by linear least squares.
    fn solve_cd(&self, f: UnaryFn, a: f64, b: f64) -> Option<(f64, f64, f64)> {
        let n = self.xs.len() as f64;
        let mut fu = Vec::with_capacity(self.xs.len());
        for &x in self.xs {
            fu.push(f.apply(a * x + b)?);
        }
        let f_mean = fu.iter().sum::<f64>() / n;
        let (mut sff, mut sfy) = (0.0, 0.0);
        for (v, y) in fu.iter().zip(self.ys) {
            sff += (v - f_mean) * (v - f_mean);
            sfy += (v - f_mean) * (y - self.y_mean);
        }
        // a constant f(a x + b) does not use f at all
        let energy: f64 = fu.iter().map(|v| v * v).sum();
        if sff <= 1e-20 * energy.max(1e-300) {
            return None;
        }
        let c = sfy / sff;
        let d = self.y_mean - c * f_mean;
        let ss_res: f64 = fu
            .iter()
            .zip(self.ys)
            .map(|(v, y)| (c * v + d - y).powi(2))
            .sum();
        ss_res.is_finite().then_some((c, d, ss_res))
    }

    fn sse(&self, f: UnaryFn, p: &[f64; 4]) -> Option<f64> {
        let mut s = 0.0;
        for (&x, &y) in self.xs.iter().zip(self.ys) {
            let v = f.apply(p[0] * x + p[1])?;
            s += (p[2] * v + p[3] - y).powi(2);
        }
        s.is_finite().then_some(s)
    }
}

/// Fits `c * f(a * x + b) + d` to `(xs, ys)`: coarse-to-fine grid search over
/// `(a, b)` with `(c, d)` solved in closed form, then a damped Gauss-Newton
/// polish of all four parameters.
pub fn fit_candidate(xs: &[f64], ys: &[f64], f: UnaryFn) -> Result<AffineFit, SymbolicError> {
    if xs.len() != ys.len() {
        return Err(SymbolicError::DegenerateInput(format!(
            "{} inputs but {} outputs",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(SymbolicError::DegenerateInput(format!(
            "need at least {MIN_FIT_POINTS} points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(SymbolicError::DegenerateInput("non-finite sample".into()));
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    if hi <= lo {
        return Err(SymbolicError::DegenerateInput("inputs are constant".into()));
    }
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sample = Sample {
        xs,
        ys,
        y_mean,
        ss_tot: ys.iter().map(|y| (y - y_mean).powi(2)).sum(),
    };

    let mut best: Option<(f64, f64, f64, f64, f64)> = None; // ss_res, a, b, c, d
    let (mut ca, mut cb, mut hw) = (0.0, 0.0, HALF_WIDTH);
    for _ in 0..LEVELS {
        let step = 2.0 * hw / (GRID - 1) as f64;
        let mut level_best: Option<(f64, f64, f64, f64, f64)> = None;
        for i in 0..GRID {
            let a = ca - hw + i as f64 * step;
            for j in 0..GRID {
                let b = cb - hw + j as f64 * step;
                if let Some((c, d, ss)) = sample.solve_cd(f, a, b) {
                    if level_best.is_none_or(|l| ss < l.0) {
                        level_best = Some((ss, a, b, c, d));
                    }
                }
            }
        }
        let Some(lb) = level_best else { break };
        if best.is_none_or(|b| lb.0 < b.0) {
            best = Some(lb);
        }
        (ca, cb) = (lb.1, lb.2);
        hw /= ZOOM;
    }
    let Some((ss, a, b, c, d)) = best else {
        return Ok(AffineFit::invalid(f));
    };
    let (p, ss) = polish(&sample, f, [a, b, c, d], ss);
    Ok(AffineFit {
        func: f,
        a: p[0],
        b: p[1],
        c: p[2],
        d: p[3],
        r2: sample.r2(ss),
    })
}

/// Levenberg-Marquardt on `(a, b, c, d)`; only accepts steps that keep the
/// function defined on the whole sample and lower the squared error.
fn polish(s: &Sample, f: UnaryFn, mut p: [f64; 4], mut sse: f64) -> ([f64; 4], f64) {
    let mut mu = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&x, &y) in s.xs.iter().zip(s.ys) {
            let u = p[0] * x + p[1];
            let (Some(v), dv) = (f.apply(u), f.derivative(u)) else {
                return (p, sse);
            };
            let j = Vector4::new(p[2] * dv * x, p[2] * dv, v, 1.0);
            let r = p[2] * v + p[3] - y;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        if !jtj.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut m = jtj;
            for k in 0..4 {
                m[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = m.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let cand = [
                p[0] + delta[0],
                p[1] + delta[1],
                p[2] + delta[2],
                p[3] + delta[3],
            ];
            match s.sse(f, &cand) {
                Some(ns) if ns < sse => {
                    let gain = sse - ns;
                    p = cand;
                    sse = ns;
                    mu = (mu / 3.0).max(1e-12);
                    improved = gain > 1e-15 * sse.max(1e-300);
                    break;
                }
                _ => mu *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    (p, sse)
}

/// Best fit over `library`; near-ties go to the earlier entry.
pub fn best_fit(xs: &[f64], ys: &[f64], library: &[UnaryFn]) -> Result<AffineFit, SymbolicError> {
    let fits: Vec<AffineFit> = library
        .par_iter()
        .map(|&f| fit_candidate(xs, ys, f))
        .collect::<Result<_, _>>()?;
    let mut best: Option<AffineFit> = None;
    for fit in fits {
        if fit.r2.is_finite() && best.is_none_or(|b| fit.r2 > b.r2 + R2_TIE) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| {
        SymbolicError::DegenerateInput("no candidate is defined on the sample".into())
    })
}

/// Upper bound on points used per edge fit; larger sets are strided.
pub const MAX_FIT_POINTS: usize = 2000;

fn fit_indices(n: usize) -> Vec<usize> {
    if n <= MAX_FIT_POINTS {
        (0..n).collect()
    } else {
        (0..MAX_FIT_POINTS)
            .map(|i| i * n / MAX_FIT_POINTS)
            .collect()
    }
}

/// Edge inputs and whole-activation outputs on the (scaled) data rows.
pub fn edge_samples(
    net: &KanNetwork,
    addr: EdgeAddr,
    data: &Xy,
) -> Result<(Vec<f64>, Vec<f64>), SymbolicError> {
    let edge = net.edge(addr);
    if !edge.active {
        return Err(SymbolicError::InactiveEdge(addr));
    }
    let idx = fit_indices(data.len());
    let xs: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            net.forward(data.row(i))
                .map(|(_, c)| c.layer_inputs[addr.layer][addr.from])
        })
        .collect::<Result<_, _>>()?;
    let ys = xs.iter().map(|&x| edge.activation(x)).collect();
    Ok((xs, ys))
}

pub fn symbolify_edge(
    net: &KanNetwork,
    addr: EdgeAddr,
    data: &Xy,
    library: &[UnaryFn],
) -> Result<AffineFit, SymbolicError> {
    if data.is_empty() {
        return Err(SymbolicError::DegenerateInput("empty scoring set".into()));
    }
    let (xs, ys) = edge_samples(net, addr, data)?;
    match best_fit(&xs, &ys, library) {
        Ok(fit) => Ok(fit),
        // an edge fed a constant input (e.g. a frozen feature) is a constant
        Err(SymbolicError::DegenerateInput(_)) if xs.iter().all(|&x| x == xs[0]) => Ok(AffineFit {
            func: UnaryFn::Identity,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: ys[0],
            r2: 1.0,
        }),
        Err(SymbolicError::DegenerateInput(_)) => Err(SymbolicError::NoValidFit(addr)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFit {
    pub edge: EdgeAddr,
    pub fit: AffineFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbolified {
    pub formula: FormulaNode,
    pub edges: Vec<EdgeFit>,
}

impl Symbolified {
    pub fn min_edge_r2(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.fit.r2)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Replaces every active edge with its best library fit and composes the
/// network into one formula over the raw (unscaled) input names.
pub fn symbolify_network(
    net: &KanNetwork,
    data: &Xy,
    library: &[UnaryFn],
) -> Result<Symbolified, SymbolicError> {
    let mut edges = Vec::new();
    for (addr, e) in net.edges() {
        if e.active {
            edges.push(EdgeFit {
                edge: addr,
                fit: symbolify_edge(net, addr, data, library)?,
            });
        }
    }

    let mut nodes: Vec<FormulaNode> = (0..net.n_inputs())
        .map(|j| {
            let v = var(net.inputs[j].clone());
            match &net.scaler {
                Some(s) => {
                    let (a, b) = s.affine(j);
                    affine(a, b, v)
                }
                None => v,
            }
        })
        .collect();
    let mut fits = edges.iter().peekable();
    for (l, layer) in net.layers.iter().enumerate() {
        let mut terms: Vec<Vec<FormulaNode>> = vec![Vec::new(); layer.out_dim];
        while let Some(ef) = fits.next_if(|ef| ef.edge.layer == l) {
            terms[ef.edge.to].push(ef.fit.to_formula(nodes[ef.edge.from].clone()));
        }
        nodes = terms
            .into_iter()
            .map(|t| if t.is_empty() { constant(0.0) } else { sum(t) })
            .collect();
    }
    Ok(Symbolified {
        formula: simplify(&nodes[0]),
        edges,
    })
}

/// Evaluates `formula` on every row of raw-unit data.
pub fn formula_predictions(
    formula: &FormulaNode,
    names: &[String],
    data: &Xy,
) -> Result<Vec<f64>, ast::FormulaError> {
    (0..data.len())
        .map(|i| {
            let vars = names
                .iter()
                .cloned()
                .zip(data.row(i).iter().copied())
                .collect();
            formula.eval(&vars)
        })
        .collect()
}
