use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::library::UnaryFn;

#[derive(Debug, Error, PartialEq)]
pub enum FormulaError {
    #[error("UnboundVariable: {0}")]
    UnboundVariable(String),
    #[error("EvalDomainError: {func}({arg}) is undefined in subtree `{subtree}`")]
    EvalDomainError {
        func: &'static str,
        arg: f64,
        subtree: String,
    },
}

/// Closed-form expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum FormulaNode {
    Const {
        value: f64,
    },
    Var {
        name: String,
    },
    /// `a * arg + b`.
    Affine {
        a: f64,
        b: f64,
        arg: Box<FormulaNode>,
    },
    Unary {
        func: UnaryFn,
        arg: Box<FormulaNode>,
    },
    Sum {
        args: Vec<FormulaNode>,
    },
    Product {
        args: Vec<FormulaNode>,
    },
}

use FormulaNode::*;

pub fn constant(value: f64) -> FormulaNode {
    Const { value }
}

pub fn var(name: impl Into<String>) -> FormulaNode {
    Var { name: name.into() }
}

pub fn affine(a: f64, b: f64, arg: FormulaNode) -> FormulaNode {
    Affine {
        a,
        b,
        arg: Box::new(arg),
    }
}

pub fn unary(func: UnaryFn, arg: FormulaNode) -> FormulaNode {
    Unary {
        func,
        arg: Box::new(arg),
    }
}

pub fn sum(args: Vec<FormulaNode>) -> FormulaNode {
    Sum { args }
}

pub fn product(args: Vec<FormulaNode>) -> FormulaNode {
    Product { args }
}

impl FormulaNode {
    pub fn eval(&self, vars: &BTreeMap<String, f64>) -> Result<f64, FormulaError> {
        Ok(match self {
            Const { value } => *value,
            Var { name } => *vars
                .get(name)
                .ok_or_else(|| FormulaError::UnboundVariable(name.clone()))?,
            Affine { a, b, arg } => a * arg.eval(vars)? + b,
            Unary { func, arg } => {
                let u = arg.eval(vars)?;
                func.apply(u).ok_or_else(|| FormulaError::EvalDomainError {
                    func: func.name(),
                    arg: u,
                    subtree: self.render(6),
                })?
            }
            Sum { args } => {
                let mut s = 0.0;
                for t in args {
                    s += t.eval(vars)?;
                }
                s
            }
            Product { args } => {
                let mut p = 1.0;
                for t in args {
                    p *= t.eval(vars)?;
                }
                p
            }
        })
    }

    /// Variable names in first-appearance order.
    pub fn variables(&self) -> Vec<String> {
        fn walk(n: &FormulaNode, out: &mut Vec<String>) {
            match n {
                Const { .. } => {}
                Var { name } => {
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
                Affine { arg, .. } | Unary { arg, .. } => walk(arg, out),
                Sum { args } | Product { args } => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        1 + match self {
            Const { .. } | Var { .. } => 0,
            Affine { arg, .. } | Unary { arg, .. } => arg.node_count(),
            Sum { args } | Product { args } => args.iter().map(Self::node_count).sum(),
        }
    }

    /// Functions used, in first-appearance order (pre-order walk).
    pub fn functions(&self) -> Vec<UnaryFn> {
        fn walk(n: &FormulaNode, out: &mut Vec<UnaryFn>) {
            match n {
                Const { .. } | Var { .. } => {}
                Affine { arg, .. } => walk(arg, out),
                Unary { func, arg } => {
                    out.push(*func);
                    walk(arg, out)
                }
                Sum { args } | Product { args } => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("formula serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Folds constants, merges nested affines, drops identities, and
/// distributes affines over sums so every sum carries at most one constant
/// (placed first). Values are preserved up to rounding.
pub fn simplify(n: &FormulaNode) -> FormulaNode {
    let s = simp(n);
    match s {
        // keep the leading constant visible: d + c * f(...)
        Affine { a, b, arg } if b != 0.0 && !matches!(*arg, Var { .. }) => {
            sum_of(vec![constant(b), affine(a, 0.0, *arg)])
        }
        s => s,
    }
}

fn simp(n: &FormulaNode) -> FormulaNode {
    match n {
        Const { .. } | Var { .. } => n.clone(),
        Unary { func, arg } => {
            let x = simp(arg);
            match (func, &x) {
                (UnaryFn::Identity, _) => x,
                (f, Const { value }) => match f.apply(*value) {
                    Some(v) => constant(v),
                    None => unary(*f, x),
                },
                _ => unary(*func, x),
            }
        }
        Affine { a, b, arg } => affine_of(*a, *b, simp(arg)),
        Sum { args } => sum_of(args.iter().map(simp).collect()),
        Product { args } => product_of(args.iter().map(simp).collect()),
    }
}

fn affine_of(a: f64, b: f64, x: FormulaNode) -> FormulaNode {
    match x {
        Const { value } => constant(a * value + b),
        Affine { a: a2, b: b2, arg } => affine_of(a * a2, a * b2 + b, *arg),
        Sum { args } => {
            let mut terms: Vec<FormulaNode> =
                args.into_iter().map(|t| affine_of(a, 0.0, t)).collect();
            terms.push(constant(b));
            sum_of(terms)
        }
        _ if a == 0.0 => constant(b),
        x if a == 1.0 && b == 0.0 => x,
        x => affine(a, b, x),
    }
}

fn sum_of(args: Vec<FormulaNode>) -> FormulaNode {
    let mut c = 0.0;
    let mut terms = Vec::new();
    let mut stack: Vec<FormulaNode> = args.into_iter().rev().collect();
    while let Some(t) = stack.pop() {
        match t {
            Const { value } => c += value,
            Sum { args } => stack.extend(args.into_iter().rev()),
            Affine { a, b, arg } if b != 0.0 => {
                c += b;
                terms.push(affine_of(a, 0.0, *arg));
            }
            t => terms.push(t),
        }
    }
    match (terms.len(), c == 0.0) {
        (0, _) => constant(c),
        (1, true) => terms.pop().unwrap(),
        (_, true) => sum(terms),
        _ => {
            terms.insert(0, constant(c));
            sum(terms)
        }
    }
}

fn product_of(args: Vec<FormulaNode>) -> FormulaNode {
    let mut c = 1.0;
    let mut factors = Vec::new();
    for f in args {
        match f {
            Const { value } => c *= value,
            Product { args } => factors.extend(args),
            f => factors.push(f),
        }
    }
    if c == 0.0 || factors.is_empty() {
        return constant(c);
    }
    let core = if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        product(factors)
    };
    affine_of(c, 0.0, core)
}

/// `d node / d wrt` by sum, product and chain rules; no simplification.
pub fn differentiate(n: &FormulaNode, wrt: &str) -> FormulaNode {
    match n {
        Const { .. } => constant(0.0),
        Var { name } => constant(if name == wrt { 1.0 } else { 0.0 }),
        Affine { a, arg, .. } => affine(*a, 0.0, differentiate(arg, wrt)),
        Sum { args } => sum(args.iter().map(|t| differentiate(t, wrt)).collect()),
        Product { args } => sum((0..args.len())
            .map(|i| {
                product(
                    args.iter()
                        .enumerate()
                        .map(|(j, f)| {
                            if i == j {
                                differentiate(f, wrt)
                            } else {
                                f.clone()
                            }
                        })
                        .collect(),
                )
            })
            .collect()),
        Unary { func, arg } => product(vec![outer_derivative(*func, arg), differentiate(arg, wrt)]),
    }
}

fn outer_derivative(f: UnaryFn, u: &FormulaNode) -> FormulaNode {
    let u = u.clone();
    match f {
        UnaryFn::Identity => constant(1.0),
        UnaryFn::Square => affine(2.0, 0.0, u),
        UnaryFn::Cube => affine(3.0, 0.0, unary(UnaryFn::Square, u)),
        UnaryFn::Sqrt => affine(
            0.5,
            0.0,
            unary(UnaryFn::Reciprocal, unary(UnaryFn::Sqrt, u)),
        ),
        UnaryFn::Exp => unary(UnaryFn::Exp, u),
        UnaryFn::Log => unary(UnaryFn::Reciprocal, u),
        UnaryFn::Sin => unary(UnaryFn::Cos, u),
        UnaryFn::Cos => affine(-1.0, 0.0, unary(UnaryFn::Sin, u)),
        UnaryFn::Tanh => affine(-1.0, 1.0, unary(UnaryFn::Square, unary(UnaryFn::Tanh, u))),
        UnaryFn::Abs => unary(UnaryFn::Sign, u),
        UnaryFn::Reciprocal => affine(
            -1.0,
            0.0,
            unary(UnaryFn::Reciprocal, unary(UnaryFn::Square, u)),
        ),
        UnaryFn::Sign => constant(0.0),
    }
}

/// The outer shape `d + c * f(inner)` with `inner` a sum of at least two
/// terms, as `(f, number of inner terms)`.
pub fn outer_skeleton(n: &FormulaNode) -> Option<(UnaryFn, usize)> {
    let outer = match n {
        Sum { args } if args.len() == 2 => match (&args[0], &args[1]) {
            (Const { .. }, Affine { b, arg, .. }) if *b == 0.0 => arg.as_ref(),
            _ => return None,
        },
        Affine { arg, .. } => arg.as_ref(),
        _ => return None,
    };
    match outer {
        Unary { func, arg } => match arg.as_ref() {
            Sum { args } if args.len() >= 2 => Some((*func, args.len())),
            _ => None,
        },
        _ => None,
    }
}

// ---------------------------------------------------------------- rendering

fn num(v: f64, p: usize) -> String {
    let s = format!("{v:.p$}");
    // avoid "-0.00"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl FormulaNode {
    /// Infix text with coefficients rounded to `precision` decimals.
    pub fn render(&self, precision: usize) -> String {
        let mut s = String::new();
        render_into(self, precision, &mut s);
        s
    }

    pub fn render_latex(&self, precision: usize) -> String {
        let mut s = String::new();
        latex_into(self, precision, &mut s);
        s
    }
}

/// Sign and magnitude text of a sum term, so sums read `x - 2 * y`.
fn signed_term(t: &FormulaNode, p: usize, latex: bool) -> (bool, String) {
    let body = |n: &FormulaNode| {
        let mut s = String::new();
        if latex {
            latex_into(n, p, &mut s)
        } else {
            render_into(n, p, &mut s)
        }
        s
    };
    match t {
        Const { value } if *value < 0.0 => (true, body(&constant(-value))),
        Affine { a, b, arg } if *a < 0.0 && *b == 0.0 => {
            (true, body(&affine(-a, 0.0, (**arg).clone())))
        }
        t => (false, body(t)),
    }
}

fn join_sum(args: &[FormulaNode], p: usize, latex: bool, out: &mut String) {
    for (i, t) in args.iter().enumerate() {
        let (neg, text) = signed_term(t, p, latex);
        match (i, neg) {
            (0, true) => {
                out.push('-');
                out.push_str(&text)
            }
            (0, false) => out.push_str(&text),
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&text)
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&text)
            }
        }
    }
}

fn is_atom(n: &FormulaNode) -> bool {
    matches!(n, Const { .. } | Var { .. } | Unary { .. })
}

fn render_into(n: &FormulaNode, p: usize, out: &mut String) {
    match n {
        Const { value } => out.push_str(&num(*value, p)),
        Var { name } => out.push_str(name),
        Affine { a, b, arg } => {
            if *a != 1.0 {
                out.push_str(&num(*a, p));
                out.push_str(" * ");
            }
            if is_atom(arg) {
                render_into(arg, p, out);
            } else {
                out.push('(');
                render_into(arg, p, out);
                out.push(')');
            }
            if *b < 0.0 {
                let _ = write!(out, " - {}", num(-b, p));
            } else if *b > 0.0 {
                let _ = write!(out, " + {}", num(*b, p));
            }
        }
        Unary { func, arg } => {
            let mut inner = String::new();
            render_into(arg, p, &mut inner);
            match func {
                UnaryFn::Identity => {
                    let _ = write!(out, "({inner})");
                }
                UnaryFn::Square => {
                    let _ = write!(out, "({inner})^2");
                }
                UnaryFn::Cube => {
                    let _ = write!(out, "({inner})^3");
                }
                UnaryFn::Reciprocal => {
                    let _ = write!(out, "1/({inner})");
                }
                f => {
                    let _ = write!(out, "{}({inner})", f.name());
                }
            }
        }
        Sum { args } => join_sum(args, p, false, out),
        Product { args } => {
            for (i, f) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                if is_atom(f) {
                    render_into(f, p, out);
                } else {
                    out.push('(');
                    render_into(f, p, out);
                    out.push(')');
                }
            }
        }
    }
}

fn latex_var(name: &str) -> String {
    match name.strip_prefix('c') {
        Some(d) if !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()) => format!("c_{{{d}}}"),
        _ if name == "aoa" => "\\text{aoa}".into(),
        _ => format!("\\mathrm{{{name}}}"),
    }
}

fn latex_into(n: &FormulaNode, p: usize, out: &mut String) {
    let paren = |arg: &FormulaNode, out: &mut String| {
        if is_atom(arg) {
            latex_into(arg, p, out);
        } else {
            out.push_str("\\left(");
            latex_into(arg, p, out);
            out.push_str("\\right)");
        }
    };
    match n {
        Const { value } => out.push_str(&num(*value, p)),
        Var { name } => out.push_str(&latex_var(name)),
        Affine { a, b, arg } => {
            if *a != 1.0 {
                out.push_str(&num(*a, p));
                out.push_str(" \\cdot ");
            }
            paren(arg, out);
            if *b < 0.0 {
                let _ = write!(out, " - {}", num(-b, p));
            } else if *b > 0.0 {
                let _ = write!(out, " + {}", num(*b, p));
            }
        }
        Unary { func, arg } => {
            let mut inner = String::new();
            latex_into(arg, p, &mut inner);
            let _ = match func {
                UnaryFn::Identity => write!(out, "\\left({inner}\\right)"),
                UnaryFn::Square => write!(out, "\\left({inner}\\right)^{{2}}"),
                UnaryFn::Cube => write!(out, "\\left({inner}\\right)^{{3}}"),
                UnaryFn::Sqrt => write!(out, "\\sqrt{{{inner}}}"),
                UnaryFn::Exp => write!(out, "\\exp\\left({inner}\\right)"),
                UnaryFn::Log => write!(out, "\\log\\left({inner}\\right)"),
                UnaryFn::Sin => write!(out, "\\sin\\left({inner}\\right)"),
                UnaryFn::Cos => write!(out, "\\cos\\left({inner}\\right)"),
                UnaryFn::Tanh => write!(out, "\\tanh\\left({inner}\\right)"),
                UnaryFn::Abs => write!(out, "\\left|{inner}\\right|"),
                UnaryFn::Reciprocal => write!(out, "\\frac{{1}}{{{inner}}}"),
                UnaryFn::Sign => write!(out, "\\operatorname{{sgn}}\\left({inner}\\right)"),
            };
        }
        Sum { args } => join_sum(args, p, true, out),
        Product { args } => {
            for (i, f) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(" \\cdot ");
                }
                paren(f, out);
            }
        }
    }
}
