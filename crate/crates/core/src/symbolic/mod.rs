//! Symbolic distillation: each active edge becomes `c * f(a * x + b) + d`
//! for the best-scoring library function `f`, and the network collapses
//! into one closed-form [`FormulaNode`] tree.

mod ast;
mod fit;
mod library;

pub use ast::{
    affine, constant, differentiate, outer_skeleton, product, simplify, sum, unary, var,
    FormulaError, FormulaNode,
};
pub use fit::{
    best_fit, edge_samples, fit_candidate, formula_predictions, symbolify_edge, symbolify_network,
    AffineFit, EdgeFit, SymbolicError, Symbolified, MAX_FIT_POINTS, MIN_FIT_POINTS, R2_TIE,
};
pub use library::{UnaryFn, LIBRARY};
