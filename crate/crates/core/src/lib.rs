//! Kolmogorov–Arnold networks for tabular regression.
//!
//! Networks carry a learnable B-spline activation on every edge and sum at
//! the nodes. A trained network can be pruned by importance scores and
//! distilled into a closed-form formula. The crate also ships the
//! comparison baselines (least squares and a small MLP) and the `kanfoil`
//! command-line pipeline built on top of them.

// NaN-rejecting `!(x > 0.0)` guards and index loops over parallel arrays
// are deliberate in the numeric code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod cli;
pub mod dataio;
pub mod kan;
pub mod optim;
pub mod prune;
pub mod rng;
pub mod spline;
pub mod symbolic;
