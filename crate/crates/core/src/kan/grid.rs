//! Explicit grid refit: moves each edge's knot domain onto the observed
//! spread of its inputs and re-solves the coefficients by least squares.

use nalgebra::{DMatrix, DVector};

use super::{KanError, KanNetwork};
use crate::dataio::Xy;
use crate::spline::{eval_spline, KnotGrid, SplineCoeffs};

const MAX_FIT_POINTS: usize = 2000;

fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl KanNetwork {
    /// Refits every active edge onto the 1st–99th percentile range of the
    /// inputs it sees on `data`, layer by layer. The spline shape is kept as
    /// closely as least squares allows; `w_base`/`w_spline` are untouched.
    pub fn refit_grids(&mut self, data: &Xy) -> Result<(), KanError> {
        if data.is_empty() {
            return Err(KanError::EmptyBatch);
        }
        for l in 0..self.layers.len() {
            let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(data.len()); self.width[l]];
            for n in 0..data.len() {
                let (_, cache) = self.forward(data.row(n))?;
                for (col, v) in columns.iter_mut().zip(&cache.layer_inputs[l]) {
                    col.push(*v);
                }
            }
            for col in &mut columns {
                col.sort_by(f64::total_cmp);
            }
            let layer = &mut self.layers[l];
            let out_dim = layer.out_dim;
            for (e, edge) in layer.edges.iter_mut().enumerate() {
                if !edge.active {
                    continue;
                }
                let xs = &columns[e / out_dim];
                let (lo, hi) = (nearest_rank(xs, 1.0), nearest_rank(xs, 99.0));
                if !(hi - lo > 1e-9) {
                    continue;
                }
                let grid = KnotGrid::new(edge.grid.g, edge.grid.k, lo, hi)?;
                let stride = xs.len().div_ceil(MAX_FIT_POINTS).max(1);
                let mut pts: Vec<f64> = xs.iter().step_by(stride).copied().collect();
                // anchor every knot interval so the system stays well posed
                let h = grid.spacing();
                pts.extend((0..=4 * grid.g).map(|i| lo + i as f64 * h / 4.0));
                let a =
                    DMatrix::from_fn(pts.len(), grid.basis_count(), |r, c| grid.basis(pts[r])[c]);
                let b = DVector::from_iterator(
                    pts.len(),
                    pts.iter()
                        .map(|&x| eval_spline(&edge.grid, &edge.coeffs, x)),
                );
                let coeffs = a
                    .svd(true, true)
                    .solve(&b, 1e-12)
                    .map_err(|m| KanError::InvalidConfig(format!("grid refit failed: {m}")))?;
                edge.grid = grid;
                edge.coeffs = SplineCoeffs::for_grid(&grid, coeffs.iter().copied().collect())?;
            }
        }
        Ok(())
    }
}
