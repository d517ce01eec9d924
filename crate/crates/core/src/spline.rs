//! Uniform B-spline bases with analytic derivatives.
//!
//! A [`KnotGrid`] with `g` intervals over `[lo, hi]` and degree `k` places
//! knots at `lo + i * (hi - lo) / g` for `i` in `-k..=g + k`, which gives
//! `g + k` basis functions that form a partition of unity on `[lo, hi]`.
//! Inputs outside the domain are clamped to it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} coefficients, got {got}")]
    CoeffCount { expected: usize, got: usize },
    #[error("non-finite spline coefficient")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    pub g: usize,
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
}

impl KnotGrid {
    pub fn new(g: usize, k: usize, lo: f64, hi: f64) -> Result<Self, SplineError> {
        if g == 0 || k == 0 {
            return Err(SplineError::InvalidGrid(format!(
                "g={g}, k={k}; both must be >= 1"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SplineError::InvalidGrid(format!("domain [{lo}, {hi}]")));
        }
        Ok(KnotGrid { g, k, lo, hi })
    }

    pub fn basis_count(&self) -> usize {
        self.g + self.k
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.g as f64
    }

    pub fn knots(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..=self.g + 2 * self.k)
            .map(|j| self.lo + (j as f64 - self.k as f64) * h)
            .collect()
    }

    /// Clamps into the domain; the flag is true when clamping moved `x`.
    pub fn clamp(&self, x: f64) -> (f64, bool) {
        if x < self.lo {
            (self.lo, true)
        } else if x > self.hi {
            (self.hi, true)
        } else {
            (x, false)
        }
    }

    /// Nonzero bases at `x`: fills `values[..=k]` (and `derivs[..=k]` when
    /// given) and returns the index of the first. Derivatives are zero when
    /// `x` was clamped. `scratch` needs `k` slots.
    pub fn eval_local(
        &self,
        x: f64,
        values: &mut [f64],
        derivs: Option<&mut [f64]>,
        scratch: &mut [f64],
    ) -> usize {
        let k = self.k;
        let h = self.spacing();
        let (xc, clamped) = self.clamp(x);
        let u = (xc - self.lo) / h;
        let span = (u.floor() as isize).clamp(0, self.g as isize - 1) as usize;
        if k < 16 {
            let mut left = [0.0f64; 16];
            let mut right = [0.0f64; 16];
            self.triangle(
                xc,
                span,
                values,
                derivs.is_some(),
                scratch,
                &mut left,
                &mut right,
            );
        } else {
            let mut left = vec![0.0; k + 1];
            let mut right = vec![0.0; k + 1];
            self.triangle(
                xc,
                span,
                values,
                derivs.is_some(),
                scratch,
                &mut left,
                &mut right,
            );
        }
        if let Some(d) = derivs {
            fill_derivs(d, &scratch[..k], k, h, clamped);
        }
        span
    }

    // Cox–de Boor triangle over the active interval; 0/0 terms are taken as 0.
    #[allow(clippy::too_many_arguments)]
    fn triangle(
        &self,
        xc: f64,
        span: usize,
        n: &mut [f64],
        keep_lower: bool,
        lower: &mut [f64],
        left: &mut [f64],
        right: &mut [f64],
    ) {
        let k = self.k;
        let h = self.spacing();
        // knot-array index of the interval's left end is span + k
        let base = (span + k) as isize;
        let knot = |j: isize| self.lo + (j - k as isize) as f64 * h;
        n[0] = 1.0;
        for j in 1..=k {
            if j == k && keep_lower {
                lower[..k].copy_from_slice(&n[..k]);
            }
            left[j] = xc - knot(base + 1 - j as isize);
            right[j] = knot(base + j as isize) - xc;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
    }

    /// All `g + k` basis values at `x`.
    pub fn basis(&self, x: f64) -> Vec<f64> {
        let mut vals = vec![0.0; self.k + 1];
        let mut scratch = vec![0.0; self.k];
        let start = self.eval_local(x, &mut vals, None, &mut scratch);
        let mut out = vec![0.0; self.basis_count()];
        out[start..start + self.k + 1].copy_from_slice(&vals);
        out
    }

    /// d/dx of every basis function at `x` (zero outside the domain).
    pub fn basis_derivative(&self, x: f64) -> Vec<f64> {
        let mut vals = vec![0.0; self.k + 1];
        let mut ders = vec![0.0; self.k + 1];
        let mut scratch = vec![0.0; self.k];
        let start = self.eval_local(x, &mut vals, Some(&mut ders), &mut scratch);
        let mut out = vec![0.0; self.basis_count()];
        out[start..start + self.k + 1].copy_from_slice(&ders);
        out
    }
}

// Uniform knots: B'_{i,k} = (B_{i,k-1} - B_{i+1,k-1}) / h, since t_{i+k} - t_i = k h.
fn fill_derivs(d: &mut [f64], lower: &[f64], k: usize, h: f64, clamped: bool) {
    if clamped {
        d[..=k].iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let scale = 1.0 / h;
    for r in 0..=k {
        let a = if r >= 1 { lower[r - 1] } else { 0.0 };
        let b = if r < k { lower[r] } else { 0.0 };
        d[r] = scale * (a - b);
    }
}

/// Learnable coefficients of one spline curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplineCoeffs(pub Vec<f64>);

impl SplineCoeffs {
    pub fn for_grid(grid: &KnotGrid, coeffs: Vec<f64>) -> Result<Self, SplineError> {
        if coeffs.len() != grid.basis_count() {
            return Err(SplineError::CoeffCount {
                expected: grid.basis_count(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SplineError::NonFinite);
        }
        Ok(SplineCoeffs(coeffs))
    }

    pub fn zeros(grid: &KnotGrid) -> Self {
        SplineCoeffs(vec![0.0; grid.basis_count()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `sum_i coeffs_i * B_i(x)`.
pub fn eval_spline(grid: &KnotGrid, coeffs: &SplineCoeffs, x: f64) -> f64 {
    let mut vals = vec![0.0; grid.k + 1];
    let mut scratch = vec![0.0; grid.k];
    let start = grid.eval_local(x, &mut vals, None, &mut scratch);
    vals.iter()
        .zip(&coeffs.0[start..])
        .map(|(b, c)| b * c)
        .sum()
}

/// Gradient of [`eval_spline`] with respect to the coefficients.
pub fn eval_spline_grad_coeffs(grid: &KnotGrid, x: f64) -> Vec<f64> {
    grid.basis(x)
}
