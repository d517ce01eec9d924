//! B-spline bases against the closed-form cardinal B-spline and finite
//! differences.

use kanfoil::spline::{eval_spline, eval_spline_grad_coeffs, KnotGrid, SplineCoeffs};
use proptest::prelude::*;
use rand::Rng;

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Uniform cardinal B-spline of degree `k` on `[0, k + 1]` by the truncated
/// power formula.
fn cardinal(k: usize, t: f64) -> f64 {
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    let s: f64 = (0..=k + 1)
        .map(|j| {
            let d = t - j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if d > 0.0 {
                sign * binom(k as u64 + 1, j as u64) * d.powi(k as i32)
            } else {
                0.0
            }
        })
        .sum();
    s / fact
}

fn oracle_basis(grid: &KnotGrid, x: f64) -> Vec<f64> {
    let h = grid.spacing();
    (0..grid.basis_count())
        .map(|i| cardinal(grid.k, (x - grid.lo) / h - i as f64 + grid.k as f64))
        .collect()
}

#[test]
fn matches_truncated_power_oracle() {
    let mut rng = kanfoil::rng::seeded(1);
    for _ in 0..400 {
        let g = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=4);
        let lo = rng.gen_range(-3.0..0.0);
        let hi = lo + rng.gen_range(0.5..4.0);
        let grid = KnotGrid::new(g, k, lo, hi).unwrap();
        let x = rng.gen_range(lo..hi);
        let got = grid.basis(x);
        let want = oracle_basis(&grid, x);
        for (a, b) in got.iter().zip(&want) {
            assert!(
                (a - b).abs() < 1e-10,
                "g={g} k={k} x={x}: {got:?} vs {want:?}"
            );
        }
    }
}

#[test]
fn table_grid_matches_oracle_at_100_points() {
    let grid = KnotGrid::new(6, 2, -1.0, 1.0).unwrap();
    let mut rng = kanfoil::rng::seeded(2);
    let coeffs = SplineCoeffs(
        (0..grid.basis_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );
    for i in 0..100 {
        let x = -1.0 + 2.0 * i as f64 / 99.0;
        let want: f64 = oracle_basis(&grid, x)
            .iter()
            .zip(&coeffs.0)
            .map(|(b, c)| b * c)
            .sum();
        assert!((eval_spline(&grid, &coeffs, x) - want).abs() < 1e-12);
        assert_eq!(eval_spline_grad_coeffs(&grid, x), grid.basis(x));
    }
}

#[test]
fn derivatives_match_central_differences() {
    let mut rng = kanfoil::rng::seeded(3);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 300 {
        let g = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=4);
        let grid = KnotGrid::new(g, k, -1.0, 1.0).unwrap();
        let x = rng.gen_range(-1.0 + 1e-3..1.0 - 1e-3);
        // degree-1 derivatives jump at knots
        let u = (x + 1.0) / grid.spacing();
        if k == 1 && (u - u.round()).abs() < 1e-4 {
            continue;
        }
        let an = grid.basis_derivative(x);
        let (p, m) = (grid.basis(x + h), grid.basis(x - h));
        for i in 0..an.len() {
            let fd = (p[i] - m[i]) / (2.0 * h);
            let scale = an[i].abs().max(fd.abs()).max(1.0);
            assert!(
                (an[i] - fd).abs() / scale < 1e-5,
                "g={g} k={k} x={x} i={i}: {} vs {fd}",
                an[i]
            );
        }
        checked += 1;
    }
}

proptest! {
    #[test]
    fn partition_of_unity(g in 1usize..=12, k in 1usize..=4, t in 0.0f64..=1.0) {
        let grid = KnotGrid::new(g, k, -1.0, 1.0).unwrap();
        let b = grid.basis(-1.0 + 2.0 * t);
        prop_assert!(b.iter().all(|&v| v >= 0.0));
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_sums_to_zero(g in 1usize..=12, k in 1usize..=4, t in 0.01f64..0.99) {
        let grid = KnotGrid::new(g, k, -1.0, 1.0).unwrap();
        let d = grid.basis_derivative(-1.0 + 2.0 * t);
        prop_assert!(d.iter().sum::<f64>().abs() < 1e-9 * (g as f64).max(1.0));
    }
}
