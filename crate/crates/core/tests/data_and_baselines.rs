use std::collections::HashSet;

use kanfoil::baselines::{fit_ols_xy, r2, train_mlp, MlpConfig};
use kanfoil::dataio::{
    correlation_filter, dedup, pearson, split, AirfoilSample, Dataset, Role, SplitSpec,
    DEFAULT_DEDUP_KEY,
};
use proptest::prelude::*;

mod common;

fn table(cols: [[f64; 4]; 9]) -> Dataset {
    let samples = (0..4)
        .map(|i| {
            let mut c = [0.0; 8];
            for j in 0..8 {
                c[j] = cols[j][i];
            }
            AirfoilSample {
                c,
                aoa: cols[8][i],
                cl: i as f64,
            }
        })
        .collect();
    Dataset::new(samples, "hand")
}

#[test]
fn correlation_filter_on_hand_table() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let flat = [0.5; 4];
    // r(c1,c2) = 1, r(c1,c3) = 0, r(c1,c4) = -1, r(c3,aoa) = -1, r(c1,aoa) = 0
    let d = table([
        a,
        [2.0, 4.0, 6.0, 8.0],
        [1.0, 0.0, 0.0, 1.0],
        [4.0, 3.0, 2.0, 1.0],
        flat,
        flat,
        flat,
        flat,
        [0.0, 1.0, 1.0, 0.0],
    ]);
    assert_eq!(pearson(&a, &[1.0, 0.0, 0.0, 1.0]), Some(0.0));
    assert!((pearson(&a, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(pearson(&a, &flat), None);
    let f = correlation_filter(&d, 0.5).unwrap();
    use Role::*;
    assert_eq!(f.retained, vec![C1, C3, C5, C6, C7, C8]);
    assert_eq!(f.dropped, vec![C2, C4, Aoa]);
    assert_eq!(f.degenerate, vec![C5, C6, C7, C8]);
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    // few distinct values so duplicates are common
    prop::collection::vec((0u8..3, 0u8..3, -2i8..3, -5.0f64..5.0), 1..80).prop_map(|rows| {
        let samples = rows
            .into_iter()
            .map(|(a, b, aoa, cl)| AirfoilSample {
                c: [
                    a as f64 * 0.1,
                    b as f64 * 0.1,
                    0.2,
                    0.3,
                    -0.1,
                    -0.1,
                    0.0,
                    0.0,
                ],
                aoa: cl,
                cl: aoa as f64,
            })
            .collect();
        Dataset::new(samples, "prop")
    })
}

fn key(s: &AirfoilSample) -> Vec<u64> {
    DEFAULT_DEDUP_KEY
        .iter()
        .map(|&r| s.get(r).to_bits())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dedup_is_idempotent_and_keeps_every_key(d in dataset_strategy()) {
        let once = dedup(&d, &DEFAULT_DEDUP_KEY);
        let twice = dedup(&once, &DEFAULT_DEDUP_KEY);
        prop_assert_eq!(&once, &twice);
        let before: HashSet<_> = d.samples.iter().map(key).collect();
        let after: Vec<_> = once.samples.iter().map(key).collect();
        prop_assert_eq!(after.len(), before.len());
        prop_assert_eq!(after.into_iter().collect::<HashSet<_>>(), before);
    }

    #[test]
    fn split_is_a_partition(d in dataset_strategy(), frac in 0.05f64..0.95, seed in any::<u64>()) {
        let spec = SplitSpec { train_fraction: frac, seed };
        let (tr, te) = split(&d, &spec).unwrap();
        prop_assert_eq!(tr.len(), spec.train_count(d.len()));
        prop_assert_eq!(tr.len() + te.len(), d.len());
        let bits = |s: &AirfoilSample| (key(s), s.aoa.to_bits());
        let mut all: Vec<_> = d.samples.iter().map(bits).collect();
        let mut got: Vec<_> = tr.samples.iter().chain(&te.samples).map(bits).collect();
        all.sort();
        got.sort();
        prop_assert_eq!(all, got);
        let (tr2, _) = split(&d, &spec).unwrap();
        prop_assert_eq!(tr, tr2);
    }

    #[test]
    fn r2_is_invariant_to_a_common_shift(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
        shift in -100.0f64..100.0,
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(t.iter().any(|&v| (v - t[0]).abs() > 1e-3));
        let base = r2(&p, &t).unwrap();
        let ps: Vec<f64> = p.iter().map(|v| v + shift).collect();
        let ts: Vec<f64> = t.iter().map(|v| v + shift).collect();
        prop_assert!((r2(&ps, &ts).unwrap() - base).abs() < 1e-8 * base.abs().max(1.0));
    }
}

#[test]
fn ols_residuals_are_orthogonal_to_the_design() {
    let data = common::uniform_xy(200, 4, -2.0, 2.0, 9, |x| {
        1.5 * x[0] - 0.5 * x[1] + x[2] * x[3] + (7.0 * x[0]).sin()
    });
    let m = fit_ols_xy(&data, (0..4).map(|j| format!("x{j}")).collect()).unwrap();
    let pred = m.predict(&data).unwrap();
    let res: Vec<f64> = pred.iter().zip(&data.y).map(|(p, y)| y - p).collect();
    assert!(res.iter().sum::<f64>().abs() < 1e-9);
    for j in 0..4 {
        let dot: f64 = data.column(j).iter().zip(&res).map(|(x, r)| x * r).sum();
        assert!(dot.abs() < 1e-9, "column {j}: {dot}");
    }
}

#[test]
fn ols_recovers_an_exact_linear_target() {
    let data = common::uniform_xy(50, 3, -1.0, 1.0, 2, |x| {
        0.3 + 2.0 * x[0] - x[1] + 0.25 * x[2]
    });
    let m = fit_ols_xy(&data, vec!["a".into(), "b".into(), "c".into()]).unwrap();
    for (w, want) in m.weights.iter().zip([2.0, -1.0, 0.25]) {
        assert!((w - want).abs() < 1e-12);
    }
    assert!((m.intercept - 0.3).abs() < 1e-12);
}

#[test]
fn mlp_learns_a_planted_linear_target() {
    let f = |x: &[f64]| 0.2 + 0.5 * x[0] - 0.3 * x[1] + 0.1 * x[2];
    let train = common::uniform_xy(1024, 3, -1.0, 1.0, 5, f);
    let val = common::uniform_xy(256, 3, -1.0, 1.0, 6, f);
    let test = common::uniform_xy(512, 3, -1.0, 1.0, 7, f);
    let cfg = MlpConfig {
        dims: vec![3, 9, 6, 1],
        learning_rate: 3e-3,
        batch_size: 64,
        epochs: 400,
        patience: 60,
        ..MlpConfig::default()
    };
    let (m, rep) = train_mlp(&train, &val, &cfg).unwrap();
    let r = m.evaluate(&test).unwrap().r2;
    assert!(r > 0.999, "test r2 {r}, best epoch {}", rep.best_epoch);
}
