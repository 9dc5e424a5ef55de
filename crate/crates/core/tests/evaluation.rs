use std::collections::HashMap;

use gnss_setnet::evaluation::{
    cdf_curve, compare_report, compute_errors, mae_stats, quantile_sorted, quantile_summary, Axis,
    ErrorRecord,
};
use gnss_setnet::geodesy::{geodetic_to_ecef, ned_rotation_at, GeodeticPosition};
use gnss_setnet::rng::SeedStream;
use gnss_setnet::NedVector;
use proptest::prelude::*;
use rand::Rng;

fn records(errors: &[[f64; 3]]) -> Vec<ErrorRecord> {
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| ErrorRecord {
            epoch_id: i as u64,
            method: "m".into(),
            error_ned: NedVector::from_array(*e),
        })
        .collect()
}

/// Quantile read off the piecewise-linear curve through `(i / (n - 1), x_i)`.
fn curve_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let step = 1.0 / (n - 1) as f64;
    for i in 0..n - 1 {
        let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
        if p <= b + 1e-15 {
            return sorted[i] + (p - a) / step * (sorted[i + 1] - sorted[i]);
        }
    }
    sorted[n - 1]
}

#[test]
fn quantiles_match_curve_oracle() {
    let mut rng = SeedStream::new(17).rng();
    for n in 1..=200 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        v.sort_by(f64::total_cmp);
        for p in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
            let ours = quantile_sorted(&v, p);
            let oracle = curve_quantile(&v, p);
            assert!((ours - oracle).abs() < 1e-9, "n {n} p {p}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn cdf_median_crosses_quantile_median() {
    let mut rng = SeedStream::new(3).rng();
    let errs: Vec<[f64; 3]> = (0..501)
        .map(|_| [rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)])
        .collect();
    let r = records(&errs);
    for axis in Axis::ALL {
        let cdf = cdf_curve(&r, axis).unwrap();
        let q = quantile_summary(&r, axis).unwrap();
        // odd n: the median is the order statistic where the CDF first reaches one half
        let first = cdf.iter().find(|(_, f)| *f >= 0.5).unwrap();
        assert_eq!(first.0, q.median);
        assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(cdf.last().unwrap().1, 1.0);
    }
}

#[test]
fn uniform_errors_have_analytic_moments() {
    let mut rng = SeedStream::new(99).rng();
    let errs: Vec<[f64; 3]> = (0..100_000)
        .map(|_| [rng.random_range(-15.0..=15.0), rng.random_range(-15.0..=15.0), rng.random_range(-15.0..=15.0)])
        .collect();
    let s = mae_stats(&records(&errs)).unwrap();
    assert_eq!(s.count, 100_000);
    for k in 0..3 {
        assert!((s.mae[k] - 7.5).abs() < 0.1, "mae {}", s.mae[k]);
        assert!((4.2..=5.1).contains(&s.std[k]), "std {}", s.std[k]);
        // exact value of the std of |U(-15, 15)|
        assert!((s.std[k] - 75f64.sqrt() / 2.0).abs() < 0.05);
    }
}

#[test]
fn errors_are_expressed_at_truth() {
    let truth = geodetic_to_ecef(GeodeticPosition::from_degrees(-20.0, 140.0, 100.0));
    let rot = ned_rotation_at(truth).unwrap();
    let offset = NedVector::new(3.0, -4.0, 12.0);
    let estimate = truth + rot.ned_to_ecef(offset);
    let truths = HashMap::from([(5u64, truth)]);
    let r = compute_errors(&[(5, estimate)], &truths, "x").unwrap();
    assert_eq!(r[0].method, "x");
    assert!((r[0].error_ned - offset).norm() < 1e-9);
    assert_eq!(compute_errors(&[(6, estimate)], &truths, "x").unwrap_err().exit_code(), 3);
}

#[test]
fn report_files_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let a = records(&[[1.0, -2.0, 3.0], [-1.0, 2.0, -5.0]]);
    let b = records(&[[0.5, 0.5, 0.5]]);
    let files = compare_report(&[("a".into(), a), ("b b".into(), b)], dir.path()).unwrap();
    let summary = std::fs::read_to_string(&files.summary).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "a,2,1,0,2,0,4,1");
    assert_eq!(files.cdfs.len(), 6);
    assert!(files.cdfs.iter().any(|p| p.ends_with("cdf_b_b_down.csv")));
    let cdf = std::fs::read_to_string(dir.path().join("cdf_a_down.csv")).unwrap();
    assert_eq!(cdf.lines().collect::<Vec<_>>(), ["method,axis,error_m,fraction", "a,down,3,0.5", "a,down,5,1"]);
    let q: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.quantiles).unwrap()).unwrap();
    assert_eq!(q.as_array().unwrap().len(), 6);
    assert_eq!(q[0]["method"], "a");
    assert_eq!(q[0]["axis"], "north");
}

#[test]
fn empty_input_rejected() {
    assert!(mae_stats(&[]).is_err());
    assert!(cdf_curve(&[], Axis::North).is_err());
    assert!(compare_report(&[], std::path::Path::new("/nonexistent")).is_err());
}

proptest! {
    #[test]
    fn quantile_summary_ordered(v in prop::collection::vec(-1e3f64..1e3, 1..300)) {
        let errs: Vec<[f64; 3]> = v.iter().map(|x| [*x, 0.0, 0.0]).collect();
        let q = quantile_summary(&records(&errs), Axis::North).unwrap();
        prop_assert!(q.whisker_low <= q.q1 && q.q1 <= q.median && q.median <= q.q3 && q.q3 <= q.whisker_high);
        let above = v.iter().filter(|x| x.abs() > q.whisker_high).count();
        prop_assert_eq!(q.outliers_high, above);
        prop_assert!(q.outliers() <= v.len());
    }

    #[test]
    fn mae_is_mean_abs(v in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        let errs: Vec<[f64; 3]> = v.iter().map(|x| [0.0, *x, 0.0]).collect();
        let s = mae_stats(&records(&errs)).unwrap();
        let expected = v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
        prop_assert!((s.mae[1] - expected).abs() < 1e-9 * (1.0 + expected));
        prop_assert_eq!(s.mae[0], 0.0);
    }
}
