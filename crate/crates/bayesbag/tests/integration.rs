//! Cross-module behavior: diagnostics driven by exact conjugate moments,
//! and report serialization.

use bayesbag::conjugate::{gl_bagged_moments_exact, gl_posterior, GaussianLocationModel};
use bayesbag::core::{derive_stream, Dataset};
use bayesbag::diagnostics::{MismatchReport, VariancePair};
use rand_distr::{Distribution, Normal};

/// Index values for one scalar Gaussian-location setup across replicate
/// datasets, computed from exact posterior and bagged variances at M = N.
fn gl_index_samples(true_sd: f64, n: usize, replicates: usize, seed: u64) -> Vec<Option<f64>> {
    let model = GaussianLocationModel::scalar(1.0, 1.0).unwrap();
    let normal = Normal::new(0.0, true_sd).unwrap();
    (0..replicates)
        .map(|r| {
            let mut stream = derive_stream(seed, r as u64);
            let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut stream)).collect();
            let data = Dataset::from_scalars(&xs).unwrap();
            let v_n = gl_posterior(&model, &data, None).unwrap().cov()[(0, 0)];
            let v_bag = gl_bagged_moments_exact(&model, &data, n).unwrap().1[(0, 0)];
            let vp = VariancePair::new(v_n, v_bag, n).with_prior_variance(1.0);
            let report = MismatchReport::from_pairs(&[("theta".into(), vp)]).unwrap();
            report.class_fs.index
        })
        .collect()
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values[values.len() / 2]
}

#[test]
fn well_specified_location_model_has_index_near_zero() {
    let samples = gl_index_samples(1.0, 500, 50, 42);
    let mut vals: Vec<f64> = samples.iter().filter_map(|i| *i).collect();
    assert!(vals.len() >= 45, "too many NA values: {}", 50 - vals.len());
    let med = median(&mut vals);
    assert!(med.abs() < 0.15, "median index {med}");
}

#[test]
fn variance_misspecification_pushes_index_toward_one() {
    // Data variance 9x the modeled variance: the standard posterior is
    // overconfident and the index concentrates near 1 - 2/(1+9) = 0.8.
    let samples = gl_index_samples(3.0, 500, 50, 43);
    let mut vals: Vec<f64> = samples.iter().filter_map(|i| *i).collect();
    if !vals.is_empty() {
        let med = median(&mut vals);
        assert!(med > 0.5, "median index {med}");
    }
    // Either way, no replicate should look calibrated.
    let calibrated = samples
        .iter()
        .filter(|i| matches!(i, Some(v) if v.abs() < 0.2))
        .count();
    assert_eq!(calibrated, 0);
}

#[test]
fn mismatch_report_serializes_with_stable_field_names() {
    let vp = VariancePair::new(0.1, 0.2, 50).with_prior_variance(1.0);
    let report = MismatchReport::from_pairs(&[("f".into(), vp)]).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    for key in ["schema_version", "n", "functions", "class_asym", "class_fs"] {
        assert!(json.get(key).is_some(), "missing key {key}");
    }
    let f0 = &json["functions"][0];
    for key in [
        "label",
        "v_n",
        "v_n_bag",
        "v0",
        "v0_gt_v_n",
        "sigma_hat_sq",
        "s_hat_sq",
        "m_hat_asym",
        "index_asym",
        "m_hat_fs",
        "m_hat_fs_valid",
        "index_fs",
    ] {
        assert!(f0.get(key).is_some(), "missing function key {key}");
    }
    // Round-trips through JSON.
    let back: MismatchReport = serde_json::from_value(json).unwrap();
    assert_eq!(back.n, 50);
    assert_eq!(back.functions.len(), 1);
}
