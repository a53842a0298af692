//! Optimal bootstrap-size estimators and the model-data mismatch index.
//!
//! Given the standard posterior variance `v_N` and the bagged posterior
//! variance `v_N^*` of a scalar function of interest (bagged with M = N),
//! the asymptotically optimal bootstrap size is estimated by
//!
//! ```text
//! M_inf = v_N^* / (v_N^* - v_N) * N
//! ```
//!
//! and, when the prior variance `v0` of the function is known, the
//! finite-sample estimator corrects for prior influence via
//!
//! ```text
//! sigma2 = N v0 v_N / (v0 - v_N)
//! s2     = v0^2 / (v0 - v_N)^2 * (v_N^* - v_N) * N
//! M_fs   = N/2 + N sigma2/(2 s2) - sigma2/v0
//!          + sqrt{ (N/2 + N sigma2/(2 s2))^2 - N sigma2/v0 }
//! ```
//!
//! falling back to `M_fs = N` when the expression is ill-defined or
//! nonpositive. The mismatch index is `I = 2N/M - 1` when `M` lies in
//! `[N, infinity)` and `NA` otherwise; `I` near 0 indicates calibration,
//! positive values indicate an overconfident standard posterior, and `NA`
//! indicates severe mismatch or a failure of the estimator's assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used before dividing by variance differences.
const REL_TOL: f64 = 1e-12;

/// The variance inputs to the estimators for one function of interest.
///
/// `v_n_bag` must be measured with bootstrap size M = N. `v0` is the prior
/// variance of the function, required only for the finite-sample path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePair {
    pub v_n: f64,
    pub v_n_bag: f64,
    pub n: usize,
    pub v0: Option<f64>,
}

impl VariancePair {
    pub fn new(v_n: f64, v_n_bag: f64, n: usize) -> Self {
        VariancePair { v_n, v_n_bag, n, v0: None }
    }

    pub fn with_prior_variance(mut self, v0: f64) -> Self {
        self.v0 = Some(v0);
        self
    }
}

/// Asymptotically optimal bootstrap size `v_N^* / (v_N^* - v_N) * N`.
///
/// Returns `+inf` when the two variances agree to within tolerance, and a
/// negative value when `v_N^* < v_N`; both become `NA` downstream.
pub fn m_hat_asymptotic(vp: &VariancePair) -> f64 {
    let denom = vp.v_n_bag - vp.v_n;
    if denom.abs() <= REL_TOL * vp.v_n_bag.abs().max(vp.v_n.abs()) {
        return f64::INFINITY;
    }
    vp.v_n_bag / denom * vp.n as f64
}

/// Finite-sample estimators of the model variance and sandwich variance.
///
/// Requires `v0`; errors when `v0` is missing or equals `v_N` to within
/// tolerance (the estimator's precondition). `s_hat_sq` may legitimately be
/// nonpositive, which invalidates the finite-sample bootstrap size.
pub fn sigma_s_estimators(vp: &VariancePair) -> Result<(f64, f64)> {
    let v0 = vp.v0.ok_or(Error::MissingPriorVariance)?;
    let n = vp.n as f64;
    let denom = v0 - vp.v_n;
    if denom.abs() <= REL_TOL * v0.abs().max(vp.v_n.abs()) {
        return Err(Error::InvalidArgument(
            "prior variance v0 must differ from the posterior variance".into(),
        ));
    }
    let sigma_hat_sq = n * v0 * vp.v_n / denom;
    let s_hat_sq = (v0 / denom) * (v0 / denom) * (vp.v_n_bag - vp.v_n) * n;
    Ok((sigma_hat_sq, s_hat_sq))
}

/// A finite-sample bootstrap-size estimate with its validity flag. When
/// invalid, the value falls back to N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsEstimate {
    pub value: f64,
    pub valid: bool,
}

/// Finite-sample optimal bootstrap size.
///
/// Invalid (with value N) when the sandwich estimate `s_hat_sq` is
/// nonpositive, the model-variance estimate is nonpositive (prior variance
/// below posterior variance), the discriminant is negative, or the root is
/// nonpositive.
pub fn m_hat_finite_sample(vp: &VariancePair) -> Result<FsEstimate> {
    let v0 = vp.v0.ok_or(Error::MissingPriorVariance)?;
    let n = vp.n as f64;
    let invalid = FsEstimate { value: n, valid: false };
    let (sigma_hat_sq, s_hat_sq) = match sigma_s_estimators(vp) {
        Ok(pair) => pair,
        Err(Error::MissingPriorVariance) => return Err(Error::MissingPriorVariance),
        Err(_) => return Ok(invalid),
    };
    if s_hat_sq <= 0.0 || sigma_hat_sq <= 0.0 {
        return Ok(invalid);
    }
    let h = n / 2.0 + n * sigma_hat_sq / (2.0 * s_hat_sq);
    let disc = h * h - n * sigma_hat_sq / v0;
    if disc < 0.0 {
        return Ok(invalid);
    }
    let value = h - sigma_hat_sq / v0 + disc.sqrt();
    if value <= 0.0 || !value.is_finite() {
        return Ok(invalid);
    }
    Ok(FsEstimate { value, valid: true })
}

/// The model-data mismatch index `2N/M - 1`, or `NA` (None) when the
/// estimate is invalid, infinite, or below N.
pub fn mismatch_index(m_hat: f64, valid: bool, n: usize) -> Option<f64> {
    if !valid || !m_hat.is_finite() || m_hat < n as f64 {
        return None;
    }
    Some(2.0 * n as f64 / m_hat - 1.0)
}

/// Class-level diagnostics over a family of functions: the most
/// conservative (smallest) bootstrap size, and the index computed from it.
///
/// Any member whose own index is NA makes the class index NA; the returned
/// size is the infimum over the valid members (None if there are none).
pub fn class_diagnostics(members: &[(f64, bool)], n: usize) -> Result<(Option<f64>, Option<f64>)> {
    if members.is_empty() {
        return Err(Error::EmptyFunctionClass);
    }
    let m_hat_class = members
        .iter()
        .filter(|(_, valid)| *valid)
        .map(|(m, _)| *m)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
    let all_valid = members.iter().all(|(_, valid)| *valid);
    let index = match (all_valid, m_hat_class) {
        (true, Some(m)) => mismatch_index(m, true, n),
        _ => None,
    };
    Ok((m_hat_class, index))
}

/// Per-function diagnostics record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionDiagnostics {
    pub label: String,
    pub v_n: f64,
    pub v_n_bag: f64,
    pub v0: Option<f64>,
    /// Whether the prior variance exceeds the posterior variance, as the
    /// finite-sample estimators assume. None when v0 is absent.
    pub v0_gt_v_n: Option<bool>,
    pub sigma_hat_sq: Option<f64>,
    pub s_hat_sq: Option<f64>,
    /// None encodes an infinite estimate (bagged and standard variances
    /// equal to within tolerance).
    pub m_hat_asym: Option<f64>,
    pub index_asym: Option<f64>,
    pub m_hat_fs: Option<f64>,
    pub m_hat_fs_valid: Option<bool>,
    pub index_fs: Option<f64>,
}

/// Class-level summary for one estimator path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassSummary {
    pub m_hat: Option<f64>,
    pub index: Option<f64>,
}

/// The full mismatch report over a function class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MismatchReport {
    pub schema_version: u32,
    pub n: usize,
    pub functions: Vec<FunctionDiagnostics>,
    pub class_asym: ClassSummary,
    pub class_fs: ClassSummary,
}

impl MismatchReport {
    /// Builds the report from labelled variance pairs (all sharing one N).
    pub fn from_pairs(pairs: &[(String, VariancePair)]) -> Result<MismatchReport> {
        if pairs.is_empty() {
            return Err(Error::EmptyFunctionClass);
        }
        let n = pairs[0].1.n;
        if pairs.iter().any(|(_, vp)| vp.n != n) {
            return Err(Error::InvalidArgument("variance pairs disagree on n".into()));
        }

        let mut functions = Vec::with_capacity(pairs.len());
        let mut asym_members = Vec::with_capacity(pairs.len());
        let mut fs_members = Vec::with_capacity(pairs.len());
        for (label, vp) in pairs {
            let m_asym = m_hat_asymptotic(vp);
            let index_asym = mismatch_index(m_asym, true, n);
            asym_members.push((m_asym, index_asym.is_some()));

            let (v0_flag, sigma, s, m_fs, fs_valid, index_fs) = match vp.v0 {
                None => (None, None, None, None, None, None),
                Some(v0) => {
                    let (sigma, s) = match sigma_s_estimators(vp) {
                        Ok((a, b)) => (Some(a), Some(b)),
                        Err(_) => (None, None),
                    };
                    let fs = m_hat_finite_sample(vp)?;
                    let index_fs = mismatch_index(fs.value, fs.valid, n);
                    fs_members.push((fs.value, index_fs.is_some()));
                    (
                        Some(v0 > vp.v_n),
                        sigma,
                        s,
                        Some(fs.value),
                        Some(fs.valid),
                        index_fs,
                    )
                }
            };
            if vp.v0.is_none() {
                // A member without a prior variance cannot support the
                // finite-sample path; treat it as an invalid class member.
                fs_members.push((f64::NAN, false));
            }

            functions.push(FunctionDiagnostics {
                label: label.clone(),
                v_n: vp.v_n,
                v_n_bag: vp.v_n_bag,
                v0: vp.v0,
                v0_gt_v_n: v0_flag,
                sigma_hat_sq: sigma,
                s_hat_sq: s,
                m_hat_asym: m_asym.is_finite().then_some(m_asym),
                index_asym,
                m_hat_fs: m_fs,
                m_hat_fs_valid: fs_valid,
                index_fs,
            });
        }

        let (asym_m, asym_i) = class_diagnostics(&asym_members, n)?;
        let (fs_m, fs_i) = class_diagnostics(&fs_members, n)?;
        Ok(MismatchReport {
            schema_version: 1,
            n,
            functions,
            class_asym: ClassSummary { m_hat: asym_m, index: asym_i },
            class_fs: ClassSummary { m_hat: fs_m, index: fs_i },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn asymptotic_estimator_hand_values() {
        assert_eq!(m_hat_asymptotic(&VariancePair::new(0.1, 0.2, 50)), 100.0);
        assert_eq!(m_hat_asymptotic(&VariancePair::new(0.1, 0.1, 50)), f64::INFINITY);
        // Bagged variance below the standard variance gives a negative
        // (nonsensical) size, which the index maps to NA.
        let neg = m_hat_asymptotic(&VariancePair::new(0.2, 0.1, 50));
        assert_eq!(neg, -50.0);
        assert_eq!(mismatch_index(neg, true, 50), None);
    }

    #[test]
    fn sigma_s_hand_values() {
        let vp = VariancePair::new(0.1, 0.2, 50).with_prior_variance(1.0);
        let (sigma, s) = sigma_s_estimators(&vp).unwrap();
        assert_relative_eq!(sigma, 50.0 * 0.1 / 0.9, max_relative = 1e-12);
        assert_relative_eq!(s, (1.0 / 0.81) * 0.1 * 50.0, max_relative = 1e-12);
    }

    #[test]
    fn sigma_s_recover_asymptotic_in_flat_prior_limit() {
        let vp = VariancePair::new(0.1, 0.2, 50).with_prior_variance(1e12);
        let (sigma, s) = sigma_s_estimators(&vp).unwrap();
        assert_relative_eq!(sigma, 50.0 * 0.1, max_relative = 1e-6);
        assert_relative_eq!(s, 0.1 * 50.0, max_relative = 1e-6);
        // And s = 0 when the variances agree.
        let vp = VariancePair::new(0.1, 0.1, 50).with_prior_variance(1.0);
        assert_eq!(sigma_s_estimators(&vp).unwrap().1, 0.0);
    }

    #[test]
    fn sigma_s_require_prior_variance() {
        assert!(matches!(
            sigma_s_estimators(&VariancePair::new(0.1, 0.2, 50)).unwrap_err(),
            Error::MissingPriorVariance
        ));
    }

    #[test]
    fn finite_sample_hand_value_and_root_check() {
        let vp = VariancePair::new(0.01, 0.02, 100).with_prior_variance(1.0);
        let fs = m_hat_finite_sample(&vp).unwrap();
        assert!(fs.valid);
        assert!((fs.value - 197.5).abs() < 0.1, "got {}", fs.value);

        // Independent root check: M_fs solves
        // (R_M sigma2 + R_M^2 s2)/M = s2/N with R_M = (1 + sigma2/(v0 M))^-1.
        let (sigma2, s2) = sigma_s_estimators(&vp).unwrap();
        let (v0, n) = (1.0, 100.0);
        let residual = |m: f64| {
            let r = 1.0 / (1.0 + sigma2 / (v0 * m));
            (r * sigma2 + r * r * s2) / m - s2 / n
        };
        let (mut lo, mut hi) = (1.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(fs.value, 0.5 * (lo + hi), max_relative = 1e-6);
    }

    #[test]
    fn finite_sample_falls_back_when_s_is_zero() {
        let vp = VariancePair::new(0.01, 0.01, 100).with_prior_variance(1.0);
        let fs = m_hat_finite_sample(&vp).unwrap();
        assert_eq!(fs, FsEstimate { value: 100.0, valid: false });
    }

    #[test]
    fn finite_sample_matches_asymptotic_for_flat_prior() {
        let vp = VariancePair::new(0.01, 0.02, 100).with_prior_variance(1e12);
        let fs = m_hat_finite_sample(&vp).unwrap();
        assert!(fs.valid);
        let asym = m_hat_asymptotic(&vp);
        assert!((fs.value - asym).abs() < 1e-3 * asym, "{} vs {asym}", fs.value);
    }

    #[test]
    fn index_hand_values() {
        assert_eq!(mismatch_index(100.0, true, 50), Some(0.0));
        assert_eq!(mismatch_index(50.0, true, 50), Some(1.0));
        assert_eq!(mismatch_index(-100.0, true, 50), None);
        assert_eq!(mismatch_index(f64::INFINITY, true, 50), None);
        assert_eq!(mismatch_index(120.0, false, 50), None);
        assert_eq!(mismatch_index(49.9, true, 50), None);
    }

    #[test]
    fn class_takes_infimum_and_propagates_na() {
        let n = 50;
        let (m, i) = class_diagnostics(&[(100.0, true), (150.0, true)], n).unwrap();
        assert_eq!(m, Some(100.0));
        assert_eq!(i, Some(0.0));

        let (m, i) = class_diagnostics(&[(75.0, true), (f64::NAN, false)], n).unwrap();
        assert_eq!(m, Some(75.0));
        assert_eq!(i, None);

        assert!(matches!(
            class_diagnostics(&[], n).unwrap_err(),
            Error::EmptyFunctionClass
        ));
    }

    #[test]
    fn report_has_one_entry_per_function_and_na_rules() {
        let pairs = vec![
            ("log_sigma2".to_string(), VariancePair::new(0.1, 0.2, 50).with_prior_variance(1.0)),
            ("beta_1".to_string(), VariancePair::new(0.05, 0.11, 50).with_prior_variance(1.0)),
            ("beta_2".to_string(), VariancePair::new(0.2, 0.1, 50).with_prior_variance(1.0)),
        ];
        let report = MismatchReport::from_pairs(&pairs).unwrap();
        assert_eq!(report.functions.len(), 3);
        // beta_2 has bagged variance below the standard one: NA everywhere.
        assert_eq!(report.functions[2].index_asym, None);
        assert_eq!(report.class_asym.index, None);
        // Without the offending entry the class is fine.
        let report = MismatchReport::from_pairs(&pairs[..2]).unwrap();
        assert!(report.class_asym.index.is_some());
        assert!(report.class_fs.index.is_some());
    }

    proptest! {
        /// Non-NA indices always lie in (-1, 1].
        #[test]
        fn index_range(v_n in 1e-6f64..1e3, ratio in 0.0f64..10.0, n in 1usize..10_000) {
            let vp = VariancePair::new(v_n, v_n * (1.0 + ratio), n);
            let m = m_hat_asymptotic(&vp);
            if let Some(i) = mismatch_index(m, true, n) {
                prop_assert!(i > -1.0 && i <= 1.0);
            }
        }

        /// Increasing the bagged variance strictly decreases the size
        /// estimate toward N and strictly increases the index.
        #[test]
        fn monotone_in_bagged_variance(
            v_n in 1e-3f64..10.0,
            r1 in 0.1f64..5.0,
            extra in 0.1f64..5.0,
            n in 10usize..1000,
        ) {
            let lo = VariancePair::new(v_n, v_n * (1.0 + r1), n);
            let hi = VariancePair::new(v_n, v_n * (1.0 + r1 + extra), n);
            let (m_lo, m_hi) = (m_hat_asymptotic(&lo), m_hat_asymptotic(&hi));
            prop_assert!(m_hi < m_lo);
            prop_assert!(m_hi >= n as f64);
            let (i_lo, i_hi) = (
                mismatch_index(m_lo, true, n).unwrap(),
                mismatch_index(m_hi, true, n).unwrap(),
            );
            prop_assert!(i_hi > i_lo);
        }

        /// Scaling the function by c scales all variances by c^2 and leaves
        /// the size estimates and index unchanged; exactly so for powers of
        /// two, where the scaling is lossless in floating point.
        #[test]
        fn scale_invariance_power_of_two(
            v_n in 1e-3f64..10.0,
            ratio in 0.1f64..5.0,
            exp in -20i32..20,
            n in 10usize..1000,
        ) {
            let c2 = (2.0f64).powi(exp);
            let base = VariancePair::new(v_n, v_n * (1.0 + ratio), n).with_prior_variance(v_n * 8.0);
            let scaled = VariancePair::new(base.v_n * c2, base.v_n_bag * c2, n)
                .with_prior_variance(base.v0.unwrap() * c2);
            prop_assert_eq!(m_hat_asymptotic(&base), m_hat_asymptotic(&scaled));
            let (fa, fb) = (
                m_hat_finite_sample(&base).unwrap(),
                m_hat_finite_sample(&scaled).unwrap(),
            );
            prop_assert_eq!(fa.valid, fb.valid);
            prop_assert!((fa.value - fb.value).abs() <= 1e-12 * fa.value.abs().max(1.0));
        }

        /// General scale factors are invariant to floating-point rounding.
        #[test]
        fn scale_invariance_general(
            v_n in 1e-3f64..10.0,
            ratio in 0.1f64..5.0,
            c in 1e-3f64..1e3,
            n in 10usize..1000,
        ) {
            let c2 = c * c;
            let base = VariancePair::new(v_n, v_n * (1.0 + ratio), n).with_prior_variance(v_n * 8.0);
            let scaled = VariancePair::new(base.v_n * c2, base.v_n_bag * c2, n)
                .with_prior_variance(base.v0.unwrap() * c2);
            let (ma, mb) = (m_hat_asymptotic(&base), m_hat_asymptotic(&scaled));
            prop_assert!((ma - mb).abs() <= 1e-9 * ma.abs());
        }
    }
}
