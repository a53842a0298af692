//! Exact posteriors and exact bagged moments for the Gaussian location
//! model: observations x_n i.i.d. N(theta, V) with prior theta ~ N(0, V0).
//!
//! With M (possibly weighted) observations and weighted mean x_bar, the
//! posterior is N(R_M x_bar, V_M) where
//!
//! ```text
//! V_M = (V0^-1 + M V^-1)^-1          (posterior covariance)
//! R_M = M V_M V^-1                   (shrinkage toward the prior mean)
//! ```
//!
//! The bagged posterior over multinomial resamples of size M has exact
//! moments
//!
//! ```text
//! mean = R_M x_bar_N
//! cov  = V_M + M^-1 R_M S_N R_M'
//! ```
//!
//! where S_N is the 1/N-normalized sample covariance of the data. These are
//! the law-of-total-expectation/covariance moments of the exact mixture over
//! all N^M bootstrap datasets, so they hold for every N and M, not just
//! asymptotically.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::core::{CountVector, Dataset};
use crate::error::{Error, Result};

/// Gaussian location model with known observation covariance `V` and prior
/// covariance `V0`, both D x D symmetric positive-definite.
#[derive(Debug, Clone)]
pub struct GaussianLocationModel {
    v: DMatrix<f64>,
    v0: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    v0_inv: DMatrix<f64>,
}

impl GaussianLocationModel {
    pub fn new(v: DMatrix<f64>, v0: DMatrix<f64>) -> Result<Self> {
        if !v.is_square() || !v0.is_square() || v.nrows() != v0.nrows() {
            return Err(Error::DimensionMismatch {
                expected: v.nrows(),
                got: v0.nrows(),
            });
        }
        let v_inv = spd_inverse(&v, "observation covariance V")?;
        let v0_inv = spd_inverse(&v0, "prior covariance V0")?;
        Ok(GaussianLocationModel { v, v0, v_inv, v0_inv })
    }

    /// Convenience constructor for the univariate model.
    pub fn scalar(v: f64, v0: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, v),
            DMatrix::from_element(1, 1, v0),
        )
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn v0(&self) -> &DMatrix<f64> {
        &self.v0
    }

    /// Posterior covariance V_M for effective sample size `m`.
    fn posterior_cov(&self, m: f64) -> Result<DMatrix<f64>> {
        let lambda = &self.v0_inv + &self.v_inv * m;
        spd_inverse(&lambda, "posterior precision")
    }

    /// Shrinkage operator R_M = M V_M V^-1, the map taking the weighted data
    /// mean to the posterior mean.
    fn shrinkage(&self, v_m: &DMatrix<f64>, m: f64) -> DMatrix<f64> {
        v_m * &self.v_inv * m
    }
}

/// Closed-form Gaussian posterior N(mean, cov).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    n_eff: u64,
}

impl GaussianPosterior {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Effective observation count used in the update.
    pub fn n_eff(&self) -> u64 {
        self.n_eff
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density of N(mean, cov) at `theta`.
    pub fn logpdf(&self, theta: &[f64]) -> Result<f64> {
        let d = self.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        let chol = spd_cholesky(&self.cov, "posterior covariance")?;
        let delta = DVector::from_row_slice(theta) - &self.mean;
        let half_logdet: f64 = chol.l().diagonal().iter().map(|x| x.ln()).sum();
        let solved = chol.solve(&delta);
        let quad = delta.dot(&solved);
        Ok(-0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - half_logdet - 0.5 * quad)
    }
}

fn spd_cholesky(m: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    m.clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { context })
}

fn spd_inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    Ok(spd_cholesky(m, context)?.inverse())
}

/// Weighted sum of rows and total weight. `None` weights mean uniform.
fn weighted_sum(data: &Dataset, weights: Option<&CountVector>) -> Result<(DVector<f64>, f64)> {
    let d = data.width();
    let mut sum = DVector::zeros(d);
    let total = match weights {
        None => {
            for row in data.rows() {
                for (acc, x) in sum.iter_mut().zip(row) {
                    *acc += x;
                }
            }
            data.len() as f64
        }
        Some(w) => {
            if w.len() != data.len() {
                return Err(Error::DimensionMismatch { expected: data.len(), got: w.len() });
            }
            for (row, &k) in data.rows().zip(w.counts()) {
                if k == 0 {
                    continue;
                }
                let kf = k as f64;
                for (acc, x) in sum.iter_mut().zip(row) {
                    *acc += kf * x;
                }
            }
            w.total() as f64
        }
    };
    if total < 1.0 {
        return Err(Error::InvalidArgument("effective observation count must be >= 1".into()));
    }
    Ok((sum, total))
}

/// Exact posterior for the Gaussian location model given (weighted) data.
pub fn gl_posterior(
    model: &GaussianLocationModel,
    data: &Dataset,
    weights: Option<&CountVector>,
) -> Result<GaussianPosterior> {
    if data.width() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: data.width() });
    }
    let (sum, m) = weighted_sum(data, weights)?;
    let v_m = model.posterior_cov(m)?;
    // mean = V_M V^-1 (sum of weighted rows) = R_M x_bar_w
    let mean = &v_m * (&model.v_inv * &sum);
    Ok(GaussianPosterior { mean, cov: v_m, n_eff: m as u64 })
}

/// Exact mean and covariance of the bagged posterior with bootstrap size
/// `m`, without enumerating or sampling bootstrap datasets.
pub fn gl_bagged_moments_exact(
    model: &GaussianLocationModel,
    data: &Dataset,
    m: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if data.width() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: data.width() });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("bootstrap size m must be >= 1".into()));
    }
    let n = data.len() as f64;
    let mf = m as f64;
    let (sum, _) = weighted_sum(data, None)?;

    let v_m = model.posterior_cov(mf)?;
    // mean = R_M x_bar_N, evaluated as V_M V^-1 sum * (m/n) so that m = n
    // reproduces the standard posterior mean bit-for-bit.
    let mean = &v_m * (&model.v_inv * &sum) * (mf / n);

    // 1/N-normalized sample covariance S_N.
    let x_bar = &sum / n;
    let d = model.dim();
    let mut s_n = DMatrix::zeros(d, d);
    for row in data.rows() {
        let delta = DVector::from_row_slice(row) - &x_bar;
        s_n += &delta * delta.transpose();
    }
    s_n /= n;

    let r_m = model.shrinkage(&v_m, mf);
    let cov = &v_m + (&r_m * s_n * r_m.transpose()) / mf;
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_ds(xs: &[f64]) -> Dataset {
        Dataset::from_scalars(xs).unwrap()
    }

    /// 1-D grid-integration oracle: moments of the normalized product
    /// prior(theta) * prod_n N(x_n; theta, v).
    fn grid_posterior_moments(v: f64, v0: f64, xs: &[f64]) -> (f64, f64) {
        let log_post = |t: f64| -> f64 {
            let mut lp = -t * t / (2.0 * v0);
            for &x in xs {
                lp += -(x - t) * (x - t) / (2.0 * v);
            }
            lp
        };
        let (lo, hi, steps) = (-30.0, 30.0, 600_000usize);
        let h = (hi - lo) / steps as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=steps {
            let t = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let p = w * log_post(t).exp();
            z += p;
            m1 += p * t;
            m2 += p * t * t;
        }
        let mean = m1 / z;
        (mean, m2 / z - mean * mean)
    }

    #[test]
    fn univariate_posterior_matches_hand_values_and_grid_oracle() {
        let model = GaussianLocationModel::scalar(1.0, 1.0).unwrap();
        let post = gl_posterior(&model, &scalar_ds(&[1.0, 3.0]), None).unwrap();
        assert_relative_eq!(post.mean()[0], 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(post.cov()[(0, 0)], 1.0 / 3.0, max_relative = 1e-12);

        let (gm, gv) = grid_posterior_moments(1.0, 1.0, &[1.0, 3.0]);
        assert_relative_eq!(post.mean()[0], gm, max_relative = 1e-8);
        assert_relative_eq!(post.cov()[(0, 0)], gv, max_relative = 1e-6);
    }

    #[test]
    fn flat_prior_limit_recovers_sample_mean() {
        let model = GaussianLocationModel::scalar(1.0, 1e12).unwrap();
        let post = gl_posterior(&model, &scalar_ds(&[1.0, 3.0]), None).unwrap();
        assert!((post.mean()[0] - 2.0).abs() < 1e-6);
        assert!((post.cov()[(0, 0)] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn count_weights_equal_replicated_rows() {
        let model = GaussianLocationModel::scalar(1.0, 1.0).unwrap();
        let weighted = gl_posterior(
            &model,
            &scalar_ds(&[1.0, 3.0]),
            Some(&CountVector::new(vec![2, 0], 2).unwrap()),
        )
        .unwrap();
        let replicated = gl_posterior(&model, &scalar_ds(&[1.0, 1.0]), None).unwrap();
        assert_eq!(weighted.mean()[0], replicated.mean()[0]);
        assert_eq!(weighted.cov()[(0, 0)], replicated.cov()[(0, 0)]);
    }

    #[test]
    fn bagged_moments_match_full_enumeration_hand_case() {
        // data {0, 2}, m = 2: mixture over four bootstrap datasets gives
        // mean 2/3 and variance 1/3 + (1/2)(2/3)^2 * S with S = 1.
        let model = GaussianLocationModel::scalar(1.0, 1.0).unwrap();
        let (mean, cov) = gl_bagged_moments_exact(&model, &scalar_ds(&[0.0, 2.0]), 2).unwrap();
        assert_relative_eq!(mean[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(cov[(0, 0)], 5.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn single_observation_bag_is_degenerate() {
        let model = GaussianLocationModel::scalar(2.0, 3.0).unwrap();
        let data = scalar_ds(&[1.7]);
        for m in [1usize, 2, 5] {
            let (mean, cov) = gl_bagged_moments_exact(&model, &data, m).unwrap();
            let stacked = scalar_ds(&vec![1.7; m]);
            let post = gl_posterior(&model, &stacked, None).unwrap();
            assert_relative_eq!(mean[0], post.mean()[0], max_relative = 1e-13);
            assert_relative_eq!(cov[(0, 0)], post.cov()[(0, 0)], max_relative = 1e-13);
        }
    }

    #[test]
    fn m_equals_n_identities() {
        let model = GaussianLocationModel::scalar(1.0, 1.0).unwrap();
        let data = scalar_ds(&[0.4, -1.1, 2.2, 0.9, -0.3]);
        let n = data.len();
        let post = gl_posterior(&model, &data, None).unwrap();
        let (bag_mean, bag_cov) = gl_bagged_moments_exact(&model, &data, n).unwrap();
        // Bagged mean equals the standard posterior mean exactly.
        assert_eq!(bag_mean[0], post.mean()[0]);
        // Bagged covariance = V_N + N^-1 R_N S_N R_N.
        let xbar: f64 = data.rows().map(|r| r[0]).sum::<f64>() / n as f64;
        let s_n: f64 = data.rows().map(|r| (r[0] - xbar).powi(2)).sum::<f64>() / n as f64;
        let v_n = post.cov()[(0, 0)];
        let r_n = n as f64 * v_n; // R_N = N V_N V^-1 with V = 1
        let want = v_n + r_n * s_n * r_n / n as f64;
        assert_relative_eq!(bag_cov[(0, 0)], want, max_relative = 1e-13);
    }

    #[test]
    fn law_of_large_numbers_for_sample_covariance_term() {
        // i.i.d. N(0, 9) data, V = V0 = 1, m = n: bagged variance is close
        // to V_N + 9/N for large N.
        use crate::core::derive_stream;
        use rand_distr::{Distribution, Normal};
        let mut stream = derive_stream(2024, 0);
        let normal = Normal::new(0.0, 3.0).unwrap();
        let n = 5000usize;
        let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut stream)).collect();
        let model = GaussianLocationModel::scalar(1.0, 1.0).unwrap();
        let data = scalar_ds(&xs);
        let post = gl_posterior(&model, &data, None).unwrap();
        let (_, cov) = gl_bagged_moments_exact(&model, &data, n).unwrap();
        let want = post.cov()[(0, 0)] + 9.0 / n as f64;
        assert!(
            (cov[(0, 0)] - want).abs() < 0.1 * want,
            "got {}, want about {want}",
            cov[(0, 0)]
        );
    }

    #[test]
    fn multivariate_posterior_shrinks_toward_zero() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let v0 = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let model = GaussianLocationModel::new(v, v0).unwrap();
        let data = Dataset::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let post = gl_posterior(&model, &data, None).unwrap();
        let xbar = DVector::from_column_slice(&[1.0, 2.0]);
        // Posterior mean lies strictly between 0 and the data mean.
        for i in 0..2 {
            assert!(post.mean()[i] > 0.0 && post.mean()[i] < xbar[i]);
        }
        // Covariance is dominated by the prior covariance (Loewner order).
        let diff = model.v0() - post.cov();
        assert!(diff.clone().cholesky().is_some());
    }

    #[test]
    fn non_spd_matrix_is_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let good = DMatrix::identity(2, 2);
        assert!(matches!(
            GaussianLocationModel::new(bad, good).unwrap_err(),
            Error::NotPositiveDefinite { .. }
        ));
    }

    #[test]
    fn logpdf_is_gaussian() {
        let model = GaussianLocationModel::scalar(1.0, 1e12).unwrap();
        let post = gl_posterior(&model, &scalar_ds(&[0.0]), None).unwrap();
        // Nearly flat prior, one observation at 0: posterior is close to
        // N(0, 1), whose log density at 1 is a frozen reference value.
        assert!((post.logpdf(&[1.0]).unwrap() - (-1.4189385332046727)).abs() < 1e-6);
    }
}
