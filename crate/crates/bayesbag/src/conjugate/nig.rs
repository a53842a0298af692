//! Conjugate normal-inverse-gamma linear regression.
//!
//! Model, with responses y_n and regressor rows z_n in R^D:
//!
//! ```text
//! sigma^2           ~ InvGamma(a0, b0)
//! beta_d | sigma^2  ~ N(0, sigma^2 / lambda)      d = 1..D
//! y_n | z_n         ~ N(z_n' beta, sigma^2)
//! ```
//!
//! The parameter vector is theta = (log sigma^2, beta_1, ..., beta_D).
//! Given integer weights w (bootstrap counts, or all ones), the posterior is
//! normal-inverse-gamma with
//!
//! ```text
//! Lambda_N = lambda I + Z' diag(w) Z
//! mu_N     = Lambda_N^-1 Z' diag(w) y
//! a_N      = a0 + (sum w) / 2
//! b_N      = b0 + (y' diag(w) y - mu_N' Lambda_N mu_N) / 2
//! ```
//!
//! b_N is evaluated in the algebraically identical residual form
//! `b0 + (sum_n w_n (y_n - z_n' mu)^2 + lambda mu' mu) / 2`, which cannot go
//! negative from cancellation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::core::{CountVector, Dataset};
use crate::error::{Error, Result};
use crate::special::trigamma;

/// Hyperparameters of the normal-inverse-gamma regression model.
#[derive(Debug, Clone, Copy)]
pub struct NigModel {
    pub a0: f64,
    pub b0: f64,
    pub lambda: f64,
}

impl NigModel {
    pub fn new(a0: f64, b0: f64, lambda: f64) -> Result<Self> {
        if !(a0 > 0.0 && b0 > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidArgument(
                "NIG model requires a0 > 0, b0 > 0, lambda > 0".into(),
            ));
        }
        Ok(NigModel { a0, b0, lambda })
    }

    /// The prior as a degenerate "posterior" with no data: mu = 0,
    /// Lambda = lambda I, a = a0, b = b0.
    pub fn prior(&self, d: usize) -> NigPosterior {
        NigPosterior {
            a_n: self.a0,
            b_n: self.b0,
            mu_n: DVector::zeros(d),
            precision_n: DMatrix::identity(d, d) * self.lambda,
        }
    }

    /// Prior variance of beta_d, `(b0/(a0-1))/lambda`; needs a0 > 1.
    pub fn prior_beta_variance(&self) -> Result<f64> {
        if self.a0 <= 1.0 {
            return Err(Error::UndefinedMoment("prior beta variance needs a0 > 1"));
        }
        Ok(self.b0 / (self.a0 - 1.0) / self.lambda)
    }

    /// Prior variance of log sigma^2, `trigamma(a0)`.
    pub fn prior_logsigma2_variance(&self) -> f64 {
        trigamma(self.a0)
    }
}

impl Default for NigModel {
    /// The defaults used throughout the regression study: a0 = 2, b0 = 1,
    /// lambda = 1.
    fn default() -> Self {
        NigModel { a0: 2.0, b0: 1.0, lambda: 1.0 }
    }
}

/// Normal-inverse-gamma posterior summary.
#[derive(Debug, Clone, PartialEq)]
pub struct NigPosterior {
    a_n: f64,
    b_n: f64,
    mu_n: DVector<f64>,
    precision_n: DMatrix<f64>,
}

impl NigPosterior {
    pub fn a_n(&self) -> f64 {
        self.a_n
    }

    pub fn b_n(&self) -> f64 {
        self.b_n
    }

    pub fn mu_n(&self) -> &DVector<f64> {
        &self.mu_n
    }

    pub fn precision_n(&self) -> &DMatrix<f64> {
        &self.precision_n
    }

    /// Number of regression coefficients D.
    pub fn dim(&self) -> usize {
        self.mu_n.len()
    }

    fn chol(&self) -> Result<Cholesky<f64, Dyn>> {
        self.precision_n
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { context: "NIG posterior precision" })
    }
}

/// Weighted conjugate update. `None` weights mean uniform (all ones).
pub fn nig_posterior(
    model: &NigModel,
    data: &Dataset,
    weights: Option<&CountVector>,
) -> Result<NigPosterior> {
    if data.width() < 2 {
        return Err(Error::InvalidArgument(
            "regression rows must be (y, z_1, ..., z_D) with D >= 1".into(),
        ));
    }
    let d = data.width() - 1;
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), got: w.len() });
        }
    }
    let weight_of = |n: usize| -> f64 {
        match weights {
            None => 1.0,
            Some(w) => w.counts()[n] as f64,
        }
    };

    let mut total = 0.0;
    let mut lambda_n = DMatrix::identity(d, d) * model.lambda;
    let mut zty = DVector::zeros(d);
    for n in 0..data.len() {
        let w = weight_of(n);
        if w == 0.0 {
            continue;
        }
        total += w;
        let z = DVector::from_row_slice(data.regressors(n));
        lambda_n += &z * z.transpose() * w;
        zty += &z * (w * data.response(n));
    }
    if total < 1.0 {
        return Err(Error::InvalidArgument("effective observation count must be >= 1".into()));
    }

    let chol = lambda_n
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { context: "NIG posterior precision" })?;
    let mu_n = chol.solve(&zty);

    // Residual form of b_N; equals b0 + (y'Wy - mu'Lambda mu)/2 exactly.
    let mut ssr = model.lambda * mu_n.dot(&mu_n);
    for n in 0..data.len() {
        let w = weight_of(n);
        if w == 0.0 {
            continue;
        }
        let fitted: f64 = data
            .regressors(n)
            .iter()
            .zip(mu_n.iter())
            .map(|(z, m)| z * m)
            .sum();
        let resid = data.response(n) - fitted;
        ssr += w * resid * resid;
    }

    Ok(NigPosterior {
        a_n: model.a0 + total / 2.0,
        b_n: model.b0 + ssr / 2.0,
        mu_n,
        precision_n: lambda_n,
    })
}

/// Mean and covariance of the marginal posterior of beta (a multivariate t
/// with 2 a_N degrees of freedom): mean mu_N, cov (b_N/(a_N - 1)) Lambda^-1.
pub fn nig_beta_mean_cov(post: &NigPosterior) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if post.a_n <= 1.0 {
        return Err(Error::UndefinedMoment("beta covariance needs a_N > 1"));
    }
    let cov = post.chol()?.inverse() * (post.b_n / (post.a_n - 1.0));
    Ok((post.mu_n.clone(), cov))
}

/// Log density of the marginal posterior of beta at `beta`.
///
/// This is the multivariate t with nu = 2 a_N degrees of freedom, location
/// mu_N, and scale matrix (b_N / a_N) Lambda_N^-1; sigma^2 is integrated
/// out.
pub fn nig_beta_logpdf(post: &NigPosterior, beta: &[f64]) -> Result<f64> {
    let d = post.dim();
    if beta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: beta.len() });
    }
    let chol = post.chol()?;
    let delta = DVector::from_row_slice(beta) - &post.mu_n;
    // delta' Lambda delta via the factor L: |L' delta|^2.
    let quad = (chol.l().transpose() * &delta).norm_squared();
    let half_logdet_lambda: f64 = chol.l().diagonal().iter().map(|x| x.ln()).sum();
    let (a, b) = (post.a_n, post.b_n);
    let df = d as f64;
    Ok(ln_gamma(a + df / 2.0) - ln_gamma(a)
        - 0.5 * df * (2.0 * std::f64::consts::PI * b).ln()
        + half_logdet_lambda
        - (a + df / 2.0) * (1.0 + quad / (2.0 * b)).ln())
}

/// Mean and variance of log sigma^2 under the posterior:
/// `log b_N - digamma(a_N)` and `trigamma(a_N)`.
pub fn nig_logsigma2_moments(post: &NigPosterior) -> (f64, f64) {
    (post.b_n.ln() - digamma(post.a_n), trigamma(post.a_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reg_ds(pairs: &[(f64, Vec<f64>)]) -> Dataset {
        let y: Vec<f64> = pairs.iter().map(|(y, _)| *y).collect();
        let z: Vec<Vec<f64>> = pairs.iter().map(|(_, z)| z.clone()).collect();
        Dataset::from_regression(&y, &z).unwrap()
    }

    #[test]
    fn zero_row_adds_only_to_a() {
        let model = NigModel::default();
        let post = nig_posterior(&model, &reg_ds(&[(0.0, vec![0.0])]), None).unwrap();
        assert_eq!(post.mu_n()[0], 0.0);
        assert_eq!(post.precision_n()[(0, 0)], 1.0);
        assert_eq!(post.a_n(), 2.5);
        assert_eq!(post.b_n(), 1.0);
    }

    #[test]
    fn single_informative_row_hand_update() {
        let model = NigModel::default();
        let post = nig_posterior(&model, &reg_ds(&[(2.0, vec![1.0])]), None).unwrap();
        assert_eq!(post.precision_n()[(0, 0)], 2.0);
        assert_relative_eq!(post.mu_n()[0], 1.0, max_relative = 1e-15);
        assert_eq!(post.a_n(), 2.5);
        // b = 1 + ((2 - 1)^2 + 1)/2 = 2, same as 1 + (4 - 2)/2.
        assert_relative_eq!(post.b_n(), 2.0, max_relative = 1e-15);
    }

    /// 2-D grid integration of prior x likelihood over (beta, log sigma^2)
    /// as an independent check of the single-row update.
    #[test]
    fn grid_oracle_confirms_single_row_posterior() {
        let (a0, b0, lambda) = (2.0f64, 1.0f64, 1.0f64);
        let (y, z) = (2.0, 1.0);
        let log_joint = |beta: f64, logs2: f64| -> f64 {
            let s2 = logs2.exp();
            // InvGamma(a0,b0) density in log sigma^2 coordinates picks up a
            // Jacobian factor of s2.
            let lp_s2 = a0 * b0.ln() - ln_gamma(a0) - (a0 + 1.0) * s2.ln() - b0 / s2 + logs2;
            let lp_beta = -0.5 * (2.0 * std::f64::consts::PI * s2 / lambda).ln()
                - lambda * beta * beta / (2.0 * s2);
            let ll = -0.5 * (2.0 * std::f64::consts::PI * s2).ln()
                - (y - z * beta) * (y - z * beta) / (2.0 * s2);
            lp_s2 + lp_beta + ll
        };
        // The beta marginal is a t with 5 degrees of freedom; its
        // polynomial tails need a wide grid for 1e-6 accuracy in the mean.
        let (blo, bhi, bsteps) = (-60.0, 60.0, 6000usize);
        let (slo, shi, ssteps) = (-12.0, 14.0, 1300usize);
        let hb = (bhi - blo) / bsteps as f64;
        let hs = (shi - slo) / ssteps as f64;
        let (mut zsum, mut bsum, mut bsq) = (0.0, 0.0, 0.0);
        for i in 0..=bsteps {
            let beta = blo + i as f64 * hb;
            for j in 0..=ssteps {
                let logs2 = slo + j as f64 * hs;
                let p = log_joint(beta, logs2).exp();
                zsum += p;
                bsum += p * beta;
                bsq += p * beta * beta;
            }
        }
        let mean = bsum / zsum;
        let var = bsq / zsum - mean * mean;

        let model = NigModel::default();
        let post = nig_posterior(&model, &reg_ds(&[(2.0, vec![1.0])]), None).unwrap();
        let (mu, cov) = nig_beta_mean_cov(&post).unwrap();
        assert_relative_eq!(mu[0], mean, max_relative = 1e-6);
        assert_relative_eq!(cov[(0, 0)], var, max_relative = 1e-4);
    }

    #[test]
    fn doubled_weights_equal_duplicated_rows() {
        let model = NigModel::default();
        let rows = [(1.0, vec![0.5, -1.0]), (-0.3, vec![1.5, 0.2]), (0.8, vec![-0.7, 0.9])];
        let data = reg_ds(&rows);
        let doubled: Vec<(f64, Vec<f64>)> =
            rows.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        let dup = nig_posterior(&model, &reg_ds(&doubled), None).unwrap();
        let weighted = nig_posterior(
            &model,
            &data,
            Some(&CountVector::new(vec![2, 2, 2], 6).unwrap()),
        )
        .unwrap();
        assert_relative_eq!(weighted.b_n(), dup.b_n(), max_relative = 1e-12);
        assert_eq!(weighted.a_n(), dup.a_n());
        assert_relative_eq!(weighted.mu_n()[0], dup.mu_n()[0], max_relative = 1e-12);
        assert_relative_eq!(weighted.mu_n()[1], dup.mu_n()[1], max_relative = 1e-12);
    }

    #[test]
    fn all_zero_weights_rejected() {
        let model = NigModel::default();
        let err = nig_posterior(
            &model,
            &reg_ds(&[(1.0, vec![1.0])]),
            Some(&CountVector::new(vec![0], 0).unwrap()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn prior_moments_at_defaults() {
        let model = NigModel::default();
        let prior = model.prior(3);
        let (mu, cov) = nig_beta_mean_cov(&prior).unwrap();
        for i in 0..3 {
            assert_eq!(mu[i], 0.0);
            assert_eq!(cov[(i, i)], 1.0);
        }
    }

    #[test]
    fn example_posterior_beta_moments() {
        let model = NigModel::default();
        let post = nig_posterior(&model, &reg_ds(&[(2.0, vec![1.0])]), None).unwrap();
        let (mu, cov) = nig_beta_mean_cov(&post).unwrap();
        assert_relative_eq!(mu[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(cov[(0, 0)], 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn beta_cov_scales_inversely_with_lambda() {
        for lambda in [0.5, 2.0, 8.0] {
            let model = NigModel::new(2.0, 1.0, lambda).unwrap();
            // Rows with z = 0 leave Lambda = lambda I and b = b0.
            let post = nig_posterior(&model, &reg_ds(&[(0.7, vec![0.0])]), None).unwrap();
            let (_, cov) = nig_beta_mean_cov(&post).unwrap();
            let b_n = post.b_n();
            let a_n = post.a_n();
            assert_relative_eq!(cov[(0, 0)], b_n / (a_n - 1.0) / lambda, max_relative = 1e-14);
        }
    }

    #[test]
    fn undefined_variance_when_a_too_small() {
        let model = NigModel::new(0.4, 1.0, 1.0).unwrap();
        let err = nig_beta_mean_cov(&model.prior(1)).unwrap_err();
        assert!(matches!(err, Error::UndefinedMoment(_)));
    }

    #[test]
    fn prior_beta_logpdf_matches_student_t_and_quadrature() {
        // Prior-only, D = 1, defaults: marginal of beta is a Student t with
        // 4 degrees of freedom and scale sqrt(1/2). Reference value at 0
        // from 30-digit quadrature of the scale mixture.
        let model = NigModel::default();
        let prior = model.prior(1);
        let got = nig_beta_logpdf(&prior, &[0.0]).unwrap();
        assert_relative_eq!(got, -0.6342556627317536, max_relative = 1e-12);

        // In-test quadrature of the scale mixture at a nonzero point.
        let beta = 0.8;
        let mix = |s2: f64| -> f64 {
            let n = (-beta * beta / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
            let ig = s2.powf(-3.0) * (-1.0 / s2).exp(); // a0=2, b0=1 up to 1/Gamma(2)=1
            n * ig
        };
        let (lo, hi, steps) = (1e-6f64, 400.0, 4_000_000usize);
        let h = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            integral += w * mix(lo + i as f64 * h);
        }
        integral *= h;
        let got = nig_beta_logpdf(&prior, &[beta]).unwrap();
        assert_relative_eq!(got, integral.ln(), max_relative = 1e-6);
    }

    #[test]
    fn beta_logpdf_peaks_at_mu() {
        let model = NigModel::default();
        let post =
            nig_posterior(&model, &reg_ds(&[(2.0, vec![1.0]), (1.0, vec![0.5])]), None).unwrap();
        let mu = post.mu_n()[0];
        let at_mu = nig_beta_logpdf(&post, &[mu]).unwrap();
        for delta in [-1.0, -0.1, 0.1, 1.0] {
            assert!(nig_beta_logpdf(&post, &[mu + delta]).unwrap() < at_mu);
        }
    }

    #[test]
    fn beta_density_integrates_to_one() {
        let model = NigModel::default();
        let post = nig_posterior(&model, &reg_ds(&[(2.0, vec![1.0])]), None).unwrap();
        let (lo, hi, steps) = (-60.0f64, 60.0, 600_000usize);
        let h = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            integral += w * nig_beta_logpdf(&post, &[lo + i as f64 * h]).unwrap().exp();
        }
        integral *= h;
        assert!((integral - 1.0).abs() < 1e-6, "integral = {integral}");
    }

    #[test]
    fn logsigma2_moments_frozen_values() {
        let model = NigModel::default();
        let post = nig_posterior(&model, &reg_ds(&[(0.0, vec![0.0])]), None).unwrap();
        let (mean, var) = nig_logsigma2_moments(&post);
        // a_N = 2.5, b_N = 1: mean = -digamma(2.5), var = trigamma(2.5).
        assert_relative_eq!(mean, -0.7031566406452432, max_relative = 1e-12);
        assert_relative_eq!(var, 0.49035775610023486, max_relative = 1e-12);
    }

    #[test]
    fn logsigma2_moments_monte_carlo_oracle() {
        // sigma^2 ~ InvGamma(2.5, 1): draw as 1 / Gamma(2.5, scale 1).
        use crate::core::derive_stream;
        use rand_distr::{Distribution, Gamma};
        let mut stream = derive_stream(99, 0);
        let gamma = Gamma::new(2.5, 1.0).unwrap();
        let draws = 10_000_000usize;
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for _ in 0..draws {
            let ls2 = -(gamma.sample(&mut stream) as f64).ln();
            s1 += ls2;
            s2 += ls2 * ls2;
        }
        let mean = s1 / draws as f64;
        let var = s2 / draws as f64 - mean * mean;
        assert!((mean - (-0.7031566406452432)).abs() < 1e-3);
        assert!((var - 0.49035775610023486).abs() < 1e-3);
    }

    #[test]
    fn logsigma2_variance_free_of_b_and_vanishing_in_a() {
        let model = NigModel::default();
        let p1 = nig_posterior(&model, &reg_ds(&[(0.0, vec![0.0])]), None).unwrap();
        let p2 = nig_posterior(&model, &reg_ds(&[(3.0, vec![0.0])]), None).unwrap();
        assert_ne!(p1.b_n(), p2.b_n());
        assert_eq!(nig_logsigma2_moments(&p1).1, nig_logsigma2_moments(&p2).1);
        // Var -> 0 as a_N -> infinity.
        assert!(trigamma(1e9) < 2e-9);
    }

    #[test]
    fn ols_limit_with_vanishing_prior() {
        // lambda -> 0, a0 -> 0, b0 -> 0 recover ordinary least squares.
        let model = NigModel::new(1e-8, 1e-8, 1e-8).unwrap();
        let rows = [
            (1.1, vec![1.0, 0.1]),
            (1.9, vec![2.0, -0.4]),
            (3.2, vec![3.0, 0.3]),
            (3.9, vec![4.0, 0.0]),
            (5.1, vec![5.0, -0.2]),
        ];
        let data = reg_ds(&rows);
        let post = nig_posterior(&model, &data, None).unwrap();

        // OLS by normal equations.
        let mut ztz = DMatrix::zeros(2, 2);
        let mut zty = DVector::zeros(2);
        for (y, z) in &rows {
            let zv = DVector::from_row_slice(z);
            ztz += &zv * zv.transpose();
            zty += zv * *y;
        }
        let ols = ztz.lu().solve(&zty).unwrap();
        for i in 0..2 {
            assert!((post.mu_n()[i] - ols[i]).abs() < 1e-6);
        }
    }
}
