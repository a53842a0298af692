//! Linear-regression simulation study: data generators, optimal-parameter
//! targets, RSE/LPD metrics, and the diagnose-then-rerun protocol.
//!
//! Each replicate generates a dataset, fits the standard NIG posterior,
//! bags with M = N to compute the mismatch report over the coordinate
//! projections of theta = (log sigma^2, beta), and then re-bags with
//! M = M_fs (class infimum, rounded, clamped at N) when the class index is
//! available or M = 2N when it is NA. Relative squared error of the
//! posterior mean of beta and the log posterior density at the optimal
//! coefficient vector are recorded for both the standard and final bagged
//! posteriors.
//!
//! The standard LPD is the exact marginal density of beta (sigma^2
//! integrated out). The bagged LPD is the density of a Gaussian moment
//! match to the bagged posterior of beta; the bagged posterior is
//! asymptotically Gaussian, and the moment match summarizes it without the
//! lumpiness a B-component mixture shows in ten dimensions.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{nig_beta_logpdf, nig_posterior, NigModel, NigPosterior};
use crate::core::rng::Stream;
use crate::core::{child_seed, derive_stream, BootstrapPlan, Dataset, FunctionOfInterest};
use crate::diagnostics::{MismatchReport, VariancePair};
use crate::engine::{
    bag, mixture_mean_cov, mixture_mean_var, normal_logpdf, BaggedPosterior, PosteriorSummary,
};
use crate::error::{Error, Result};

/// Regressor distribution used to simulate data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorSetting {
    /// i.i.d. standard normal entries.
    Uncorrelated,
    /// Correlated rows with unit variance but mixed tail behavior: odd
    /// (1-based) coordinates are rescaled t variables, even ones normal.
    Correlated,
}

/// True regression function used to simulate responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionFn {
    Linear,
    /// Componentwise cube: f(z) = (z_1^3, ..., z_D^3).
    Nonlinear,
}

/// True coefficient vector used to simulate responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefSetting {
    /// beta_d = 2^((5-d)/2) for d = 1..D.
    Dense,
    /// k coefficients equal to 1 at evenly spread positions, 0 elsewhere.
    Sparse(usize),
}

impl fmt::Display for RegressorSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorSetting::Uncorrelated => write!(f, "uncorrelated"),
            RegressorSetting::Correlated => write!(f, "correlated"),
        }
    }
}

impl fmt::Display for RegressionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressionFn::Linear => write!(f, "linear"),
            RegressionFn::Nonlinear => write!(f, "nonlinear"),
        }
    }
}

impl fmt::Display for CoefSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefSetting::Dense => write!(f, "dense"),
            CoefSetting::Sparse(k) => write!(f, "{k}-sparse"),
        }
    }
}

/// Configuration of one simulation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub regressors: RegressorSetting,
    pub regression_fn: RegressionFn,
    pub coefs: CoefSetting,
    pub lambda: f64,
    pub a0: f64,
    pub b0: f64,
    pub replicates: usize,
    pub b: usize,
    pub master_seed: u64,
    /// Noise standard deviation; 1 is the study value, 0 is a sanity hook.
    pub noise_sd: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 50,
            d: 10,
            regressors: RegressorSetting::Uncorrelated,
            regression_fn: RegressionFn::Linear,
            coefs: CoefSetting::Dense,
            lambda: 1.0,
            a0: 2.0,
            b0: 1.0,
            replicates: 50,
            b: 100,
            master_seed: 0,
            noise_sd: 1.0,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.replicates == 0 || self.b == 0 {
            return Err(Error::InvalidArgument("n, d, replicates, b must all be >= 1".into()));
        }
        if !(self.a0 > 1.0) {
            return Err(Error::InvalidArgument(
                "a0 must exceed 1 so the prior coefficient variance exists".into(),
            ));
        }
        if !(self.b0 > 0.0 && self.lambda > 0.0) {
            return Err(Error::InvalidArgument("b0 and lambda must be positive".into()));
        }
        if let CoefSetting::Sparse(k) = self.coefs {
            if k == 0 || k > self.d {
                return Err(Error::InvalidArgument(format!(
                    "sparse k must satisfy 1 <= k <= d, got k={k}, d={}",
                    self.d
                )));
            }
        }
        if self.noise_sd < 0.0 {
            return Err(Error::InvalidArgument("noise sd must be nonnegative".into()));
        }
        Ok(())
    }

    fn model(&self) -> Result<NigModel> {
        NigModel::new(self.a0, self.b0, self.lambda)
    }
}

/// Metrics for a single simulated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub rse_std: f64,
    pub rse_bag: f64,
    pub lpd_std: f64,
    pub lpd_bag: f64,
    pub mismatch: MismatchReport,
    pub m_initial: usize,
    pub m_used: usize,
    pub na_fallback: bool,
}

/// True coefficient vector for a setting.
pub fn gen_coefficients(setting: CoefSetting, d: usize) -> Result<Vec<f64>> {
    match setting {
        CoefSetting::Dense => Ok((1..=d)
            .map(|j| 2f64.powf((5.0 - j as f64) / 2.0))
            .collect()),
        CoefSetting::Sparse(k) => {
            if k == 0 || k > d {
                return Err(Error::InvalidArgument(format!(
                    "sparse k must satisfy 1 <= k <= d, got k={k}, d={d}"
                )));
            }
            let support: Vec<usize> = (1..=k)
                .map(|j| (j as f64 * (d as f64 + 0.5) / (k as f64 + 1.0)).floor() as usize)
                .collect();
            Ok((1..=d)
                .map(|j| if support.contains(&j) { 1.0 } else { 0.0 })
                .collect())
        }
    }
}

/// Degrees of freedom of the chi-squared mixing variable in the correlated
/// regressor generator.
const CORRELATED_DF: f64 = 10.0;

/// Simulates an n x d regressor matrix.
///
/// The correlated setting draws, per row, xi ~ chi^2(10) and then a
/// Gaussian vector with kernel covariance exp(-(d-d')^2/64), dividing odd
/// (1-based) coordinates by sqrt(xi/8) so they become unit-variance
/// rescaled t(10) variables while even coordinates stay standard normal.
/// The per-row draw order is xi first, then the d Gaussian innovations.
pub fn gen_regressors(
    setting: RegressorSetting,
    n: usize,
    d: usize,
    stream: &mut Stream,
) -> Vec<Vec<f64>> {
    match setting {
        RegressorSetting::Uncorrelated => (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(stream)).collect())
            .collect(),
        RegressorSetting::Correlated => {
            let h = CORRELATED_DF;
            let kernel = DMatrix::from_fn(d, d, |i, j| {
                let diff = i as f64 - j as f64;
                (-diff * diff / 64.0).exp()
            });
            let chol = Cholesky::new(kernel).expect("Gaussian kernel matrix is SPD");
            let l = chol.l();
            let chi2 = ChiSquared::new(h).expect("valid degrees of freedom");
            (0..n)
                .map(|_| {
                    let xi = chi2.sample(stream);
                    let scale_odd = (xi / (h - 2.0)).sqrt();
                    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(stream));
                    let w = &l * z;
                    (0..d)
                        .map(|i| {
                            // 1-based coordinate i+1 is odd iff i is even.
                            let denom = if i % 2 == 0 { scale_odd } else { 1.0 };
                            w[i] / denom
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Simulates responses y_n = f(z_n)' beta + noise_sd * eps_n.
pub fn gen_responses(
    z: &[Vec<f64>],
    beta_dag: &[f64],
    regression_fn: RegressionFn,
    noise_sd: f64,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    z.iter()
        .map(|row| {
            if row.len() != beta_dag.len() {
                return Err(Error::DimensionMismatch {
                    expected: beta_dag.len(),
                    got: row.len(),
                });
            }
            let signal: f64 = row
                .iter()
                .zip(beta_dag)
                .map(|(zi, bi)| match regression_fn {
                    RegressionFn::Linear => zi * bi,
                    RegressionFn::Nonlinear => zi * zi * zi * bi,
                })
                .sum();
            let eps: f64 = StandardNormal.sample(stream);
            Ok(signal + noise_sd * eps)
        })
        .collect()
}

/// The coefficient vector minimizing population squared loss.
///
/// Linear data: beta itself, for either regressor setting. Uncorrelated
/// nonlinear data: 3 beta, from E[Z^4] = 3 for standard normal regressors.
/// The correlated-nonlinear combination has no closed form and is not used.
pub fn beta_opt(
    regressors: RegressorSetting,
    regression_fn: RegressionFn,
    beta_dag: &[f64],
) -> Result<Vec<f64>> {
    match (regressors, regression_fn) {
        (_, RegressionFn::Linear) => Ok(beta_dag.to_vec()),
        (RegressorSetting::Uncorrelated, RegressionFn::Nonlinear) => {
            Ok(beta_dag.iter().map(|b| 3.0 * b).collect())
        }
        (RegressorSetting::Correlated, RegressionFn::Nonlinear) => Err(Error::InvalidArgument(
            "correlated-nonlinear has no closed-form optimal coefficients".into(),
        )),
    }
}

/// Relative squared error |beta_hat - beta_opt|^2 / |beta_opt|^2.
pub fn rse(beta_hat: &[f64], beta_opt: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_opt.len() {
        return Err(Error::DimensionMismatch { expected: beta_opt.len(), got: beta_hat.len() });
    }
    let denom: f64 = beta_opt.iter().map(|b| b * b).sum();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("optimal coefficient vector must be nonzero".into()));
    }
    let num: f64 = beta_hat
        .iter()
        .zip(beta_opt)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / denom)
}

/// Simulates the dataset for one replicate; a pure function of
/// (config, rep_index).
pub fn gen_dataset(cfg: &SimConfig, rep_index: usize) -> Result<Dataset> {
    let rep_seed = child_seed(cfg.master_seed, rep_index as u64);
    let beta_dag = gen_coefficients(cfg.coefs, cfg.d)?;
    let mut z_stream = derive_stream(rep_seed, 0);
    let z = gen_regressors(cfg.regressors, cfg.n, cfg.d, &mut z_stream);
    let mut y_stream = derive_stream(rep_seed, 1);
    let y = gen_responses(&z, &beta_dag, cfg.regression_fn, cfg.noise_sd, &mut y_stream)?;
    Dataset::from_regression(&y, &z)
}

/// Labelled variance pairs for the coordinate projections of
/// theta = (log sigma^2, beta_1, ..., beta_D), with conjugate prior
/// variances attached for the finite-sample path.
fn projection_variance_pairs(
    model: &NigModel,
    std_post: &NigPosterior,
    bagged: &BaggedPosterior,
    n: usize,
) -> Result<Vec<(String, VariancePair)>> {
    let d = std_post.dim();
    let std_summary = PosteriorSummary::Nig(std_post.clone());
    let mut pairs = Vec::with_capacity(d + 1);
    for j in 0..=d {
        let f = FunctionOfInterest::coordinate(j);
        let (_, v_n) = std_summary.f_mean_var(&f)?;
        let (_, v_bag) = mixture_mean_var(bagged, &f)?;
        let (label, v0) = if j == 0 {
            ("log_sigma2".to_string(), model.prior_logsigma2_variance())
        } else {
            (format!("beta_{j}"), model.prior_beta_variance()?)
        };
        pairs.push((label, VariancePair::new(v_n, v_bag, n).with_prior_variance(v0)));
    }
    Ok(pairs)
}

/// Mixture mean and covariance of the beta block of theta.
fn bagged_beta_moments(bagged: &BaggedPosterior, d: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (mean, cov) = mixture_mean_cov(bagged)?;
    Ok((
        mean.rows(1, d).into_owned(),
        cov.view((1, 1), (d, d)).into_owned(),
    ))
}

/// Runs the full diagnose-then-rerun protocol on one simulated dataset.
pub fn run_replicate(cfg: &SimConfig, rep_index: usize) -> Result<ReplicateResult> {
    cfg.validate()?;
    let model = cfg.model()?;
    let data = gen_dataset(cfg, rep_index)?;
    let rep_seed = child_seed(cfg.master_seed, rep_index as u64);

    let std_post = nig_posterior(&model, &data, None)?;

    // First pass: bag with M = N and diagnose.
    let plan1 = BootstrapPlan::new(cfg.n, cfg.b, child_seed(rep_seed, 2))?;
    let bag1 = bag(&model, &data, &plan1)?;
    let pairs = projection_variance_pairs(&model, &std_post, &bag1, cfg.n)?;
    let mismatch = MismatchReport::from_pairs(&pairs)?;

    // Second pass: the class index picks the bootstrap size.
    let (m_used, na_fallback) = match (mismatch.class_fs.index, mismatch.class_fs.m_hat) {
        (Some(_), Some(m_hat)) => ((m_hat.round() as usize).max(cfg.n), false),
        _ => (2 * cfg.n, true),
    };
    let plan2 = BootstrapPlan::new(m_used, cfg.b, child_seed(rep_seed, 3))?;
    let bag2 = bag(&model, &data, &plan2)?;

    let beta_dag = gen_coefficients(cfg.coefs, cfg.d)?;
    let beta_circ = beta_opt(cfg.regressors, cfg.regression_fn, &beta_dag)?;
    let beta_std: Vec<f64> = std_post.mu_n().iter().copied().collect();
    let (bag_mean, bag_cov) = bagged_beta_moments(&bag2, cfg.d)?;
    let beta_bag: Vec<f64> = bag_mean.iter().copied().collect();

    Ok(ReplicateResult {
        rse_std: rse(&beta_std, &beta_circ)?,
        rse_bag: rse(&beta_bag, &beta_circ)?,
        lpd_std: nig_beta_logpdf(&std_post, &beta_circ)?,
        lpd_bag: normal_logpdf(&bag_mean, &bag_cov, &beta_circ)?,
        mismatch,
        m_initial: cfg.n,
        m_used,
        na_fallback,
    })
}

/// One row of a study: a replicate under one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub config_index: usize,
    pub rep_index: usize,
    pub result: ReplicateResult,
}

/// All rows of a study over a configuration grid.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub configs: Vec<SimConfig>,
    pub rows: Vec<StudyRow>,
}

/// Runs every configuration for its configured number of replicates,
/// in parallel, merged in (config, replicate) order.
pub fn run_study(configs: &[SimConfig]) -> Result<StudyResult> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("study grid must be nonempty".into()));
    }
    for cfg in configs {
        cfg.validate()?;
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(ci, cfg)| (0..cfg.replicates).map(move |r| (ci, r)))
        .collect();
    let rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(config_index, rep_index)| {
            let result = run_replicate(&configs[config_index], rep_index)
                .map_err(|e| e.in_replicate(rep_index))?;
            Ok(StudyRow { config_index, rep_index, result })
        })
        .collect::<Result<_>>()?;
    Ok(StudyResult { configs: configs.to_vec(), rows })
}

/// Formats a float with 17 significant digits so parsing recovers the
/// exact value; non-finite values print as NA.
pub fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NA".to_string()
    }
}

/// The study CSV header.
pub const STUDY_CSV_HEADER: &str = "schema_version,config_index,regressors,regression_fn,coefs,\
lambda,a0,b0,n,d,b,master_seed,rep,m_initial,m_used,na_fallback,index_fs_class,\
rse_std,rse_bag,rse_diff,lpd_std,lpd_bag,lpd_diff";

/// Renders the study as CSV: one row per replicate per configuration, with
/// paired bag-minus-standard differences per metric.
pub fn study_csv(study: &StudyResult) -> String {
    let mut out = String::from(STUDY_CSV_HEADER);
    out.push('\n');
    for row in &study.rows {
        let cfg = &study.configs[row.config_index];
        let r = &row.result;
        let index_fs = match r.mismatch.class_fs.index {
            Some(i) => csv_f64(i),
            None => "NA".to_string(),
        };
        out.push_str(&format!(
            "1,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.config_index,
            cfg.regressors,
            cfg.regression_fn,
            cfg.coefs,
            csv_f64(cfg.lambda),
            csv_f64(cfg.a0),
            csv_f64(cfg.b0),
            cfg.n,
            cfg.d,
            cfg.b,
            cfg.master_seed,
            row.rep_index,
            r.m_initial,
            r.m_used,
            u8::from(r.na_fallback),
            index_fs,
            csv_f64(r.rse_std),
            csv_f64(r.rse_bag),
            csv_f64(r.rse_bag - r.rse_std),
            csv_f64(r.lpd_std),
            csv_f64(r.lpd_bag),
            csv_f64(r.lpd_bag - r.lpd_std),
        ));
    }
    out
}

/// Quartile summary of one metric across replicates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

fn quartiles(values: &[f64]) -> Quartiles {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    Quartiles { q25: q(0.25), median: q(0.5), q75: q(0.75) }
}

/// Per-configuration summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: SimConfig,
    pub replicates: usize,
    /// Fraction of replicates whose class index was NA (and therefore fell
    /// back to M = 2N).
    pub na_fraction: f64,
    pub rse_std: Quartiles,
    pub rse_bag: Quartiles,
    pub rse_diff: Quartiles,
    pub lpd_std: Quartiles,
    pub lpd_bag: Quartiles,
    pub lpd_diff: Quartiles,
    pub index_fs_class: Option<Quartiles>,
}

/// The study summary emitted as JSON next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySummary {
    pub schema_version: u32,
    pub configs: Vec<ConfigSummary>,
}

/// Medians, quartiles, and NA fractions per configuration.
pub fn summarize(study: &StudyResult) -> StudySummary {
    let configs = study
        .configs
        .iter()
        .enumerate()
        .map(|(ci, cfg)| {
            let rows: Vec<&ReplicateResult> = study
                .rows
                .iter()
                .filter(|r| r.config_index == ci)
                .map(|r| &r.result)
                .collect();
            let collect = |f: &dyn Fn(&ReplicateResult) -> f64| -> Vec<f64> {
                rows.iter().map(|r| f(r)).collect()
            };
            let na = rows.iter().filter(|r| r.na_fallback).count();
            let indices: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.mismatch.class_fs.index)
                .collect();
            ConfigSummary {
                config: *cfg,
                replicates: rows.len(),
                na_fraction: na as f64 / rows.len().max(1) as f64,
                rse_std: quartiles(&collect(&|r| r.rse_std)),
                rse_bag: quartiles(&collect(&|r| r.rse_bag)),
                rse_diff: quartiles(&collect(&|r| r.rse_bag - r.rse_std)),
                lpd_std: quartiles(&collect(&|r| r.lpd_std)),
                lpd_bag: quartiles(&collect(&|r| r.lpd_bag)),
                lpd_diff: quartiles(&collect(&|r| r.lpd_bag - r.lpd_std)),
                index_fs_class: if indices.is_empty() {
                    None
                } else {
                    Some(quartiles(&indices))
                },
            }
        })
        .collect();
    StudySummary { schema_version: 1, configs }
}
