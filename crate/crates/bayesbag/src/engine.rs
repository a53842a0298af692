//! The bagging engine: build a bagged posterior from B bootstrap replicates
//! (or from exact enumeration of all N^M bootstrap datasets), and query
//! mixture moments, densities, quantiles, and Monte Carlo error.
//!
//! A bagged posterior is an equally weighted mixture of per-replicate
//! posteriors. Its mean is the average of component means, and by the law
//! of total variance its variance is the average within-component variance
//! plus the (1/B-normalized) variance of the component means. All mixture
//! aggregations here sum in a canonical order, so every statistic is
//! bit-identical under permutation of components and under any degree of
//! parallelism.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::conjugate::{
    nig_beta_logpdf, nig_beta_mean_cov, nig_logsigma2_moments, GaussianLocationModel,
    GaussianPosterior, NigModel, NigPosterior,
};
use crate::conjugate::{gl_posterior, nig_posterior};
use crate::core::rng::Stream;
use crate::core::{
    derive_stream, enumerate_count_vectors, sample_counts, BootstrapPlan, CountVector, Dataset,
    FunctionKind, FunctionOfInterest,
};
use crate::error::{Error, Result};

/// Stream index offset reserved for drawing from closed-form components
/// (quantile queries); replicate count vectors use indices `0..B`.
pub(crate) const QUANTILE_STREAM_OFFSET: u64 = 1 << 32;

/// An S x D matrix of posterior draws, one parameter vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    values: Vec<f64>,
    dim: usize,
}

impl DrawMatrix {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::InvalidArgument("draw matrix shape mismatch".into()));
        }
        if values.len() / dim < 2 {
            return Err(Error::InvalidArgument("draw matrix needs at least 2 rows".into()));
        }
        Ok(DrawMatrix { values, dim })
    }

    pub fn n_draws(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.dim..(s + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Mean and (1/S-normalized) variance of `f` over the draws.
    pub fn f_mean_var(&self, f: &FunctionOfInterest) -> Result<(f64, f64)> {
        let s = self.n_draws() as f64;
        let mut vals = Vec::with_capacity(self.n_draws());
        for row in self.rows() {
            vals.push(f.evaluate(row)?);
        }
        let mean = stable_sum(&mut vals.clone()) / s;
        let mut sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = stable_sum(&mut sq) / s;
        Ok((mean, var))
    }
}

/// One mixture component: a closed-form conjugate posterior or a matrix of
/// posterior draws. All components of one bagged posterior share the same
/// form and dimension.
#[derive(Debug, Clone)]
pub enum PosteriorSummary {
    GaussianLocation(GaussianPosterior),
    Nig(NigPosterior),
    Draws(DrawMatrix),
}

impl PosteriorSummary {
    /// Dimension of the parameter vector theta.
    ///
    /// For NIG components theta = (log sigma^2, beta_1, ..., beta_D), so
    /// the dimension is D + 1.
    pub fn dim(&self) -> usize {
        match self {
            PosteriorSummary::GaussianLocation(p) => p.dim(),
            PosteriorSummary::Nig(p) => p.dim() + 1,
            PosteriorSummary::Draws(d) => d.dim(),
        }
    }

    /// Mean and variance of `f(theta)` under this component.
    ///
    /// Closed-form components support coordinate and linear functions
    /// exactly; draw components support any function.
    pub fn f_mean_var(&self, f: &FunctionOfInterest) -> Result<(f64, f64)> {
        match self {
            PosteriorSummary::GaussianLocation(p) => match &f.kind {
                FunctionKind::Coordinate(d) => {
                    if *d >= p.dim() {
                        return Err(Error::DimensionMismatch { expected: *d + 1, got: p.dim() });
                    }
                    Ok((p.mean()[*d], p.cov()[(*d, *d)]))
                }
                FunctionKind::Linear(w) => {
                    if w.len() != p.dim() {
                        return Err(Error::DimensionMismatch { expected: w.len(), got: p.dim() });
                    }
                    let wv = DVector::from_row_slice(w);
                    Ok((wv.dot(p.mean()), (p.cov() * &wv).dot(&wv)))
                }
                _ => Err(Error::UnsupportedFunction { label: f.label.clone() }),
            },
            PosteriorSummary::Nig(p) => match &f.kind {
                FunctionKind::Coordinate(0) => Ok(nig_logsigma2_moments(p)),
                FunctionKind::Coordinate(d) => {
                    if *d > p.dim() {
                        return Err(Error::DimensionMismatch { expected: *d, got: p.dim() });
                    }
                    let (mu, cov) = nig_beta_mean_cov(p)?;
                    Ok((mu[*d - 1], cov[(*d - 1, *d - 1)]))
                }
                FunctionKind::Linear(w) => {
                    if w.len() != p.dim() + 1 {
                        return Err(Error::DimensionMismatch {
                            expected: w.len(),
                            got: p.dim() + 1,
                        });
                    }
                    // beta and any function of sigma^2 are uncorrelated
                    // under the NIG posterior, so the mixture splits.
                    let (ls_mean, ls_var) = nig_logsigma2_moments(p);
                    let (mu, cov) = nig_beta_mean_cov(p)?;
                    let wb = DVector::from_row_slice(&w[1..]);
                    let mean = w[0] * ls_mean + wb.dot(&mu);
                    let var = w[0] * w[0] * ls_var + (cov * &wb).dot(&wb);
                    Ok((mean, var))
                }
                _ => Err(Error::UnsupportedFunction { label: f.label.clone() }),
            },
            PosteriorSummary::Draws(d) => d.f_mean_var(f),
        }
    }

    /// Log density at a parameter point.
    ///
    /// For Gaussian-location components the point is theta itself; for NIG
    /// components it is beta and the density is the marginal with sigma^2
    /// integrated out. Draw components have no density.
    pub fn logpdf(&self, point: &[f64]) -> Result<f64> {
        match self {
            PosteriorSummary::GaussianLocation(p) => p.logpdf(point),
            PosteriorSummary::Nig(p) => nig_beta_logpdf(p, point),
            PosteriorSummary::Draws(_) => Err(Error::UnsupportedFunction {
                label: "logpdf on draw-matrix component".into(),
            }),
        }
    }

    /// Draws `s` parameter vectors from a closed-form component; a draw
    /// component yields its stored rows (ignoring `s`).
    pub fn sample_draws(&self, s: usize, stream: &mut Stream) -> Result<DrawMatrix> {
        match self {
            PosteriorSummary::GaussianLocation(p) => {
                let d = p.dim();
                let chol = p
                    .cov()
                    .clone()
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite { context: "component covariance" })?;
                let l = chol.l();
                let mut values = Vec::with_capacity(s * d);
                for _ in 0..s {
                    let z: DVector<f64> =
                        DVector::from_fn(d, |_, _| StandardNormal.sample(stream));
                    let theta = p.mean() + &l * z;
                    values.extend(theta.iter());
                }
                DrawMatrix::new(values, d)
            }
            PosteriorSummary::Nig(p) => {
                let d = p.dim();
                let chol = p
                    .precision_n()
                    .clone()
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite { context: "component precision" })?;
                let prec_inv_chol = chol
                    .inverse()
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite { context: "component covariance" })?;
                let l = prec_inv_chol.l();
                let gamma = Gamma::new(p.a_n(), 1.0 / p.b_n())
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let mut values = Vec::with_capacity(s * (d + 1));
                for _ in 0..s {
                    let sigma2 = 1.0 / gamma.sample(stream);
                    let z: DVector<f64> =
                        DVector::from_fn(d, |_, _| StandardNormal.sample(stream));
                    let beta = p.mu_n() + &l * z * sigma2.sqrt();
                    values.push(sigma2.ln());
                    values.extend(beta.iter());
                }
                DrawMatrix::new(values, d + 1)
            }
            PosteriorSummary::Draws(dm) => Ok(dm.clone()),
        }
    }
}

/// A model adapter that maps (data, bootstrap counts) to a posterior
/// summary. Implemented by the conjugate models; sampler-backed models go
/// through `sampler::basic_bayesbag_sampler` instead.
pub trait PosteriorModel: Sync {
    fn posterior(&self, data: &Dataset, weights: Option<&CountVector>)
        -> Result<PosteriorSummary>;
}

impl PosteriorModel for GaussianLocationModel {
    fn posterior(
        &self,
        data: &Dataset,
        weights: Option<&CountVector>,
    ) -> Result<PosteriorSummary> {
        Ok(PosteriorSummary::GaussianLocation(gl_posterior(self, data, weights)?))
    }
}

impl PosteriorModel for NigModel {
    fn posterior(
        &self,
        data: &Dataset,
        weights: Option<&CountVector>,
    ) -> Result<PosteriorSummary> {
        Ok(PosteriorSummary::Nig(nig_posterior(self, data, weights)?))
    }
}

/// A bagged posterior: mixture components plus the resampling audit trail.
///
/// Sampled bags carry equal weights 1/B; enumeration bags carry the exact
/// multinomial weights.
#[derive(Debug, Clone)]
pub struct BaggedPosterior {
    components: Vec<PosteriorSummary>,
    weights: Option<Vec<f64>>,
    plan: Option<BootstrapPlan>,
    count_vectors: Vec<CountVector>,
}

impl BaggedPosterior {
    pub fn components(&self) -> &[PosteriorSummary] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Mixture weight of component `b` (1/B unless exact enumeration).
    pub fn weight(&self, b: usize) -> f64 {
        match &self.weights {
            None => 1.0 / self.components.len() as f64,
            Some(w) => w[b],
        }
    }

    pub fn is_equally_weighted(&self) -> bool {
        self.weights.is_none()
    }

    pub fn plan(&self) -> Option<&BootstrapPlan> {
        self.plan.as_ref()
    }

    /// The count vector that produced component `b`.
    pub fn count_vectors(&self) -> &[CountVector] {
        &self.count_vectors
    }

    /// Rebuilds the bag with components in a permuted order. Intended for
    /// tests of order insensitivity.
    pub fn permuted(&self, order: &[usize]) -> Result<BaggedPosterior> {
        if order.len() != self.components.len() {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        Ok(BaggedPosterior {
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| order.iter().map(|&i| w[i]).collect()),
            plan: self.plan,
            count_vectors: order.iter().map(|&i| self.count_vectors[i].clone()).collect(),
        })
    }

    /// Assembles a bag directly from components (used by the sampler).
    pub(crate) fn from_parts(
        components: Vec<PosteriorSummary>,
        weights: Option<Vec<f64>>,
        plan: Option<BootstrapPlan>,
        count_vectors: Vec<CountVector>,
    ) -> BaggedPosterior {
        BaggedPosterior { components, weights, plan, count_vectors }
    }
}

/// Builds the B-replicate bagged posterior.
///
/// Replicate `b` resamples with the stream `derive_stream(seed, b)`, so the
/// result is a pure function of `(plan, data)` no matter how many threads
/// compute it.
pub fn bag(
    model: &dyn PosteriorModel,
    data: &Dataset,
    plan: &BootstrapPlan,
) -> Result<BaggedPosterior> {
    let n = data.len();
    let parts: Vec<(PosteriorSummary, CountVector)> = (0..plan.b)
        .into_par_iter()
        .map(|b| {
            let mut stream = derive_stream(plan.master_seed, b as u64);
            let counts = sample_counts(n, plan.m, &mut stream);
            let summary = model
                .posterior(data, Some(&counts))
                .map_err(|e| e.in_replicate(b))?;
            Ok((summary, counts))
        })
        .collect::<Result<_>>()?;
    let (components, count_vectors) = parts.into_iter().unzip();
    Ok(BaggedPosterior {
        components,
        weights: None,
        plan: Some(*plan),
        count_vectors,
    })
}

/// Builds the exact bagged posterior by enumerating all N^M bootstrap
/// datasets, one component per distinct count vector, weighted by its
/// multinomial multiplicity. Mixture moments of the result are exact.
pub fn bag_exact_enumeration(
    model: &dyn PosteriorModel,
    data: &Dataset,
    m: usize,
    cap: Option<u128>,
) -> Result<BaggedPosterior> {
    let n = data.len();
    let compositions = enumerate_count_vectors(n, m, cap)?;
    let total = (n as u128).pow(m as u32) as f64;
    let mut components = Vec::with_capacity(compositions.len());
    let mut weights = Vec::with_capacity(compositions.len());
    let mut count_vectors = Vec::with_capacity(compositions.len());
    for (counts, multiplicity) in compositions {
        components.push(model.posterior(data, Some(&counts))?);
        weights.push(multiplicity as f64 / total);
        count_vectors.push(counts);
    }
    Ok(BaggedPosterior { components, weights: Some(weights), plan: None, count_vectors })
}

/// Sums in a canonical (totally ordered) sequence so that the result does
/// not depend on the order the summands arrived in.
fn stable_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Mixture mean and variance of `f(theta)` by the laws of total
/// expectation and total variance:
///
/// ```text
/// mean = sum_b w_b mean_b
/// var  = sum_b w_b var_b + sum_b w_b (mean_b - mean)^2
/// ```
pub fn mixture_mean_var(bp: &BaggedPosterior, f: &FunctionOfInterest) -> Result<(f64, f64)> {
    let b = bp.n_components();
    let mut mean_terms = Vec::with_capacity(b);
    let mut within_terms = Vec::with_capacity(b);
    let mut means = Vec::with_capacity(b);
    for (i, comp) in bp.components().iter().enumerate() {
        let (m, v) = comp.f_mean_var(f)?;
        let w = bp.weight(i);
        means.push((m, w));
        mean_terms.push(w * m);
        within_terms.push(w * v);
    }
    let mean = stable_sum(&mut mean_terms);
    let mut between_terms: Vec<f64> =
        means.iter().map(|(m, w)| w * (m - mean) * (m - mean)).collect();
    let var = stable_sum(&mut within_terms) + stable_sum(&mut between_terms);
    Ok((mean, var))
}

/// Full mixture mean vector and covariance matrix, for components that
/// expose closed-form or empirical multivariate moments.
pub fn mixture_mean_cov(bp: &BaggedPosterior) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = bp
        .components()
        .first()
        .ok_or(Error::TooFewComponents { required: 1, got: 0 })?
        .dim();
    let moments: Vec<(DVector<f64>, DMatrix<f64>, f64)> = bp
        .components()
        .iter()
        .enumerate()
        .map(|(i, comp)| -> Result<_> {
            let (mean, cov) = match comp {
                PosteriorSummary::GaussianLocation(p) => (p.mean().clone(), p.cov().clone()),
                PosteriorSummary::Nig(p) => {
                    // theta = (log sigma^2, beta): the blocks are
                    // uncorrelated within one component.
                    let (ls_mean, ls_var) = nig_logsigma2_moments(p);
                    let (bmu, bcov) = nig_beta_mean_cov(p)?;
                    let k = p.dim() + 1;
                    let mut mean = DVector::zeros(k);
                    mean[0] = ls_mean;
                    mean.rows_mut(1, k - 1).copy_from(&bmu);
                    let mut cov = DMatrix::zeros(k, k);
                    cov[(0, 0)] = ls_var;
                    cov.view_mut((1, 1), (k - 1, k - 1)).copy_from(&bcov);
                    (mean, cov)
                }
                PosteriorSummary::Draws(dm) => {
                    let s = dm.n_draws() as f64;
                    let mut mean = DVector::zeros(d);
                    for row in dm.rows() {
                        mean += DVector::from_row_slice(row);
                    }
                    mean /= s;
                    let mut cov = DMatrix::zeros(d, d);
                    for row in dm.rows() {
                        let delta = DVector::from_row_slice(row) - &mean;
                        cov += &delta * delta.transpose();
                    }
                    cov /= s;
                    (mean, cov)
                }
            };
            Ok((mean, cov, bp.weight(i)))
        })
        .collect::<Result<_>>()?;

    let mut mean = DVector::zeros(d);
    for (m, _, w) in &moments {
        mean += m * *w;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (m, c, w) in &moments {
        let delta = m - &mean;
        cov += c * *w + &delta * delta.transpose() * *w;
    }
    Ok((mean, cov))
}

/// Log density of N(mean, cov) at a point; the moment-matched summary
/// density of a bagged posterior, exact in the large-N limit where the
/// bagged posterior is itself Gaussian.
pub fn normal_logpdf(mean: &DVector<f64>, cov: &DMatrix<f64>, point: &[f64]) -> Result<f64> {
    let d = mean.len();
    if point.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: point.len() });
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { context: "moment-matched covariance" })?;
    let delta = DVector::from_row_slice(point) - mean;
    let half_logdet: f64 = chol.l().diagonal().iter().map(|x| x.ln()).sum();
    let quad = delta.dot(&chol.solve(&delta));
    Ok(-0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - half_logdet - 0.5 * quad)
}

/// Log of the mixture density at a parameter point, via log-sum-exp.
pub fn mixture_logpdf(bp: &BaggedPosterior, point: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(bp.n_components());
    for (i, comp) in bp.components().iter().enumerate() {
        terms.push(bp.weight(i).ln() + comp.logpdf(point)?);
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Ok(max);
    }
    let mut exps: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    Ok(max + stable_sum(&mut exps).ln())
}

/// Which bagged estimate `mc_error` quantifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatistic {
    Mean,
    Variance,
}

/// Monte Carlo standard error of a bagged estimate over its B components.
///
/// For the mean this is `sd(component means) / sqrt(B)`. For the variance
/// it is the leave-one-component-out jackknife standard error of the
/// mixture variance; an estimate, not an exact quantity.
pub fn mc_error(
    bp: &BaggedPosterior,
    f: &FunctionOfInterest,
    statistic: McStatistic,
) -> Result<f64> {
    if !bp.is_equally_weighted() {
        return Err(Error::InvalidArgument(
            "mc_error applies to equally weighted sampled bags".into(),
        ));
    }
    let b = bp.n_components();
    if b < 2 {
        return Err(Error::TooFewComponents { required: 2, got: b });
    }
    let bf = b as f64;
    let mut means = Vec::with_capacity(b);
    let mut vars = Vec::with_capacity(b);
    for comp in bp.components() {
        let (m, v) = comp.f_mean_var(f)?;
        means.push(m);
        vars.push(v);
    }
    match statistic {
        McStatistic::Mean => {
            let mean = stable_sum(&mut means.clone()) / bf;
            let mut sq: Vec<f64> = means.iter().map(|m| (m - mean) * (m - mean)).collect();
            let sd = (stable_sum(&mut sq) / (bf - 1.0)).sqrt();
            Ok(sd / bf.sqrt())
        }
        McStatistic::Variance => {
            // Leave-one-out values from sufficient sums, O(B) total.
            let sum_v = stable_sum(&mut vars.clone());
            let sum_m = stable_sum(&mut means.clone());
            let mut m2: Vec<f64> = means.iter().map(|m| m * m).collect();
            let sum_m2 = stable_sum(&mut m2);
            let loo: Vec<f64> = (0..b)
                .map(|i| {
                    let k = bf - 1.0;
                    let w = (sum_v - vars[i]) / k;
                    let mu = (sum_m - means[i]) / k;
                    let between = (sum_m2 - means[i] * means[i]) / k - mu * mu;
                    w + between
                })
                .collect();
            let loo_mean = stable_sum(&mut loo.clone()) / bf;
            let mut sq: Vec<f64> = loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).collect();
            Ok(((bf - 1.0) / bf * stable_sum(&mut sq)).sqrt())
        }
    }
}

/// Pools draws from all components with equal per-component counts.
///
/// Closed-form components are sampled `s_per_component` times each using
/// streams reserved under the bag's own seed (or `seed_override`); draw
/// components contribute their stored rows.
pub fn pooled_draws(
    bp: &BaggedPosterior,
    s_per_component: usize,
    seed_override: Option<u64>,
) -> Result<DrawMatrix> {
    if !bp.is_equally_weighted() {
        return Err(Error::InvalidArgument(
            "pooled draws apply to equally weighted bags".into(),
        ));
    }
    let seed = seed_override
        .or_else(|| bp.plan().map(|p| p.master_seed))
        .ok_or_else(|| Error::InvalidArgument("no seed available for pooled draws".into()))?;
    let mats: Vec<DrawMatrix> = bp
        .components()
        .par_iter()
        .enumerate()
        .map(|(i, comp)| {
            let mut stream = derive_stream(seed, QUANTILE_STREAM_OFFSET + i as u64);
            comp.sample_draws(s_per_component, &mut stream)
                .map_err(|e| e.in_replicate(i))
        })
        .collect::<Result<_>>()?;
    let dim = mats[0].dim();
    let mut values = Vec::new();
    for m in &mats {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: m.dim() });
        }
        for row in m.rows() {
            values.extend_from_slice(row);
        }
    }
    DrawMatrix::new(values, dim)
}

/// Quantiles of `f(theta)` under the bagged posterior, from pooled draws
/// with 4096 draws per closed-form component.
pub fn bagged_quantiles(
    bp: &BaggedPosterior,
    f: &FunctionOfInterest,
    probs: &[f64],
    seed_override: Option<u64>,
) -> Result<Vec<f64>> {
    let draws = pooled_draws(bp, 4096, seed_override)?;
    let mut vals = Vec::with_capacity(draws.n_draws());
    for row in draws.rows() {
        vals.push(f.evaluate(row)?);
    }
    vals.sort_unstable_by(f64::total_cmp);
    probs
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("quantile prob {p} out of range")));
            }
            Ok(quantile_sorted(&vals, p))
        })
        .collect()
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
