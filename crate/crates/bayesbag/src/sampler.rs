//! Generic MCMC for arbitrary log-posteriors and the bootstrap-replicate
//! sampler built on it.
//!
//! The kernel is a spherical Gaussian random-walk Metropolis sampler whose
//! scalar step size adapts toward 0.234 acceptance by Robbins-Monro on the
//! log scale during burn-in only, so the retained draws come from a fixed
//! kernel. A call with target length `t` runs `2t` iterations and returns
//! the last `t` draws.
//!
//! The replicate sampler runs one long chain on the full data, then for
//! each bootstrap replicate seeds a short chain from a uniformly drawn
//! long-chain state with the adapted step size, giving a bagged posterior
//! of draw-matrix components.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::core::rng::Stream;
use crate::core::{derive_stream, sample_counts, BootstrapPlan, CountVector, Dataset};
use crate::engine::{BaggedPosterior, DrawMatrix, PosteriorSummary};
use crate::error::{Error, Result};

/// Stream index reserved for the long full-data chain under the plan's
/// master seed.
pub const LONG_CHAIN_STREAM: u64 = u64::MAX;
/// Stream index offset reserved for per-replicate short chains; replicate
/// count vectors use indices `0..B` (matching the bagging engine).
pub const SHORT_CHAIN_OFFSET: u64 = 1 << 33;

/// A target distribution: prior plus per-row log-likelihood. Bootstrap
/// counts enter as integer weights on the per-row terms.
pub trait TargetModel: Sync {
    fn dim(&self) -> usize;
    fn log_prior(&self, theta: &[f64]) -> f64;
    fn log_lik(&self, row: &[f64], theta: &[f64]) -> f64;
}

/// Sampler position and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub theta: Vec<f64>,
    pub step_scale: f64,
    pub accept_rate: f64,
}

impl SamplerState {
    pub fn new(theta: Vec<f64>, step_scale: f64) -> Result<Self> {
        if !(step_scale > 0.0 && step_scale.is_finite()) {
            return Err(Error::InvalidArgument("step scale must be positive and finite".into()));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("initial point must be finite".into()));
        }
        Ok(SamplerState { theta, step_scale, accept_rate: 0.0 })
    }
}

fn weighted_log_posterior(
    target: &dyn TargetModel,
    data: &Dataset,
    weights: Option<&CountVector>,
    theta: &[f64],
) -> f64 {
    let mut lp = target.log_prior(theta);
    for n in 0..data.len() {
        let w = match weights {
            None => 1.0,
            Some(c) => c.counts()[n] as f64,
        };
        if w == 0.0 {
            continue;
        }
        lp += w * target.log_lik(data.row(n), theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    lp
}

/// Adaptive random-walk Metropolis.
///
/// Runs `2t` iterations: the first half adapts the step size and is
/// discarded as burn-in, the second half is returned as a `t x dim` draw
/// matrix. The returned state carries the frozen step size and the
/// acceptance rate over the retained half.
pub fn rw_metropolis(
    target: &dyn TargetModel,
    data: &Dataset,
    weights: Option<&CountVector>,
    t: usize,
    init: &SamplerState,
    stream: &mut Stream,
) -> Result<(SamplerState, DrawMatrix)> {
    if t < 2 {
        return Err(Error::InvalidArgument("chain length t must be >= 2".into()));
    }
    let dim = target.dim();
    if init.theta.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: init.theta.len() });
    }
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), got: w.len() });
        }
    }

    let mut theta = init.theta.clone();
    let mut lp = weighted_log_posterior(target, data, weights, &theta);
    if !lp.is_finite() {
        return Err(Error::NonFiniteLogPosterior);
    }

    let mut ln_scale = init.step_scale.ln();
    let mut proposal = vec![0.0; dim];
    let mut draws = Vec::with_capacity(t * dim);
    let mut retained_accepts = 0usize;

    for i in 0..2 * t {
        let scale = ln_scale.exp();
        for (p, x) in proposal.iter_mut().zip(&theta) {
            let z: f64 = StandardNormal.sample(stream);
            *p = x + scale * z;
        }
        let lp_prop = weighted_log_posterior(target, data, weights, &proposal);
        let log_u = stream.random::<f64>().ln();
        let accept = lp_prop.is_finite() && lp_prop - lp > log_u;
        if accept {
            std::mem::swap(&mut theta, &mut proposal);
            lp = lp_prop;
        }
        if i < t {
            // Robbins-Monro on the log step size toward 0.234 acceptance;
            // adaptation stops when burn-in ends.
            let gain = (i as f64 + 1.0).powf(-0.7);
            ln_scale += gain * (if accept { 1.0 } else { 0.0 } - 0.234);
        } else {
            draws.extend_from_slice(&theta);
            if accept {
                retained_accepts += 1;
            }
        }
    }

    let state = SamplerState {
        theta,
        step_scale: ln_scale.exp(),
        accept_rate: retained_accepts as f64 / t as f64,
    };
    Ok((state, DrawMatrix::new(draws, dim)?))
}

/// Runs the two-phase bootstrap-replicate sampler.
///
/// One long chain of length `t_large` targets the full-data posterior. For
/// each of the plan's B replicates, a bootstrap count vector is drawn, the
/// short chain of length `t_small` is initialized at a uniformly chosen
/// long-chain draw with the adapted step size, and its draws become one
/// bagged component. Returns the long-chain draws and the bagged posterior.
pub fn basic_bayesbag_sampler(
    target: &dyn TargetModel,
    data: &Dataset,
    t_large: usize,
    t_small: usize,
    plan: &BootstrapPlan,
    init: &SamplerState,
) -> Result<(DrawMatrix, BaggedPosterior)> {
    if t_small < 2 || t_large < t_small {
        return Err(Error::InvalidArgument("need t_large >= t_small >= 2".into()));
    }
    let mut long_stream = derive_stream(plan.master_seed, LONG_CHAIN_STREAM);
    let (adapted, long_draws) =
        rw_metropolis(target, data, None, t_large, init, &mut long_stream)?;

    let n = data.len();
    let parts: Vec<(PosteriorSummary, CountVector)> = (0..plan.b)
        .into_par_iter()
        .map(|b| {
            let mut count_stream = derive_stream(plan.master_seed, b as u64);
            let counts = sample_counts(n, plan.m, &mut count_stream);
            let mut chain_stream = derive_stream(plan.master_seed, SHORT_CHAIN_OFFSET + b as u64);
            let start = chain_stream.random_range(0..long_draws.n_draws());
            let state = SamplerState::new(long_draws.row(start).to_vec(), adapted.step_scale)
                .map_err(|e| e.in_replicate(b))?;
            let (_, draws) =
                rw_metropolis(target, data, Some(&counts), t_small, &state, &mut chain_stream)
                    .map_err(|e| e.in_replicate(b))?;
            Ok((PosteriorSummary::Draws(draws), counts))
        })
        .collect::<Result<_>>()?;

    let (components, count_vectors) = parts.into_iter().unzip();
    let bagged = BaggedPosterior::from_parts(components, None, Some(*plan), count_vectors);
    Ok((long_draws, bagged))
}

/// Logistic regression target: rows `(y, z_1, ..., z_D)` with y in {0, 1},
/// success probability `logit^-1(z' beta)`, and independent N(0, prior_sd^2)
/// priors on the coefficients.
#[derive(Debug, Clone, Copy)]
pub struct LogisticTarget {
    dim: usize,
    prior_sd: f64,
}

pub fn logistic_target(d: usize, prior_sd: f64) -> Result<LogisticTarget> {
    if d == 0 {
        return Err(Error::InvalidArgument("logistic target needs d >= 1".into()));
    }
    if !(prior_sd > 0.0) {
        return Err(Error::InvalidArgument("prior sd must be positive".into()));
    }
    Ok(LogisticTarget { dim: d, prior_sd })
}

fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

impl TargetModel for LogisticTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let var = self.prior_sd * self.prior_sd;
        theta
            .iter()
            .map(|t| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - t * t / (2.0 * var))
            .sum()
    }

    fn log_lik(&self, row: &[f64], theta: &[f64]) -> f64 {
        let y = row[0];
        let s: f64 = row[1..].iter().zip(theta).map(|(z, b)| z * b).sum();
        y * s - softplus(s)
    }
}

/// Gaussian location target with scalar observation variance `v` and prior
/// variance `v0` on each coordinate; rows are observation vectors.
#[derive(Debug, Clone, Copy)]
pub struct GaussianLocationTarget {
    dim: usize,
    v: f64,
    v0: f64,
}

pub fn gaussian_location_target(v: f64, v0: f64, dim: usize) -> Result<GaussianLocationTarget> {
    if !(v > 0.0 && v0 > 0.0) || dim == 0 {
        return Err(Error::InvalidArgument("need v > 0, v0 > 0, dim >= 1".into()));
    }
    Ok(GaussianLocationTarget { dim, v, v0 })
}

impl TargetModel for GaussianLocationTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|t| -t * t / (2.0 * self.v0)).sum()
    }

    fn log_lik(&self, row: &[f64], theta: &[f64]) -> f64 {
        row.iter()
            .zip(theta)
            .map(|(x, t)| -(x - t) * (x - t) / (2.0 * self.v))
            .sum()
    }
}
