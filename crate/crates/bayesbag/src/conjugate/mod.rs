//! Closed-form conjugate posteriors: the Gaussian location model and
//! normal-inverse-gamma linear regression.

pub mod gaussian;
pub mod nig;

pub use gaussian::{gl_bagged_moments_exact, gl_posterior, GaussianLocationModel, GaussianPosterior};
pub use nig::{
    nig_beta_logpdf, nig_beta_mean_cov, nig_logsigma2_moments, nig_posterior, NigModel,
    NigPosterior,
};
