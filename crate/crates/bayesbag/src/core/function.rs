//! Scalar functions of interest over parameter vectors.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// How a [`FunctionOfInterest`] maps a parameter vector to one real number.
#[derive(Clone)]
pub enum FunctionKind {
    /// `theta -> theta[d]` (0-based coordinate projection).
    Coordinate(usize),
    /// `theta -> w' theta`.
    Linear(Vec<f64>),
    /// `theta -> log(sum_{d in range} theta[d]^2)` over a half-open
    /// coordinate range.
    LogSumOfSquares { start: usize, end: usize },
    /// An arbitrary scalar map.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// A labelled real-valued function of a parameter vector.
#[derive(Clone)]
pub struct FunctionOfInterest {
    pub kind: FunctionKind,
    pub label: String,
}

impl fmt::Debug for FunctionOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FunctionKind::Coordinate(d) => format!("coordinate({d})"),
            FunctionKind::Linear(w) => format!("linear(dim {})", w.len()),
            FunctionKind::LogSumOfSquares { start, end } => {
                format!("log_sum_of_squares({start}..{end})")
            }
            FunctionKind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("FunctionOfInterest")
            .field("kind", &kind)
            .field("label", &self.label)
            .finish()
    }
}

impl FunctionOfInterest {
    /// Coordinate projection `theta -> theta[d]` (0-based).
    pub fn coordinate(d: usize) -> Self {
        FunctionOfInterest {
            kind: FunctionKind::Coordinate(d),
            label: format!("theta[{d}]"),
        }
    }

    /// Linear functional `theta -> w' theta`.
    pub fn linear(w: Vec<f64>) -> Self {
        FunctionOfInterest {
            kind: FunctionKind::Linear(w),
            label: "linear".to_string(),
        }
    }

    /// `theta -> log(sum_{d=start..end} theta[d]^2)`.
    pub fn log_sum_of_squares(start: usize, end: usize) -> Self {
        FunctionOfInterest {
            kind: FunctionKind::LogSumOfSquares { start, end },
            label: format!("log_sum_sq[{start}..{end}]"),
        }
    }

    /// An arbitrary scalar map with a caller-supplied label.
    pub fn custom(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FunctionOfInterest {
            kind: FunctionKind::Custom(Arc::new(f)),
            label: label.into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Evaluates the function at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        match &self.kind {
            FunctionKind::Coordinate(d) => {
                if *d >= theta.len() {
                    return Err(Error::DimensionMismatch {
                        expected: *d + 1,
                        got: theta.len(),
                    });
                }
                Ok(theta[*d])
            }
            FunctionKind::Linear(w) => {
                if w.len() != theta.len() {
                    return Err(Error::DimensionMismatch {
                        expected: w.len(),
                        got: theta.len(),
                    });
                }
                Ok(w.iter().zip(theta).map(|(wi, ti)| wi * ti).sum())
            }
            FunctionKind::LogSumOfSquares { start, end } => {
                if *end > theta.len() || start >= end {
                    return Err(Error::DimensionMismatch {
                        expected: *end,
                        got: theta.len(),
                    });
                }
                Ok(theta[*start..*end].iter().map(|t| t * t).sum::<f64>().ln())
            }
            FunctionKind::Custom(f) => Ok(f(theta)),
        }
    }
}

/// The coordinate-projection family `{theta -> theta[d] : d = 0..dim}`.
pub fn projection_family(dim: usize) -> Vec<FunctionOfInterest> {
    (0..dim).map(FunctionOfInterest::coordinate).collect()
}
