//! Datasets, deterministic RNG streams, multinomial bootstrap resampling,
//! and scalar functions of interest over parameter vectors.

pub mod bootstrap;
pub mod data;
pub mod function;
pub mod rng;

pub use bootstrap::{enumerate_count_vectors, sample_counts, BootstrapPlan, CountVector};
pub use data::Dataset;
pub use function::{projection_family, FunctionKind, FunctionOfInterest};
pub use rng::{child_seed, derive_stream, Stream};
