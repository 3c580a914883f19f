//! Exact, reversible identifiers for symmetric binary networks, and the
//! structural covariance network pipeline built around them.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`]: weighted and binary networks, sparsity and consistency thresholding.
//! * [`codec`]: the dyadic-rational network code, its decimal/binary64 renderings and decoding.
//! * [`builder`]: subject tables, similarity networks, Pearson association matrices, covariate
//!   residualization and age cohorts.
//! * [`metrics`]: clustering, path length, degree-preserving references, small-world index.
//! * [`stats`]: subject-relabeling permutation tests and one-way ANOVA.
//! * [`io`] and [`pipeline`]: file formats and the reproducible end-to-end runs.
//!
//! Data-parallel loops (permutation iterations, random references, per-subject
//! encoding) run on rayon when the `parallel` feature is enabled and fall back to
//! sequential iteration otherwise. Results never depend on scheduling.

pub mod builder;
pub mod codec;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod stats;

pub use builder::{CohortTable, SubjectRecord};
pub use codec::{ColumnDecimals, UbninCode};
pub use error::{Error, Result};
pub use graph::{BinaryNetwork, WeightedNetwork};
pub use metrics::MetricsReport;
pub use par::Execution;
pub use stats::{AnovaResult, PermutationResult};

/// Version string embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
