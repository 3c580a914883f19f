//! Inferential statistics: subject-relabeling permutation tests on group
//! network metrics and one-way ANOVA.

mod anova;
mod permutation;
pub mod special;

pub use anova::{one_way_anova, AnovaResult};
pub use permutation::{
    permutation_test, permutation_test_with, PermutationConfig, PermutationResult,
    DEFAULT_ITERATIONS,
};
