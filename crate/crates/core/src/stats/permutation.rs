use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::builder::{association_from_rows, CohortTable, SubjectRecord};
use crate::error::{Error, Result};
use crate::graph::{threshold_sweep, BinaryNetwork};
use crate::metrics::mean_clustering;
use crate::par::{stream_rng, Execution};

pub const DEFAULT_ITERATIONS: usize = 1000;

/// Relative slack when comparing a permuted statistic with the observed one.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    /// Keep-fractions at which both group matrices are binarized.
    pub sparsities: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl PermutationConfig {
    pub fn new(sparsities: Vec<f64>, seed: u64) -> Self {
        Self {
            sparsities,
            iterations: DEFAULT_ITERATIONS,
            seed,
            exec: Execution::default(),
        }
    }
}

/// Per-sparsity group differences and two-sided permutation p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub group_a: String,
    pub group_b: String,
    pub metric: String,
    /// Always `"two-sided"`.
    pub tail: String,
    pub sparsities: Vec<f64>,
    /// Metric of group A minus metric of group B.
    pub observed_diff: Vec<f64>,
    /// Mean of the permuted differences.
    pub perm_mean_diff: Vec<f64>,
    /// `(1 + #{|perm| >= |observed|}) / (1 + iterations)`.
    pub p_value: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

/// Canonical subject order, so the statistic depends only on the sets.
fn canonical_order(subjects: &[SubjectRecord]) -> Vec<&SubjectRecord> {
    let mut refs: Vec<&SubjectRecord> = subjects.iter().collect();
    refs.sort_by(|a, b| {
        a.id.cmp(&b.id).then_with(|| {
            a.rgmv
                .iter()
                .zip(&b.rgmv)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    refs
}

/// Permutation test of the mean clustering difference between two cohorts.
pub fn permutation_test(a: &CohortTable, b: &CohortTable, cfg: &PermutationConfig) -> Result<PermutationResult> {
    permutation_test_with(a, b, cfg, "mean_clustering", |net| Ok(mean_clustering(net)))
}

/// Permutation test with an arbitrary network metric.
///
/// Each iteration reassigns the pooled subjects to two pseudo-groups of the
/// original sizes (iteration `t` shuffles with random stream `(seed, t)`),
/// rebuilds both association matrices and recomputes the metric difference
/// at every sparsity.
pub fn permutation_test_with<M>(
    a: &CohortTable,
    b: &CohortTable,
    cfg: &PermutationConfig,
    metric_name: &str,
    metric: M,
) -> Result<PermutationResult>
where
    M: Fn(&BinaryNetwork) -> Result<f64> + Sync + Send,
{
    if a.labels() != b.labels() {
        return Err(Error::Validation(format!(
            "cohorts {} and {} have different region labels",
            a.id, b.id
        )));
    }
    for t in [a, b] {
        if t.len() < 3 {
            return Err(Error::DegenerateDesign(format!(
                "cohort {} has {} subjects, need at least 3",
                t.id,
                t.len()
            )));
        }
    }
    if cfg.iterations == 0 {
        return Err(Error::Domain("need at least one permutation".into()));
    }
    let labels = a.labels();
    let pooled: Vec<&[f64]> = canonical_order(a.subjects())
        .into_iter()
        .chain(canonical_order(b.subjects()))
        .map(|s| s.rgmv.as_slice())
        .collect();
    let na = a.len();

    let statistic = |members: &[usize]| -> Result<Vec<f64>> {
        let (left, right) = members.split_at(na);
        let mut left = left.to_vec();
        let mut right = right.to_vec();
        left.sort_unstable();
        right.sort_unstable();
        let wa = association_from_rows(labels, left.iter().map(|&k| pooled[k]))?;
        let wb = association_from_rows(labels, right.iter().map(|&k| pooled[k]))?;
        let ba = threshold_sweep(&wa, &cfg.sparsities)?;
        let bb = threshold_sweep(&wb, &cfg.sparsities)?;
        ba.iter()
            .zip(&bb)
            .map(|(x, y)| Ok(metric(x)? - metric(y)?))
            .collect()
    };

    let identity: Vec<usize> = (0..pooled.len()).collect();
    let observed = statistic(&identity)?;
    let permuted = cfg.exec.try_map_indexed(cfg.iterations, |t| {
        let mut members = identity.clone();
        members.shuffle(&mut stream_rng(cfg.seed, t as u64));
        statistic(&members)
    })?;

    let levels = cfg.sparsities.len();
    let iters = cfg.iterations as f64;
    let mut perm_mean_diff = vec![0.0; levels];
    let mut exceed = vec![0usize; levels];
    for stat in &permuted {
        for l in 0..levels {
            perm_mean_diff[l] += stat[l];
            let obs = observed[l].abs();
            if stat[l].abs() >= obs - TIE_TOLERANCE * obs.max(1.0) {
                exceed[l] += 1;
            }
        }
    }
    perm_mean_diff.iter_mut().for_each(|m| *m /= iters);
    let p_value = exceed.iter().map(|&e| (1 + e) as f64 / (1.0 + iters)).collect();

    Ok(PermutationResult {
        group_a: a.id.clone(),
        group_b: b.id.clone(),
        metric: metric_name.to_string(),
        tail: "two-sided".into(),
        sparsities: cfg.sparsities.clone(),
        observed_diff: observed,
        perm_mean_diff,
        p_value,
        iterations: cfg.iterations,
        seed: cfg.seed,
    })
}
