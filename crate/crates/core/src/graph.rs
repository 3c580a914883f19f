//! Weighted and binary network representations and thresholding.
//!
//! Node indices are zero-based throughout the API.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labels `"1"`, `"2"`, ... used when a network carries no names.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Number of unordered node pairs, `n(n-1)/2`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Upper-triangle pairs `(i, j)` with `i < j` in row-major order.
pub fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn check_labels(labels: &[String]) -> Result<()> {
    if labels.len() < 2 {
        return Err(Error::Validation(format!(
            "network needs at least 2 nodes, got {}",
            labels.len()
        )));
    }
    Ok(())
}

/// Symmetric real-valued matrix over labeled nodes with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNetwork {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl WeightedNetwork {
    /// Builds a network from a row-major `n*n` weight buffer.
    ///
    /// The buffer must be exactly symmetric, finite and have a zero diagonal.
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        check_labels(&labels)?;
        let n = labels.len();
        if weights.len() != n * n {
            return Err(Error::Validation(format!(
                "expected {} weights for {n} nodes, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::Validation(format!(
                    "diagonal weight ({}, {}) is {}, expected 0",
                    i + 1,
                    i + 1,
                    weights[i * n + i]
                )));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite weight at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if w != weights[j * n + i] {
                    return Err(Error::Validation(format!(
                        "asymmetric weight at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { labels, weights })
    }

    /// Builds a network from a function of the upper-triangle pair `(i, j)`, `i < j`.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_labels(&labels)?;
        let n = labels.len();
        let mut weights = vec![0.0; n * n];
        for (i, j) in upper_pairs(n) {
            let w = f(i, j);
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        Self::new(labels, weights)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    /// Row-major `n*n` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Upper-triangle pairs ordered strongest first; equal weights keep
    /// ascending `(row, col)` order.
    fn ranked_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = upper_pairs(self.n()).collect();
        // Stable sort keeps the row-major order among ties.
        pairs.sort_by(|&(a, b), &(c, d)| {
            self.weight(c, d)
                .partial_cmp(&self.weight(a, b))
                .unwrap_or(Ordering::Equal)
        });
        pairs
    }
}

/// Number of edges kept at keep-fraction `s` out of `total` pairs, rounding
/// half away from zero.
pub fn kept_edge_count(s: f64, total: usize) -> usize {
    (s * total as f64).round() as usize
}

fn check_fraction(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!(
            "keep fraction must lie in (0, 1], got {s}"
        )));
    }
    Ok(())
}

/// Symmetric boolean adjacency with an empty diagonal, stored as row bitsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryNetwork {
    labels: Vec<String>,
    words: usize,
    bits: Vec<u64>,
}

impl BinaryNetwork {
    /// Network with no edges.
    pub fn empty(labels: Vec<String>) -> Result<Self> {
        check_labels(&labels)?;
        let words = labels.len().div_ceil(64);
        let bits = vec![0; words * labels.len()];
        Ok(Self {
            labels,
            words,
            bits,
        })
    }

    /// Empty network with default labels.
    pub fn with_nodes(n: usize) -> Result<Self> {
        Self::empty(default_labels(n))
    }

    /// Complete graph `K_n` with default labels.
    pub fn complete(n: usize) -> Result<Self> {
        let mut b = Self::with_nodes(n)?;
        for (i, j) in upper_pairs(n) {
            b.set_edge_unchecked(i, j, true);
        }
        Ok(b)
    }

    /// Builds a network from an edge list over default labels.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut b = Self::with_nodes(n)?;
        for &(i, j) in edges {
            b.set_edge(i, j, true)?;
        }
        Ok(b)
    }

    /// Builds a network from a full boolean matrix, checking symmetry and the diagonal.
    pub fn from_matrix(labels: Vec<String>, matrix: &[Vec<bool>]) -> Result<Self> {
        let mut b = Self::empty(labels)?;
        let n = b.n();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::Validation(format!("matrix must be {n}x{n}")));
        }
        for i in 0..n {
            if matrix[i][i] {
                return Err(Error::Validation(format!(
                    "self-loop at ({}, {})",
                    i + 1,
                    i + 1
                )));
            }
            for j in i + 1..n {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::Validation(format!(
                        "asymmetric entry at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                b.set_edge_unchecked(i, j, matrix[i][j]);
            }
        }
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Replaces the node labels, keeping the edges.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Validation(format!(
                "expected {} labels, got {}",
                self.n(),
                labels.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::Domain(format!(
                "node index {i} out of range for {} nodes",
                self.n()
            )));
        }
        Ok(())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub(crate) fn set_edge_unchecked(&mut self, i: usize, j: usize, on: bool) {
        for (a, b) in [(i, j), (j, i)] {
            let w = &mut self.bits[a * self.words + b / 64];
            if on {
                *w |= 1 << (b % 64);
            } else {
                *w &= !(1 << (b % 64));
            }
        }
    }

    /// Adds or removes the undirected edge `{i, j}`.
    pub fn set_edge(&mut self, i: usize, j: usize, on: bool) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::Validation(format!("self-loop at node {}", i + 1)));
        }
        self.set_edge_unchecked(i, j, on);
        Ok(())
    }

    /// Neighbor bitset of node `i`.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_index(i)?;
        Ok(self.degree_of(i))
    }

    pub(crate) fn degree_of(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.degree_of(i)).collect()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum::<usize>() / 2
    }

    /// Upper-triangle edges `(i, j)`, `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.n() as f64
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Validation("not a permutation".into()));
        }
        let mut labels = vec![String::new(); n];
        for (i, &p) in perm.iter().enumerate() {
            labels[p] = self.labels[i].clone();
        }
        let mut out = Self::empty(labels)?;
        for (i, j) in self.edges() {
            out.set_edge_unchecked(perm[i], perm[j], true);
        }
        Ok(out)
    }

    /// Full boolean matrix, row-major.
    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.has_edge(i, j)).collect())
            .collect()
    }
}

fn network_from_pairs(labels: Vec<String>, pairs: &[(usize, usize)]) -> Result<BinaryNetwork> {
    let mut b = BinaryNetwork::empty(labels)?;
    for &(i, j) in pairs {
        b.set_edge_unchecked(i, j, true);
    }
    Ok(b)
}

/// Keeps the `round(s * n(n-1)/2)` strongest edges of `w`.
///
/// Weights are ranked by raw value, so negative weights go first. Equal
/// weights are taken in ascending `(row, col)` order.
pub fn sparsity_threshold(w: &WeightedNetwork, s: f64) -> Result<BinaryNetwork> {
    check_fraction(s)?;
    let ranked = w.ranked_pairs();
    let k = kept_edge_count(s, ranked.len());
    network_from_pairs(w.labels.clone(), &ranked[..k])
}

/// [`sparsity_threshold`] at several keep-fractions, ranking the edges once.
pub fn threshold_sweep(w: &WeightedNetwork, levels: &[f64]) -> Result<Vec<BinaryNetwork>> {
    for &s in levels {
        check_fraction(s)?;
    }
    let ranked = w.ranked_pairs();
    levels
        .iter()
        .map(|&s| network_from_pairs(w.labels.clone(), &ranked[..kept_edge_count(s, ranked.len())]))
        .collect()
}

/// How [`consistency_threshold`] chooses the retained edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyStrategy {
    /// Each subject keeps its own strongest edges.
    #[default]
    PerSubject,
    /// One mask of the most consistent edges (mean over standard deviation) for all subjects.
    GroupMask,
}

impl std::str::FromStr for ConsistencyStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-subject" => Ok(Self::PerSubject),
            "group-mask" => Ok(Self::GroupMask),
            other => Err(Error::Validation(format!(
                "unknown consistency strategy {other:?} (expected per-subject or group-mask)"
            ))),
        }
    }
}

impl std::fmt::Display for ConsistencyStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerSubject => "per-subject",
            Self::GroupMask => "group-mask",
        })
    }
}

/// Binarizes a stack of subject networks over identical labels.
pub fn consistency_threshold(
    stack: &[WeightedNetwork],
    keep: f64,
    strategy: ConsistencyStrategy,
) -> Result<Vec<BinaryNetwork>> {
    check_fraction(keep)?;
    if stack.len() < 2 {
        return Err(Error::Validation(format!(
            "consistency thresholding needs at least 2 networks, got {}",
            stack.len()
        )));
    }
    let labels = stack[0].labels();
    if let Some(pos) = stack.iter().position(|w| w.labels() != labels) {
        return Err(Error::Validation(format!(
            "network {} has labels or size differing from network 1",
            pos + 1
        )));
    }
    match strategy {
        ConsistencyStrategy::PerSubject => {
            stack.iter().map(|w| sparsity_threshold(w, keep)).collect()
        }
        ConsistencyStrategy::GroupMask => {
            let n = labels.len();
            let m = stack.len() as f64;
            let scored: Vec<((usize, usize), f64, f64)> = upper_pairs(n)
                .map(|(i, j)| {
                    let mean = stack.iter().map(|w| w.weight(i, j)).sum::<f64>() / m;
                    let var = stack
                        .iter()
                        .map(|w| (w.weight(i, j) - mean).powi(2))
                        .sum::<f64>()
                        / (m - 1.0);
                    let score = if var == 0.0 {
                        f64::INFINITY
                    } else {
                        mean / var.sqrt()
                    };
                    ((i, j), score, mean)
                })
                .collect();
            let mut order: Vec<usize> = (0..scored.len()).collect();
            order.sort_by(|&a, &b| {
                let (_, sa, ma) = scored[a];
                let (_, sb, mb) = scored[b];
                sb.partial_cmp(&sa)
                    .unwrap_or(Ordering::Equal)
                    .then(mb.partial_cmp(&ma).unwrap_or(Ordering::Equal))
                    .then(a.cmp(&b))
            });
            let k = kept_edge_count(keep, scored.len());
            let pairs: Vec<(usize, usize)> = order[..k].iter().map(|&e| scored[e].0).collect();
            let mask = network_from_pairs(labels.to_vec(), &pairs)?;
            Ok(vec![mask; stack.len()])
        }
    }
}
