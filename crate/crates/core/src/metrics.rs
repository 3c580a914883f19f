//! Graph metrics on binary networks: clustering, characteristic path
//! length, degree-preserving random references and the small-world index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BinaryNetwork;
use crate::par::{stream_rng, Execution};

/// Default number of random references for the small-world index.
pub const DEFAULT_N_RAND: usize = 100;
/// Default double-edge-swap attempts per edge.
pub const DEFAULT_SWAPS_PER_EDGE: usize = 10;

fn common_neighbors(b: &BinaryNetwork, i: usize, j: usize) -> usize {
    b.row(i)
        .iter()
        .zip(b.row(j))
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum()
}

/// Nodal clustering coefficient `2 t / (k (k - 1))`, zero below degree 2.
pub fn nodal_clustering(b: &BinaryNetwork, i: usize) -> f64 {
    let k = b.degree_of(i);
    if k < 2 {
        return 0.0;
    }
    // Each neighbor-neighbor edge is seen from both ends.
    let twice_t: usize = b.neighbors(i).map(|j| common_neighbors(b, i, j)).sum();
    twice_t as f64 / (k * (k - 1)) as f64
}

pub fn nodal_clustering_all(b: &BinaryNetwork) -> Vec<f64> {
    (0..b.n()).map(|i| nodal_clustering(b, i)).collect()
}

/// Mean of the nodal coefficients over all nodes, isolated nodes included.
pub fn mean_clustering(b: &BinaryNetwork) -> f64 {
    nodal_clustering_all(b).iter().sum::<f64>() / b.n() as f64
}

/// Characteristic path length over reachable pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    pub length: f64,
    /// Fraction of ordered node pairs connected by some path.
    pub reachable_fraction: f64,
}

/// Sum of BFS distances and number of nodes reached from `src`.
fn bfs_totals(b: &BinaryNetwork, src: usize, dist: &mut [usize], queue: &mut Vec<usize>) -> (usize, usize) {
    dist.fill(usize::MAX);
    queue.clear();
    dist[src] = 0;
    queue.push(src);
    let mut head = 0;
    let (mut sum, mut reached) = (0, 0);
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        for v in b.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                sum += dist[v];
                reached += 1;
                queue.push(v);
            }
        }
    }
    (sum, reached)
}

/// Mean shortest-path distance over ordered pairs that are connected.
pub fn characteristic_path_length(b: &BinaryNetwork) -> Result<PathLength> {
    let n = b.n();
    let mut dist = vec![0; n];
    let mut queue = Vec::with_capacity(n);
    let (mut sum, mut reached) = (0usize, 0usize);
    for src in 0..n {
        let (s, r) = bfs_totals(b, src, &mut dist, &mut queue);
        sum += s;
        reached += r;
    }
    if reached == 0 {
        return Err(Error::UndefinedMetric(
            "characteristic path length: no connected node pairs".into(),
        ));
    }
    Ok(PathLength {
        length: sum as f64 / reached as f64,
        reachable_fraction: reached as f64 / (n * (n - 1)) as f64,
    })
}

/// Degree-preserving rewiring by double edge swaps.
///
/// Makes `swaps_per_edge * edge_count` attempts. An attempt picks two edges
/// `(a, b)`, `(c, d)` and replaces them with `(a, d)`, `(c, b)`; attempts that
/// would create a self-loop or a duplicate edge are rejected and count
/// toward the budget.
pub fn random_reference(b: &BinaryNetwork, seed: u64, swaps_per_edge: usize) -> Result<BinaryNetwork> {
    reference_network(b, seed, 0, swaps_per_edge)
}

/// Reference `index` of the family drawn by [`small_world_index`] with `seed`.
pub fn reference_network(b: &BinaryNetwork, seed: u64, index: u64, swaps_per_edge: usize) -> Result<BinaryNetwork> {
    rewire(b, &mut stream_rng(seed, index), swaps_per_edge)
}

fn rewire(b: &BinaryNetwork, rng: &mut impl Rng, swaps_per_edge: usize) -> Result<BinaryNetwork> {
    let mut edges: Vec<(usize, usize)> = b.edges().collect();
    let m = edges.len();
    if m < 2 {
        return Err(Error::Domain(format!(
            "random reference needs at least 2 edges, got {m}"
        )));
    }
    let mut out = b.clone();
    for _ in 0..swaps_per_edge * m {
        let e1 = rng.random_range(0..m);
        let mut e2 = rng.random_range(0..m - 1);
        if e2 >= e1 {
            e2 += 1;
        }
        let (a, bb) = edges[e1];
        let (mut c, mut d) = edges[e2];
        if rng.random::<bool>() {
            std::mem::swap(&mut c, &mut d);
        }
        if a == d || c == bb || out.has_edge(a, d) || out.has_edge(c, bb) {
            continue;
        }
        out.set_edge_unchecked(a, bb, false);
        out.set_edge_unchecked(c, d, false);
        out.set_edge_unchecked(a, d, true);
        out.set_edge_unchecked(c, bb, true);
        edges[e1] = (a, d);
        edges[e2] = (c, bb);
    }
    Ok(out)
}

/// Settings for [`small_world_index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldConfig {
    pub n_rand: usize,
    pub seed: u64,
    pub swaps_per_edge: usize,
}

impl Default for SmallWorldConfig {
    fn default() -> Self {
        Self {
            n_rand: DEFAULT_N_RAND,
            seed: 0,
            swaps_per_edge: DEFAULT_SWAPS_PER_EDGE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallWorld {
    pub sigma: f64,
    /// `C / C_rand`.
    pub gamma: f64,
    /// `L / L_rand`.
    pub lambda: f64,
}

/// `sigma = (C / C_rand) / (L / L_rand)` against degree-preserving references.
///
/// Reference `r` is drawn from random stream `(seed, r)`.
pub fn small_world_index(b: &BinaryNetwork, cfg: &SmallWorldConfig, exec: Execution) -> Result<SmallWorld> {
    if cfg.n_rand == 0 {
        return Err(Error::Domain("need at least one random reference".into()));
    }
    if b.edge_count() < 2 {
        return Err(Error::NotEstimable(format!(
            "{} edges leave nothing to rewire",
            b.edge_count()
        )));
    }
    let path = characteristic_path_length(b)
        .map_err(|e| Error::NotEstimable(e.to_string()))?;
    let refs = exec.try_map_indexed(cfg.n_rand, |r| -> Result<(f64, f64)> {
        let reference = reference_network(b, cfg.seed, r as u64, cfg.swaps_per_edge)?;
        let c = mean_clustering(&reference);
        if c == 0.0 {
            return Err(Error::NotEstimable(format!(
                "random reference {r} has zero clustering"
            )));
        }
        let l = characteristic_path_length(&reference)
            .map_err(|e| Error::NotEstimable(format!("random reference {r}: {e}")))?;
        Ok((c, l.length))
    })?;
    let k = refs.len() as f64;
    let c_rand = refs.iter().map(|r| r.0).sum::<f64>() / k;
    let l_rand = refs.iter().map(|r| r.1).sum::<f64>() / k;
    let gamma = mean_clustering(b) / c_rand;
    let lambda = path.length / l_rand;
    Ok(SmallWorld {
        sigma: gamma / lambda,
        gamma,
        lambda,
    })
}

/// Metrics of one binary network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_clustering: f64,
    pub nodal_clustering: Vec<f64>,
    pub char_path_length: f64,
    pub reachable_pair_fraction: f64,
    pub mean_degree: f64,
    pub small_world_sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    /// Why the small-world index is absent, when it was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_world_note: Option<String>,
}

impl MetricsReport {
    /// Computes all metrics; the small-world index only when `small_world`
    /// is given. A non-estimable index is recorded in `small_world_note`.
    pub fn compute(b: &BinaryNetwork, small_world: Option<&SmallWorldConfig>, exec: Execution) -> Result<Self> {
        let nodal = nodal_clustering_all(b);
        let path = characteristic_path_length(b)?;
        let mut report = MetricsReport {
            mean_clustering: nodal.iter().sum::<f64>() / nodal.len() as f64,
            nodal_clustering: nodal,
            char_path_length: path.length,
            reachable_pair_fraction: path.reachable_fraction,
            mean_degree: b.mean_degree(),
            small_world_sigma: None,
            gamma: None,
            lambda: None,
            small_world_note: None,
        };
        if let Some(cfg) = small_world {
            match small_world_index(b, cfg, exec) {
                Ok(sw) => {
                    report.small_world_sigma = Some(sw.sigma);
                    report.gamma = Some(sw.gamma);
                    report.lambda = Some(sw.lambda);
                }
                Err(e @ Error::NotEstimable(_)) => report.small_world_note = Some(e.to_string()),
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }
}

/// Synthetic network generators for tests and benchmarks.
pub mod generators {
    use rand::Rng;

    use crate::error::{Error, Result};
    use crate::graph::{upper_pairs, BinaryNetwork};
    use crate::par::stream_rng;

    /// Ring lattice: every node linked to its `k/2` nearest neighbors on each side.
    pub fn ring_lattice(n: usize, k: usize) -> Result<BinaryNetwork> {
        if k % 2 != 0 || k >= n {
            return Err(Error::Domain(format!(
                "ring lattice needs even k < n, got n={n}, k={k}"
            )));
        }
        let mut b = BinaryNetwork::with_nodes(n)?;
        for i in 0..n {
            for step in 1..=k / 2 {
                b.set_edge_unchecked(i, (i + step) % n, true);
            }
        }
        Ok(b)
    }

    /// Watts-Strogatz network: each lattice edge `(i, i+step)` is rewired to
    /// `(i, w)` with probability `p`, `w` uniform among non-neighbors of `i`.
    pub fn watts_strogatz(n: usize, k: usize, p: f64, seed: u64) -> Result<BinaryNetwork> {
        let mut b = ring_lattice(n, k)?;
        let mut rng = stream_rng(seed, 0);
        for step in 1..=k / 2 {
            for i in 0..n {
                if rng.random::<f64>() >= p {
                    continue;
                }
                let j = (i + step) % n;
                if b.degree_of(i) >= n - 1 {
                    continue;
                }
                let w = loop {
                    let w = rng.random_range(0..n);
                    if w != i && !b.has_edge(i, w) {
                        break w;
                    }
                };
                b.set_edge_unchecked(i, j, false);
                b.set_edge_unchecked(i, w, true);
            }
        }
        Ok(b)
    }

    /// Erdos-Renyi `G(n, p)`.
    pub fn gnp(n: usize, p: f64, seed: u64) -> Result<BinaryNetwork> {
        let mut b = BinaryNetwork::with_nodes(n)?;
        let mut rng = stream_rng(seed, 0);
        for (i, j) in upper_pairs(n) {
            if rng.random::<f64>() < p {
                b.set_edge_unchecked(i, j, true);
            }
        }
        Ok(b)
    }
}
