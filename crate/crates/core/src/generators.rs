//! Random graph generators: the directed stochastic block model used by the
//! evaluation harness, and a preferential-attachment graph for trimming
//! benchmarks.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

/// Stochastic block model configuration. Block `i` (1-based in labels)
/// holds `block_sizes[i-1]` consecutive vertices; an ordered pair `(u, v)`,
/// `u ≠ v`, is an edge with probability `p[block(u)][block(v)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl SbmParams {
    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.num_blocks();
        if b == 0 || self.num_vertices() == 0 {
            return Err(Error::arg("SBM needs at least one non-empty block"));
        }
        if self.p.len() != b || self.p.iter().any(|r| r.len() != b) {
            return Err(Error::arg(format!("P must be {b}×{b}")));
        }
        for i in 0..b {
            for j in 0..b {
                let x = self.p[i][j];
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::arg(format!("P[{i}][{j}] = {x} is not a probability")));
                }
                if x != self.p[j][i] {
                    return Err(Error::arg(format!("P is not symmetric at ({i}, {j})")));
                }
            }
        }
        if u32::try_from(self.num_vertices()).is_err() {
            return Err(Error::arg("too many vertices"));
        }
        Ok(())
    }

    /// Number of ordered vertex pairs between blocks `i` and `j` (no loops).
    fn pair_count(&self, i: usize, j: usize) -> usize {
        let (a, b) = (self.block_sizes[i], self.block_sizes[j]);
        if i == j {
            a * a.saturating_sub(1)
        } else {
            a * b
        }
    }

    /// Mean and variance of the edge count (a sum of independent Bernoullis).
    pub fn edge_count_moments(&self) -> (f64, f64) {
        let b = self.num_blocks();
        let mut mean = 0.0;
        let mut var = 0.0;
        for i in 0..b {
            for j in 0..b {
                let pairs = self.pair_count(i, j) as f64;
                let p = self.p[i][j];
                mean += pairs * p;
                var += pairs * p * (1.0 - p);
            }
        }
        (mean, var)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The benchmark configuration: four blocks of sizes 940, 20, 20, 20 with
/// `P = 0.01 + diag(0, 0.19, 0.29, 0.39)`.
pub fn paper_params() -> SbmParams {
    let base = 0.01;
    let boost = [0.0, 0.19, 0.29, 0.39];
    let p = (0..4)
        .map(|i| (0..4).map(|j| if i == j { base + boost[i] } else { base }).collect())
        .collect();
    SbmParams {
        block_sizes: vec![940, 20, 20, 20],
        p,
        seed: 0,
    }
}

#[derive(Clone, Debug)]
pub struct LabeledGraph {
    pub graph: Graph,
    /// Block id per vertex, in `[1, B]`.
    pub labels: Vec<usize>,
}

/// Samples an SBM graph. Each block pair is sampled by geometric skipping,
/// so the cost is proportional to the number of edges drawn.
pub fn generate_sbm(params: &SbmParams) -> Result<LabeledGraph> {
    params.validate()?;
    let b = params.num_blocks();
    let mut offsets = vec![0usize; b + 1];
    for i in 0..b {
        offsets[i + 1] = offsets[i] + params.block_sizes[i];
    }
    let mut rng = seed::rng(params.seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for i in 0..b {
        for j in 0..b {
            let p = params.p[i][j];
            let total = params.pair_count(i, j);
            if p == 0.0 || total == 0 {
                continue;
            }
            let cols = params.block_sizes[j];
            let to_edge = |idx: usize| -> (u32, u32) {
                if i == j {
                    let r = idx / (cols - 1);
                    let c = idx % (cols - 1);
                    let c = if c >= r { c + 1 } else { c };
                    ((offsets[i] + r) as u32, (offsets[j] + c) as u32)
                } else {
                    ((offsets[i] + idx / cols) as u32, (offsets[j] + idx % cols) as u32)
                }
            };
            if p == 1.0 {
                edges.extend((0..total).map(to_edge));
                continue;
            }
            let log_q = (1.0 - p).ln();
            let mut idx: usize = 0;
            loop {
                // 1 - u lies in (0, 1], so the logarithm is finite
                let u: f64 = rng.gen();
                let skip = ((1.0 - u).ln() / log_q).floor();
                if skip >= (total - idx) as f64 {
                    break;
                }
                idx += skip as usize;
                edges.push(to_edge(idx));
                idx += 1;
                if idx >= total {
                    break;
                }
            }
        }
    }
    let labels = (0..b)
        .flat_map(|i| std::iter::repeat_n(i + 1, params.block_sizes[i]))
        .collect();
    let graph = Graph::from_edges(params.num_vertices(), edges)?;
    Ok(LabeledGraph { graph, labels })
}

/// Directed preferential attachment: vertex `v ≥ m` adds `m` edges to
/// distinct earlier vertices chosen with probability proportional to their
/// current total degree. Vertex `m` links to each of `0 … m−1` to start the
/// process.
pub fn preferential_attachment(n: usize, m: usize, seed_value: u64) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::arg(format!("need n > m ≥ 1, got n = {n}, m = {m}")));
    }
    let mut rng = seed::rng(seed_value);
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(n * m);
    // every edge endpoint, so a uniform pick is degree-proportional
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * n * m);
    for t in 0..m as u32 {
        edges.push((m as u32, t));
        endpoints.extend([m as u32, t]);
    }
    let mut chosen = HashSet::with_capacity(m);
    for v in (m + 1)..n {
        chosen.clear();
        while chosen.len() < m {
            chosen.insert(endpoints[rng.gen_range(0..endpoints.len())]);
        }
        let mut targets: Vec<u32> = chosen.iter().copied().collect();
        targets.sort_unstable();
        for t in targets {
            edges.push((v as u32, t));
            endpoints.extend([v as u32, t]);
        }
    }
    Graph::from_edges(n, edges)
}
