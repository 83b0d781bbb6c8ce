//! The locality statistic Ψ_k and the two cheap upper bounds on Ψ₁ used by
//! the trimming search.
//!
//! Ψ_k(v) is the number of directed edges in the subgraph induced by the
//! closed `k`-th order neighborhood `N_k[v]` (distances taken on the
//! underlying undirected graph). Ψ₀(v) is defined separately as in-degree
//! plus out-degree.

use serde::{Deserialize, Serialize};

use crate::graph::{Graph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityScore {
    pub vertex: VertexId,
    pub k: usize,
    pub value: u64,
}

/// Reusable per-thread scratch space: an epoch-stamped membership array and
/// BFS buffers, so hot loops never allocate or clear `O(n)` state per call.
#[derive(Clone, Debug)]
pub struct Workspace {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<u32>,
    next: Vec<u32>,
    members: Vec<u32>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace {
            stamp: vec![0; n],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
            members: Vec::new(),
        }
    }

    pub fn for_graph(g: &Graph) -> Self {
        Self::new(g.num_vertices())
    }

    fn begin(&mut self) {
        if self.epoch == u32::MAX {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.members.clear();
    }

    #[inline]
    fn is_marked(&self, v: u32) -> bool {
        self.stamp[v as usize] == self.epoch
    }

    /// Marks `v`; returns true if it was not yet marked.
    #[inline]
    fn mark(&mut self, v: u32) -> bool {
        let s = &mut self.stamp[v as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }

    /// Marks `N_k[v]` and collects it into `self.members`.
    fn mark_neighborhood(&mut self, g: &Graph, v: VertexId, k: usize) {
        self.begin();
        self.mark(v.0);
        self.members.push(v.0);
        self.frontier.clear();
        self.frontier.push(v.0);
        for _ in 0..k {
            if self.frontier.is_empty() {
                break;
            }
            self.next.clear();
            for i in 0..self.frontier.len() {
                let u = VertexId(self.frontier[i]);
                for &w in g.out_neighbors(u).iter().chain(g.in_neighbors(u)) {
                    if self.mark(w) {
                        self.next.push(w);
                        self.members.push(w);
                    }
                }
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
    }

    /// Counts directed edges among the currently marked members.
    fn count_marked_edges(&self, g: &Graph) -> u64 {
        let mut doubled = 0u64;
        for &u in &self.members {
            let u = VertexId(u);
            for &w in g.out_neighbors(u).iter().chain(g.in_neighbors(u)) {
                doubled += u64::from(self.is_marked(w));
            }
        }
        debug_assert!(doubled.is_multiple_of(2));
        doubled / 2
    }

    /// `N_k[v]` as a sorted vector.
    pub fn neighborhood(&mut self, g: &Graph, v: VertexId, k: usize) -> Vec<u32> {
        self.mark_neighborhood(g, v, k);
        let mut out = self.members.clone();
        out.sort_unstable();
        out
    }

    /// Ψ_k(v) reusing this workspace.
    pub fn psi_k(&mut self, g: &Graph, v: VertexId, k: usize) -> LocalityScore {
        let value = if k == 0 {
            g.degree_stat(v)
        } else {
            self.mark_neighborhood(g, v, k);
            self.count_marked_edges(g)
        };
        LocalityScore { vertex: v, k, value }
    }

    /// Ψ₁(v) by the incident-edge scan: every incident edge of every
    /// `u ∈ N₁[v]` with both endpoints in `N₁[v]` is counted, and the total
    /// (which sees each internal edge from both ends) is halved.
    pub fn local_stat(&mut self, g: &Graph, v: VertexId) -> u64 {
        self.mark_neighborhood(g, v, 1);
        self.count_marked_edges(g)
    }

    /// `⌊½ Σ_{u ∈ N₁[v]} min(Ψ₀(u), 2·|N₁[v]|)⌋`.
    pub fn est_lstat2(&mut self, g: &Graph, v: VertexId) -> u64 {
        // |N₁[v]| needs the union of in- and out-neighbors; reciprocal edges
        // would otherwise be counted twice.
        self.mark_neighborhood(g, v, 1);
        let cap = 2 * self.members.len() as u64;
        let sum: u64 = self.members.iter().map(|&u| g.degree_stat(VertexId(u)).min(cap)).sum();
        sum / 2
    }
}

/// Ψ₀(v): in-degree plus out-degree.
pub fn degree_stat(g: &Graph, v: VertexId) -> u64 {
    g.degree_stat(v)
}

/// Ψ_k(v). Allocates a fresh [`Workspace`]; use [`Workspace::psi_k`] in loops.
pub fn psi_k(g: &Graph, v: VertexId, k: usize) -> LocalityScore {
    Workspace::for_graph(g).psi_k(g, v, k)
}

/// Ψ_k for every vertex, indexed by vertex.
pub fn psi_k_all(g: &Graph, k: usize) -> Vec<u64> {
    use rayon::prelude::*;
    (0..g.num_vertices())
        .into_par_iter()
        .map_init(
            || Workspace::for_graph(g),
            |ws, i| ws.psi_k(g, VertexId::from_index(i), k).value,
        )
        .collect()
}

/// Ψ₁(v) by the incident-edge scan formulation.
pub fn local_stat(g: &Graph, v: VertexId) -> LocalityScore {
    let value = Workspace::for_graph(g).local_stat(g, v);
    LocalityScore { vertex: v, k: 1, value }
}

/// Loose bound `Ψ₀(v)² + Ψ₀(v) ≥ Ψ₁(v)`: `N₁[v]` has at most `Ψ₀(v) + 1`
/// vertices, hence at most `(Ψ₀ + 1)·Ψ₀` directed edges.
#[inline]
pub fn est_lstat1(g: &Graph, v: VertexId) -> u64 {
    let d = g.degree_stat(v);
    d * d + d
}

/// Tighter bound: every `u ∈ N₁[v]` contributes at most `min(Ψ₀(u), 2|N₁[v]|)`
/// edge endpoints, and each internal edge has two endpoints.
pub fn est_lstat2(g: &Graph, v: VertexId) -> u64 {
    Workspace::for_graph(g).est_lstat2(g, v)
}

/// Number of elements common to two strictly increasing slices. Uses a
/// linear merge for similar sizes and binary search when one side is much
/// shorter.
pub fn intersection_count(a: &[u32], b: &[u32]) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return 0;
    }
    if small.len() * 16 < large.len() {
        let mut rest = large;
        let mut count = 0;
        for &x in small {
            match rest.binary_search(&x) {
                Ok(i) => {
                    count += 1;
                    rest = &rest[i + 1..];
                }
                Err(i) => rest = &rest[i..],
            }
            if rest.is_empty() {
                break;
            }
        }
        return count;
    }
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < small.len() && j < large.len() {
        match small[i].cmp(&large[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Doubled contribution of the members `part ⊆ N₁[v]` to Ψ₁(v): for each
/// `u` in `part`, the number of in- and out-neighbors of `u` inside `closed`
/// (the sorted `N₁[v]`). Summing over a partition of `N₁[v]` and halving gives
/// Ψ₁(v); this is the unit of work the parallel search splits heavy vertices
/// into.
pub fn partial_doubled_count(g: &Graph, closed: &[u32], part: &[u32]) -> u64 {
    part.iter()
        .map(|&u| {
            let u = VertexId(u);
            (intersection_count(g.out_neighbors(u), closed) + intersection_count(g.in_neighbors(u), closed)) as u64
        })
        .sum()
}
