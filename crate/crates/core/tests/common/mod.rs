//! Shared fixtures and brute-force oracles for integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use active_scan::Graph;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed G(n, p) without self-loops.
pub fn gnp(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in 0..n as u32 {
            if a != b && rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Random graph `i` of the trimming corpus: even indices are sparse
/// Erdős–Rényi graphs, odd ones add a fully reciprocated clique on random
/// vertices.
pub fn corpus_graph(i: u64) -> Graph {
    let mut r = rng(0xC0FFEE ^ i.wrapping_mul(0x9E37_79B9));
    let n = r.gen_range(50..=500);
    let avg_out = r.gen_range(1.5..8.0);
    let mut edges = gnp(n, avg_out / n as f64, &mut r);
    if i % 2 == 1 {
        let size = r.gen_range(5..=20);
        let members: Vec<u32> = sample(&mut r, n, size).into_iter().map(|x| x as u32).collect();
        for &a in &members {
            for &b in &members {
                if a != b {
                    edges.push((a, b));
                }
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Undirected adjacency sets, built straight from the edge list.
pub fn undirected(g: &Graph) -> Vec<HashSet<usize>> {
    let mut adj = vec![HashSet::new(); g.num_vertices()];
    for (a, b) in g.edges() {
        adj[a.index()].insert(b.index());
        adj[b.index()].insert(a.index());
    }
    adj
}

/// `N_k[v]` by breadth-first search over `adj`.
pub fn ball(adj: &[HashSet<usize>], v: usize, k: usize) -> HashSet<usize> {
    let mut dist = HashMap::from([(v, 0usize)]);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == k {
            continue;
        }
        for &w in &adj[u] {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist.into_keys().collect()
}

/// Ψ_k for every vertex: edges of the graph with both endpoints in `N_k[v]`.
pub fn brute_psi(g: &Graph, k: usize) -> Vec<u64> {
    let adj = undirected(g);
    let edges: Vec<(usize, usize)> = g.edges().map(|(a, b)| (a.index(), b.index())).collect();
    (0..g.num_vertices())
        .map(|v| {
            if k == 0 {
                return edges.iter().filter(|&&(a, b)| a == v || b == v).count() as u64;
            }
            let members = ball(&adj, v, k);
            edges
                .iter()
                .filter(|(a, b)| members.contains(a) && members.contains(b))
                .count() as u64
        })
        .collect()
}

/// The `q` largest values, descending.
pub fn top_values(mut values: Vec<u64>, q: usize) -> Vec<u64> {
    values.sort_unstable_by(|a, b| b.cmp(a));
    values.truncate(q);
    values
}

/// Pair-counting ARI: `2(n00·n11 − n01·n10) / ((n00+n01)(n01+n11) + (n00+n10)(n10+n11))`
/// over all unordered item pairs, as an exact fraction.
pub fn pair_counting_ari<L: PartialEq>(a: &[L], b: &[L]) -> (i128, i128) {
    let (mut n00, mut n01, mut n10, mut n11) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1,
                (true, false) => n10 += 1,
                (false, true) => n01 += 1,
                (false, false) => n00 += 1,
            }
        }
    }
    let num = 2 * (n00 * n11 - n01 * n10);
    let den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if den == 0 {
        (1, 1)
    } else {
        (num, den)
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn ranking_probability(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &pi) in positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Affinity with `sizes.len()` blocks (1 within, 0 across), rows shuffled.
/// Returns the matrix rows and the block of each row.
pub fn ideal_affinity(sizes: &[usize], rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| vec![b; s]).collect();
    labels.shuffle(rng);
    let rows = labels
        .iter()
        .map(|a| labels.iter().map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect();
    (rows, labels)
}
