//! Top-`Q` search over Ψ₁ with bound-based trimming.
//!
//! Candidates are visited in descending Ψ₀ order while a running maximum of
//! the exact Ψ₁ values found so far is kept. A vertex is evaluated exactly only
//! if both upper bounds ([`est_lstat1`], then [`est_lstat2`]) reach the running
//! maximum; pruning is strict (`bound < max`), so ties at the boundary are
//! always evaluated.
//!
//! [`topq_lstat`] runs the search in two stages: first until at least `Q`
//! exact values are known, then repeatedly with the current `Q`-th value as
//! the floor until a pass discovers nothing above it.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::locality::{est_lstat1, partial_doubled_count, psi_k_all, Workspace};

/// Neighbor-chunk size above which a single Ψ₁ evaluation is split into
/// independently schedulable parts.
pub const DEFAULT_CHUNK_SIZE: usize = 1024;

#[derive(Clone, Debug)]
pub struct TrimOptions {
    pub workers: usize,
    pub chunk_size: usize,
    /// Record every skip decision in [`TopQResult::skips`].
    pub trace: bool,
}

impl Default for TrimOptions {
    fn default() -> Self {
        TrimOptions {
            workers: 1,
            chunk_size: DEFAULT_CHUNK_SIZE,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Est1,
    Est2,
}

/// A vertex skipped because `bound < threshold` at the time it was visited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub vertex: VertexId,
    pub kind: BoundKind,
    pub bound: u64,
    pub threshold: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopQResult {
    pub q: usize,
    /// `(vertex, Ψ₁)` sorted by value descending, then id ascending. Holds the
    /// top `q` plus any further vertices tied with the `q`-th value.
    pub entries: Vec<(VertexId, u64)>,
    pub computed_count: usize,
    pub est1_count: usize,
    pub est2_count: usize,
    /// Number of `top_lstat` passes over the pending set.
    pub passes: usize,
    /// Exact evaluations performed by each worker (one entry when serial).
    pub per_worker_computed: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skips: Vec<SkipRecord>,
}

impl TopQResult {
    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(_, x)| x)
    }

    /// The first `q` values.
    pub fn top_values(&self) -> Vec<u64> {
        self.values().take(self.q).collect()
    }

    /// The first `q` vertices.
    pub fn top_vertices(&self) -> Vec<VertexId> {
        self.entries.iter().take(self.q).map(|&(v, _)| v).collect()
    }

    pub fn kth_value(&self) -> u64 {
        self.entries[self.q - 1].1
    }
}

/// Bookkeeping of a trimming search: the running maximum, the exactly
/// computed vertices and the degree-ordered vertices still unknown.
#[derive(Clone, Debug)]
pub struct TrimState {
    pub curr_max: u64,
    pub known: Vec<(VertexId, u64)>,
    pub pending: Vec<VertexId>,
}

impl TrimState {
    pub fn new(g: &Graph) -> Self {
        TrimState {
            curr_max: 0,
            known: Vec::new(),
            pending: degree_order(g, g.vertices().collect()),
        }
    }

    fn absorb(&mut self, found: Vec<(VertexId, u64)>, n: usize) {
        if found.is_empty() {
            return;
        }
        let mut done = vec![false; n];
        for &(v, x) in &found {
            done[v.index()] = true;
            self.curr_max = self.curr_max.max(x);
        }
        self.pending.retain(|v| !done[v.index()]);
        self.known.extend(found);
        sort_scores(&mut self.known);
    }
}

/// Sorts by Ψ₀ descending, ties by ascending id.
fn degree_order(g: &Graph, mut vs: Vec<VertexId>) -> Vec<VertexId> {
    vs.sort_unstable_by_key(|&v| (std::cmp::Reverse(g.degree_stat(v)), v));
    vs
}

fn sort_scores(scores: &mut [(VertexId, u64)]) {
    scores.sort_unstable_by_key(|&(v, x)| (std::cmp::Reverse(x), v));
}

#[derive(Default)]
struct Counters {
    computed: AtomicUsize,
    est1: AtomicUsize,
    est2: AtomicUsize,
}

impl Counters {
    fn bump(c: &AtomicUsize) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

/// Shared monotone running maximum. Reads are unsynchronized and may be
/// stale; an update first compares without locking and only then takes the
/// lock and re-checks.
#[derive(Debug, Default)]
pub struct MonotoneMax {
    value: AtomicU64,
    lock: Mutex<()>,
}

impl MonotoneMax {
    pub fn new(initial: u64) -> Self {
        MonotoneMax {
            value: AtomicU64::new(initial),
            lock: Mutex::new(()),
        }
    }

    #[inline]
    pub fn get(&self) -> u64 {
        self.value.load(Ordering::Relaxed)
    }

    /// Raises the maximum to `x`; returns true if this call changed it.
    pub fn raise(&self, x: u64) -> bool {
        if x <= self.get() {
            return false;
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if x > self.value.load(Ordering::Acquire) {
            self.value.store(x, Ordering::Release);
            true
        } else {
            false
        }
    }
}

struct SerialPass<'a> {
    g: &'a Graph,
    ws: Workspace,
    counters: Counters,
    skips: Option<Vec<SkipRecord>>,
}

impl<'a> SerialPass<'a> {
    fn new(g: &'a Graph, trace: bool) -> Self {
        SerialPass {
            g,
            ws: Workspace::for_graph(g),
            counters: Counters::default(),
            skips: trace.then(Vec::new),
        }
    }

    fn skip(&mut self, vertex: VertexId, kind: BoundKind, bound: u64, threshold: u64) {
        if let Some(s) = self.skips.as_mut() {
            s.push(SkipRecord {
                vertex,
                kind,
                bound,
                threshold,
            });
        }
    }

    /// One `top_lstat` pass over `order` (degree-descending).
    fn run(&mut self, order: &[VertexId], floor: u64) -> Vec<(VertexId, u64)> {
        let g = self.g;
        let mut curr_max = floor;
        let mut found = Vec::new();
        for (i, &v) in order.iter().enumerate() {
            Counters::bump(&self.counters.est1);
            let e1 = est_lstat1(g, v);
            if e1 < curr_max {
                // est1 is non-increasing along the order and curr_max never
                // decreases, so every remaining vertex fails the same test.
                self.skip(v, BoundKind::Est1, e1, curr_max);
                if self.skips.is_some() {
                    for &u in &order[i + 1..] {
                        self.skip(u, BoundKind::Est1, est_lstat1(g, u), curr_max);
                    }
                }
                break;
            }
            Counters::bump(&self.counters.est2);
            let e2 = self.ws.est_lstat2(g, v);
            if e2 < curr_max {
                self.skip(v, BoundKind::Est2, e2, curr_max);
                continue;
            }
            Counters::bump(&self.counters.computed);
            let x = self.ws.local_stat(g, v);
            curr_max = curr_max.max(x);
            found.push((v, x));
        }
        found
    }
}

/// Finds the maximum Ψ₁ over `candidates`, returning every vertex whose
/// exact value was computed along the way. `floor` initializes the running
/// maximum; vertices whose bound falls below it are never evaluated.
pub fn top_lstat(g: &Graph, candidates: &[VertexId], floor: u64) -> Result<Vec<(VertexId, u64)>> {
    if candidates.is_empty() {
        return Err(Error::arg("top_lstat needs at least one candidate"));
    }
    if let Some(v) = candidates.iter().find(|v| !g.contains(**v)) {
        return Err(Error::arg(format!("vertex {v} not in graph")));
    }
    let order = degree_order(g, candidates.to_vec());
    Ok(SerialPass::new(g, false).run(&order, floor))
}

fn check_q(g: &Graph, q: usize) -> Result<()> {
    let n = g.num_vertices();
    if q < 1 || q > n {
        return Err(Error::arg(format!("Q must lie in [1, {n}], got {q}")));
    }
    Ok(())
}

/// Two-stage driver shared by the serial and parallel searches.
fn drive(g: &Graph, q: usize, mut pass: impl FnMut(&[VertexId], u64) -> Vec<(VertexId, u64)>) -> (TrimState, usize) {
    let n = g.num_vertices();
    let mut state = TrimState::new(g);
    let mut passes = 0;
    while state.known.len() < q && !state.pending.is_empty() {
        let found = pass(&state.pending, 0);
        passes += 1;
        state.absorb(found, n);
    }
    while !state.pending.is_empty() {
        let kth = state.known[q - 1].1;
        let found = pass(&state.pending, kth);
        passes += 1;
        let improved = found.iter().any(|&(_, x)| x > kth);
        state.absorb(found, n);
        if !improved {
            break;
        }
    }
    (state, passes)
}

fn finish(
    q: usize,
    mut known: Vec<(VertexId, u64)>,
    counters: &Counters,
    passes: usize,
    per_worker_computed: Vec<usize>,
    skips: Vec<SkipRecord>,
) -> TopQResult {
    let kth = known[q - 1].1;
    let keep = q + known[q..].iter().take_while(|&&(_, x)| x == kth).count();
    known.truncate(keep);
    TopQResult {
        q,
        entries: known,
        computed_count: counters.computed.load(Ordering::Relaxed),
        est1_count: counters.est1.load(Ordering::Relaxed),
        est2_count: counters.est2.load(Ordering::Relaxed),
        passes,
        per_worker_computed,
        skips,
    }
}

/// The `q` vertices with the largest Ψ₁, found serially.
pub fn topq_lstat(g: &Graph, q: usize) -> Result<TopQResult> {
    topq_lstat_with(g, q, &TrimOptions::default())
}

pub fn topq_lstat_with(g: &Graph, q: usize, opts: &TrimOptions) -> Result<TopQResult> {
    check_q(g, q)?;
    if opts.workers > 1 {
        return topq_lstat_parallel_with(g, q, opts);
    }
    let mut runner = SerialPass::new(g, opts.trace);
    let (state, passes) = drive(g, q, |pending, floor| runner.run(pending, floor));
    let computed = runner.counters.computed.load(Ordering::Relaxed);
    let skips = runner.skips.take().unwrap_or_default();
    Ok(finish(q, state.known, &runner.counters, passes, vec![computed], skips))
}

/// Parallel search on a pool of `workers` threads. The values of the first
/// `q` entries are identical to [`topq_lstat`]; the amount of work may vary
/// between runs because workers can read a stale running maximum.
pub fn topq_lstat_parallel(g: &Graph, q: usize, workers: usize) -> Result<TopQResult> {
    topq_lstat_parallel_with(
        g,
        q,
        &TrimOptions {
            workers,
            ..TrimOptions::default()
        },
    )
}

pub fn topq_lstat_parallel_with(g: &Graph, q: usize, opts: &TrimOptions) -> Result<TopQResult> {
    check_q(g, q)?;
    if opts.workers == 0 {
        return Err(Error::arg("workers must be at least 1"));
    }
    if opts.chunk_size == 0 {
        return Err(Error::arg("chunk size must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .thread_name(|i| format!("trim-{i}"))
        .build()
        .map_err(|e| Error::arg(format!("cannot build worker pool: {e}")))?;
    let counters = Counters::default();
    let per_worker: Vec<AtomicUsize> = (0..opts.workers).map(|_| AtomicUsize::new(0)).collect();
    let skips = Mutex::new(Vec::new());
    let ctx = ParallelPass {
        g,
        opts,
        counters: &counters,
        per_worker: &per_worker,
        skips: &skips,
    };
    let (state, passes) = pool.install(|| drive(g, q, |pending, floor| ctx.run(pending, floor)));
    let per_worker = per_worker.iter().map(|c| c.load(Ordering::Relaxed)).collect();
    let skips = skips.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(finish(q, state.known, &counters, passes, per_worker, skips))
}

struct ParallelPass<'a> {
    g: &'a Graph,
    opts: &'a TrimOptions,
    counters: &'a Counters,
    per_worker: &'a [AtomicUsize],
    skips: &'a Mutex<Vec<SkipRecord>>,
}

impl ParallelPass<'_> {
    fn skip(&self, vertex: VertexId, kind: BoundKind, bound: u64, threshold: u64) {
        if self.opts.trace {
            self.skips.lock().unwrap_or_else(|e| e.into_inner()).push(SkipRecord {
                vertex,
                kind,
                bound,
                threshold,
            });
        }
    }

    /// Ψ₁(v) with `N₁[v]` split into chunks that idle workers can steal.
    fn chunked_local_stat(&self, v: VertexId) -> u64 {
        let g = self.g;
        let closed = g.closed_neighbors(v);
        let doubled: u64 = closed
            .par_chunks(self.opts.chunk_size)
            .map(|part| partial_doubled_count(g, &closed, part))
            .sum();
        doubled / 2
    }

    fn run(&self, pending: &[VertexId], floor: u64) -> Vec<(VertexId, u64)> {
        let g = self.g;
        let max = MonotoneMax::new(floor);
        // Rayon splits the slice into contiguous halves; interleaving the
        // degree order gives every initial partition a share of the heaviest
        // vertices at its front.
        let order = interleave(pending, self.opts.workers);
        order
            .par_iter()
            .map_init(
                || Workspace::for_graph(g),
                |ws, &v| {
                    Counters::bump(&self.counters.est1);
                    let e1 = est_lstat1(g, v);
                    let t = max.get();
                    if e1 < t {
                        self.skip(v, BoundKind::Est1, e1, t);
                        return None;
                    }
                    Counters::bump(&self.counters.est2);
                    let e2 = ws.est_lstat2(g, v);
                    let t = max.get();
                    if e2 < t {
                        self.skip(v, BoundKind::Est2, e2, t);
                        return None;
                    }
                    Counters::bump(&self.counters.computed);
                    if let Some(w) = rayon::current_thread_index() {
                        self.per_worker[w % self.per_worker.len()].fetch_add(1, Ordering::Relaxed);
                    }
                    let x = if g.degree_stat(v) as usize > self.opts.chunk_size {
                        self.chunked_local_stat(v)
                    } else {
                        ws.local_stat(g, v)
                    };
                    max.raise(x);
                    Some((v, x))
                },
            )
            .flatten()
            .collect()
    }
}

/// Reorders `xs` as `[x_0, x_w, x_2w, …, x_1, x_{w+1}, …]`.
fn interleave(xs: &[VertexId], w: usize) -> Vec<VertexId> {
    let w = w.max(1);
    (0..w).flat_map(|r| xs.iter().skip(r).step_by(w).copied()).collect()
}

/// Top-`q` by Ψ_k over a full sweep (every vertex computed), ties broken by
/// ascending id. Used for `k ≠ 1`, where no trimming bounds exist, and as the
/// evaluation-mode ranking.
pub fn topq_exhaustive(g: &Graph, q: usize, k: usize) -> Result<TopQResult> {
    check_q(g, q)?;
    let scores = psi_k_all(g, k);
    let n = g.num_vertices();
    let mut known: Vec<(VertexId, u64)> = scores
        .into_iter()
        .enumerate()
        .map(|(i, x)| (VertexId::from_index(i), x))
        .collect();
    sort_scores(&mut known);
    let counters = Counters::default();
    counters.computed.store(n, Ordering::Relaxed);
    Ok(finish(q, known, &counters, 1, vec![n], Vec::new()))
}

/// A serializable report of one top-`Q` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrimReport {
    pub q: usize,
    pub k: usize,
    pub workers: usize,
    pub n: usize,
    pub m: usize,
    pub entries: Vec<(VertexId, u64)>,
    pub computed_count: usize,
    pub est1_count: usize,
    pub est2_count: usize,
    pub passes: usize,
    pub per_worker_computed: Vec<usize>,
    pub wall_ms: f64,
}

impl TrimReport {
    pub fn entries_csv(&self) -> String {
        let mut s = String::from("vertex,psi\n");
        for (v, x) in &self.entries {
            s.push_str(&format!("{v},{x}\n"));
        }
        s
    }
}

/// Runs the top-`q` search for order `k` (trimming when `k = 1`) and times it.
pub fn run_topq(g: &Graph, q: usize, k: usize, workers: usize) -> Result<TrimReport> {
    let start = Instant::now();
    let res = if k == 1 {
        topq_lstat_with(
            g,
            q,
            &TrimOptions {
                workers,
                ..TrimOptions::default()
            },
        )?
    } else {
        topq_exhaustive(g, q, k)?
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(TrimReport {
        q,
        k,
        workers,
        n: g.num_vertices(),
        m: g.num_edges(),
        entries: res.entries,
        computed_count: res.computed_count,
        est1_count: res.est1_count,
        est2_count: res.est2_count,
        passes: res.passes,
        per_worker_computed: res.per_worker_computed,
        wall_ms,
    })
}

/// One row of a trimming benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub q: usize,
    pub wall_ms: f64,
    pub computed_count: usize,
    pub est1_count: usize,
    pub est2_count: usize,
}

/// Times the trimming search for each `Q` in ascending `q_values`.
pub fn bench_trim(g: &Graph, q_values: &[usize], workers: usize) -> Result<Vec<BenchRow>> {
    if q_values.is_empty() {
        return Err(Error::arg("q_values must not be empty"));
    }
    if q_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::arg("q_values must be ascending"));
    }
    q_values
        .iter()
        .map(|&q| {
            let r = run_topq(g, q, 1, workers)?;
            Ok(BenchRow {
                q,
                wall_ms: r.wall_ms,
                computed_count: r.computed_count,
                est1_count: r.est1_count,
                est2_count: r.est2_count,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("Q,wall_ms,computed_count,est1_count,est2_count\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.3},{},{},{}\n",
            r.q, r.wall_ms, r.computed_count, r.est1_count, r.est2_count
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locality::local_stat;

    fn g(n: usize, edges: &[(u32, u32)]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    fn three_cycle() -> Graph {
        g(3, &[(0, 1), (1, 2), (2, 0)])
    }

    /// Directed 5-clique on 0..5 plus `paths` disjoint 2-edge paths.
    fn clique_and_paths(paths: u32) -> Graph {
        let mut e = Vec::new();
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    e.push((a, b));
                }
            }
        }
        for p in 0..paths {
            let base = 5 + 3 * p;
            e.push((base, base + 1));
            e.push((base + 1, base + 2));
        }
        g(5 + 3 * paths as usize, &e)
    }

    #[test]
    fn top_lstat_on_three_cycle() {
        let c = three_cycle();
        let all: Vec<VertexId> = c.vertices().collect();
        let found = top_lstat(&c, &all, 0).unwrap();
        assert_eq!(found.iter().map(|x| x.1).max(), Some(3));
    }

    #[test]
    fn top_lstat_finds_clique_cheaply() {
        let graph = clique_and_paths(100);
        let all: Vec<VertexId> = graph.vertices().collect();
        let brute = all.iter().map(|&v| local_stat(&graph, v).value).max().unwrap();
        let found = top_lstat(&graph, &all, 0).unwrap();
        assert_eq!(found.iter().map(|x| x.1).max(), Some(brute));
        assert_eq!(brute, 20);
        assert!(found.len() < 10, "computed {} of {}", found.len(), all.len());
    }

    #[test]
    fn top_lstat_floor_above_every_bound_prunes_all() {
        let graph = clique_and_paths(3);
        let all: Vec<VertexId> = graph.vertices().collect();
        let max_e1 = all.iter().map(|&v| est_lstat1(&graph, v)).max().unwrap();
        assert!(top_lstat(&graph, &all, max_e1 + 1).unwrap().is_empty());
        assert!(top_lstat(&graph, &[], 0).is_err());
    }

    #[test]
    fn topq_three_cycle_and_q_errors() {
        let c = three_cycle();
        assert_eq!(topq_lstat(&c, 3).unwrap().top_values(), vec![3, 3, 3]);
        assert!(topq_lstat(&c, 0).is_err());
        assert!(topq_lstat(&c, 4).is_err());
        assert!(topq_lstat_parallel(&c, 2, 0).is_err());
    }

    #[test]
    fn ties_beyond_q_are_reported() {
        let c = three_cycle();
        let r = topq_lstat(&c, 1).unwrap();
        assert_eq!(r.entries.len(), 3);
        assert_eq!(r.top_values(), vec![3]);
    }

    #[test]
    fn q_equals_n_computes_everything() {
        let graph = clique_and_paths(10);
        let n = graph.num_vertices();
        let r = topq_lstat(&graph, n).unwrap();
        assert_eq!(r.computed_count, n);
        let mut all: Vec<u64> = graph.vertices().map(|v| local_stat(&graph, v).value).collect();
        all.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(r.top_values(), all);
    }

    #[test]
    fn search_continues_past_unchanged_kth_value() {
        // Q-th value tied with the (Q+1)-th; a later discovery above the floor
        // leaves the Q-th value unchanged. The search must still go on.
        let graph = clique_and_paths(4);
        for q in 1..=graph.num_vertices() {
            let r = topq_lstat(&graph, q).unwrap();
            let mut all: Vec<u64> = graph.vertices().map(|v| local_stat(&graph, v).value).collect();
            all.sort_unstable_by(|a, b| b.cmp(a));
            assert_eq!(r.top_values(), all[..q].to_vec(), "q = {q}");
        }
    }

    #[test]
    fn monotone_max_never_decreases() {
        let m = MonotoneMax::new(5);
        assert!(!m.raise(3));
        assert_eq!(m.get(), 5);
        assert!(m.raise(9));
        assert!(!m.raise(9));
        assert_eq!(m.get(), 9);
    }

    #[test]
    fn interleave_is_a_permutation() {
        let xs: Vec<VertexId> = (0..10).map(VertexId).collect();
        let mut ys = interleave(&xs, 3);
        assert_eq!(ys[..4], [VertexId(0), VertexId(3), VertexId(6), VertexId(9)]);
        ys.sort();
        assert_eq!(ys, xs);
    }

    #[test]
    fn bench_rejects_bad_q_values() {
        let c = three_cycle();
        assert!(bench_trim(&c, &[], 1).is_err());
        assert!(bench_trim(&c, &[2, 1], 1).is_err());
        let rows = bench_trim(&c, &[1, 3], 1).unwrap();
        assert_eq!(rows[1].computed_count, 3);
    }

    #[test]
    fn exhaustive_ranking_breaks_ties_by_id() {
        let graph = g(4, &[(0, 1), (2, 3)]);
        let r = topq_exhaustive(&graph, 2, 0).unwrap();
        assert_eq!(r.top_vertices(), vec![VertexId(0), VertexId(1)]);
        assert_eq!(r.computed_count, 4);
    }
}
