//! Immutable directed simple graphs in CSR form.
//!
//! Both the out- and in-adjacency are stored, each sorted strictly
//! increasing, so that the incident edges of a vertex are available without a
//! transpose and membership tests can be merge-based.
//!
//! # Binary layout
//!
//! [`Graph::write_binary`] and [`Graph::read_binary`] use the following
//! little-endian layout, with no header or padding:
//!
//! | offset (bytes)      | type            | content                           |
//! |---------------------|-----------------|-----------------------------------|
//! | 0                   | `u64`           | `n`, the vertex count             |
//! | 8                   | `u64`           | `m`, the directed edge count      |
//! | 16                  | `u64 × (n + 1)` | out-adjacency offsets, `0 ..= m`  |
//! | 16 + 8(n + 1)       | `u64 × m`       | out-neighbor targets              |
//!
//! Offsets are non-decreasing with `offsets[0] = 0` and `offsets[n] = m`; the
//! targets of vertex `v` are `targets[offsets[v] .. offsets[v + 1]]`, strictly
//! increasing and never equal to `v`. The in-adjacency is rebuilt on load.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
#[repr(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        VertexId(u32::try_from(i).expect("vertex index exceeds u32"))
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Counters and the id remap table produced by [`Graph::load_edge_list`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// `original_ids[dense]` is the id the vertex had in the input.
    pub original_ids: Vec<u64>,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
    pub lines_read: usize,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.num_vertices())
            .field("m", &self.num_edges())
            .finish()
    }
}

fn csr_from_sorted(n: usize, edges: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for &(s, _) in edges {
        offsets[s as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let targets = edges.iter().map(|&(_, d)| d).collect();
    (offsets, targets)
}

impl Graph {
    /// Builds a graph over `n` vertices, dropping self-loops and duplicate
    /// edges. Returns the graph and the `(self_loops, duplicates)` dropped.
    pub fn from_edges_counted(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<(Self, usize, usize)> {
        if u32::try_from(n).is_err() {
            return Err(Error::arg(format!("vertex count {n} exceeds u32")));
        }
        let mut loops = 0;
        let mut list = Vec::new();
        for (s, d) in edges {
            if s as usize >= n || d as usize >= n {
                return Err(Error::arg(format!("edge ({s}, {d}) out of range for n = {n}")));
            }
            if s == d {
                loops += 1;
            } else {
                list.push((s, d));
            }
        }
        list.sort_unstable();
        let before = list.len();
        list.dedup();
        let dups = before - list.len();
        Ok((Self::from_canonical(n, &list), loops, dups))
    }

    /// Builds a graph over `n` vertices; self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        Self::from_edges_counted(n, edges).map(|(g, _, _)| g)
    }

    /// `edges` must be sorted, deduplicated and loop-free.
    fn from_canonical(n: usize, edges: &[(u32, u32)]) -> Self {
        let (out_offsets, out_targets) = csr_from_sorted(n, edges);
        let mut rev: Vec<(u32, u32)> = edges.iter().map(|&(s, d)| (d, s)).collect();
        rev.sort_unstable();
        let (in_offsets, in_sources) = csr_from_sorted(n, &rev);
        Graph {
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    /// Parses a whitespace-separated edge list.
    ///
    /// Lines starting with `#` and blank lines are skipped. A line with a single
    /// id declares a vertex without edges (this is how the canonical writer
    /// preserves isolated vertices). Ids are remapped to `[0, n)` in ascending
    /// order of the original id.
    pub fn load_edge_list<R: BufRead>(reader: R) -> Result<(Self, LoadReport)> {
        let mut raw_edges: Vec<(u64, u64)> = Vec::new();
        let mut ids: Vec<u64> = Vec::new();
        let mut lines_read = 0;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            lines_read += 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<u64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("expected a non-negative integer vertex id, found {tok:?}"),
                })
            };
            let mut toks = t.split_whitespace();
            let first = parse(toks.next().expect("non-empty line"))?;
            match (toks.next(), toks.next()) {
                (None, _) => ids.push(first),
                (Some(second), None) => {
                    let second = parse(second)?;
                    ids.push(first);
                    ids.push(second);
                    raw_edges.push((first, second));
                }
                (Some(_), Some(extra)) => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected `src dst`, found extra token {extra:?}"),
                    })
                }
            }
        }
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        if u32::try_from(ids.len()).is_err() {
            return Err(Error::arg("more than u32::MAX distinct vertices"));
        }
        let remap: HashMap<u64, u32> = ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        let n = ids.len();
        let (graph, loops, dups) = Self::from_edges_counted(n, raw_edges.iter().map(|(s, d)| (remap[s], remap[d])))?;
        if loops > 0 {
            warn!("dropped {loops} self-loop(s)");
        }
        if dups > 0 {
            warn!("dropped {dups} duplicate edge(s)");
        }
        let report = LoadReport {
            original_ids: ids,
            self_loops_dropped: loops,
            duplicates_dropped: dups,
            lines_read,
        };
        Ok((graph, report))
    }

    /// Writes the canonical edge list: one `src dst` line per edge sorted by
    /// `(src, dst)`, preceded by single-id lines for vertices without edges.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n={} m={}", self.num_vertices(), self.num_edges())?;
        for v in self.vertices() {
            if self.degree_stat(v) == 0 {
                writeln!(w, "{v}")?;
            }
        }
        for (s, d) in self.edges() {
            writeln!(w, "{s} {d}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.num_vertices() as u64).to_le_bytes())?;
        w.write_all(&(self.num_edges() as u64).to_le_bytes())?;
        for &o in &self.out_offsets {
            w.write_all(&(o as u64).to_le_bytes())?;
        }
        for &t in &self.out_targets {
            w.write_all(&u64::from(t).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("binary graph: truncated input: {e}")))?;
            Ok(u64::from_le_bytes(buf))
        };
        let n = next(&mut r)?;
        let m = next(&mut r)?;
        if n > u64::from(u32::MAX) {
            return Err(Error::Format(format!("binary graph: vertex count {n} exceeds u32")));
        }
        let n = n as usize;
        let m = usize::try_from(m).map_err(|_| Error::Format("binary graph: edge count overflows".into()))?;
        let mut offsets = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            offsets.push(next(&mut r)? as usize);
        }
        if offsets[0] != 0 || offsets[n] != m || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("binary graph: offsets are not a valid CSR index".into()));
        }
        let mut edges = Vec::with_capacity(m);
        for s in 0..n {
            let mut prev: Option<u64> = None;
            for _ in offsets[s]..offsets[s + 1] {
                let d = next(&mut r)?;
                if d >= n as u64 || d == s as u64 || prev.is_some_and(|p| p >= d) {
                    return Err(Error::Format(format!(
                        "binary graph: adjacency of vertex {s} is not strictly increasing, loop-free and in range"
                    )));
                }
                prev = Some(d);
                edges.push((s as u32, d as u32));
            }
        }
        Ok(Self::from_canonical(n, &edges))
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.out_offsets.len() - 1
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.num_vertices()).map(VertexId::from_index)
    }

    /// All directed edges, sorted by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.vertices()
            .flat_map(move |s| self.out_neighbors(s).iter().map(move |&d| (s, VertexId(d))))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.num_vertices()
    }

    #[inline]
    pub fn out_neighbors(&self, v: VertexId) -> &[u32] {
        let i = v.index();
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    #[inline]
    pub fn in_neighbors(&self, v: VertexId) -> &[u32] {
        let i = v.index();
        &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]]
    }

    pub fn has_edge(&self, s: VertexId, d: VertexId) -> bool {
        self.out_neighbors(s).binary_search(&d.0).is_ok()
    }

    /// Ψ₀: in-degree plus out-degree.
    #[inline]
    pub fn degree_stat(&self, v: VertexId) -> u64 {
        (self.out_neighbors(v).len() + self.in_neighbors(v).len()) as u64
    }

    pub fn max_degree_stat(&self) -> u64 {
        self.vertices().map(|v| self.degree_stat(v)).max().unwrap_or(0)
    }

    /// Closed first-order neighborhood `N₁[v]` as a sorted vector.
    pub fn closed_neighbors(&self, v: VertexId) -> Vec<u32> {
        let (a, b) = (self.out_neighbors(v), self.in_neighbors(v));
        let mut out = Vec::with_capacity(a.len() + b.len() + 1);
        let (mut i, mut j) = (0, 0);
        let mut center = Some(v.0);
        loop {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    y
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => break,
            };
            if let Some(c) = center {
                if c < next {
                    out.push(c);
                    center = None;
                }
            }
            out.push(next);
        }
        if let Some(c) = center {
            out.push(c);
        }
        out
    }

    /// Closed `k`-th order neighborhood on the underlying undirected graph,
    /// sorted ascending. Always contains `v`.
    pub fn neighborhood(&self, v: VertexId, k: usize) -> Vec<VertexId> {
        let mut seen = HashSet::new();
        seen.insert(v.0);
        let mut frontier = VecDeque::from([(v.0, 0usize)]);
        while let Some((u, d)) = frontier.pop_front() {
            if d == k {
                continue;
            }
            let u = VertexId(u);
            for &w in self.out_neighbors(u).iter().chain(self.in_neighbors(u)) {
                if seen.insert(w) {
                    frontier.push_back((w, d + 1));
                }
            }
        }
        let mut out: Vec<VertexId> = seen.into_iter().map(VertexId).collect();
        out.sort_unstable();
        out
    }

    /// Number of directed edges with both endpoints in `members`.
    ///
    /// Scans the in- and out-incident edges of every member; each internal
    /// edge is seen once from each endpoint, so the scan count is halved.
    pub fn induced_edge_count(&self, members: &[VertexId]) -> u64 {
        let mut mark = vec![false; self.num_vertices()];
        let mut unique = Vec::with_capacity(members.len());
        for &u in members {
            if !std::mem::replace(&mut mark[u.index()], true) {
                unique.push(u);
            }
        }
        let mut doubled = 0u64;
        for u in unique {
            for &w in self.out_neighbors(u).iter().chain(self.in_neighbors(u)) {
                doubled += u64::from(mark[w as usize]);
            }
        }
        doubled / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> (Graph, LoadReport) {
        Graph::load_edge_list(s.as_bytes()).unwrap()
    }

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    #[test]
    fn loads_three_cycle() {
        let (g, r) = load("0 1\n1 2\n2 0");
        assert_eq!((g.num_vertices(), g.num_edges()), (3, 3));
        assert!(g.has_edge(v(0), v(1)) && g.has_edge(v(1), v(2)) && g.has_edge(v(2), v(0)));
        assert_eq!(r.self_loops_dropped + r.duplicates_dropped, 0);
    }

    #[test]
    fn drops_self_loops() {
        let (g, r) = load("5 5\n5 6");
        assert_eq!((g.num_vertices(), g.num_edges()), (2, 1));
        assert_eq!(r.self_loops_dropped, 1);
        assert_eq!(r.original_ids, vec![5, 6]);
    }

    #[test]
    fn drops_duplicates() {
        let (g, r) = load("0 1\n0 1\n1 0");
        assert_eq!((g.num_vertices(), g.num_edges()), (2, 2));
        assert_eq!(r.duplicates_dropped, 1);
    }

    #[test]
    fn remaps_sparse_ids_and_skips_comments() {
        let (g, r) = load("# header\n\n100 7\n7 3000000000\n");
        assert_eq!(r.original_ids, vec![7, 100, 3_000_000_000]);
        assert!(g.has_edge(v(1), v(0)));
        assert!(g.has_edge(v(0), v(2)));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Graph::load_edge_list("0 1\n# c\n2 x\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Graph::load_edge_list("-1 2".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::load_edge_list("1 2 3".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(Graph::load_edge_list("".as_bytes()), Err(Error::EmptyInput)));
        assert!(matches!(
            Graph::load_edge_list("# only comments\n".as_bytes()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn degree_stat_examples() {
        let (g, _) = load("0 1\n1 2\n2 0");
        for u in g.vertices() {
            assert_eq!(g.degree_stat(u), 2);
        }
        let (g, _) = load("0 1\n1 0\n2");
        assert_eq!(g.degree_stat(v(0)), 2);
        assert_eq!(g.degree_stat(v(2)), 0);
    }

    #[test]
    fn neighborhood_examples() {
        let (g, _) = load("0 1\n1 2\n2 0");
        assert_eq!(g.neighborhood(v(1), 0), vec![v(1)]);
        assert_eq!(g.neighborhood(v(0), 1), vec![v(0), v(1), v(2)]);
        let (p, _) = load("0 1\n1 2\n2 3");
        assert_eq!(p.neighborhood(v(0), 2), vec![v(0), v(1), v(2)]);
        assert_eq!(p.neighborhood(v(3), 1), vec![v(2), v(3)]);
    }

    #[test]
    fn closed_neighbors_matches_bfs() {
        let (g, _) = load("3 0\n0 5\n5 0\n2 0\n0 1\n4 2");
        for u in g.vertices() {
            let bfs: Vec<u32> = g.neighborhood(u, 1).into_iter().map(|x| x.0).collect();
            assert_eq!(g.closed_neighbors(u), bfs);
        }
    }

    #[test]
    fn induced_edge_count_examples() {
        let (g, _) = load("0 1\n1 2\n2 0");
        assert_eq!(g.induced_edge_count(&[v(0), v(1), v(2)]), 3);
        assert_eq!(g.induced_edge_count(&[v(0), v(1)]), 1);
        assert_eq!(g.induced_edge_count(&[v(0), v(1), v(0)]), 1);
        assert_eq!(g.induced_edge_count(&[]), 0);
    }

    #[test]
    fn canonical_text_and_binary_reload() {
        let (g, _) = load("4 1\n1 4\n9\n4 2\n2 1\n");
        let mut text = Vec::new();
        g.write_edge_list(&mut text).unwrap();
        let (h, r) = Graph::load_edge_list(text.as_slice()).unwrap();
        assert_eq!(g, h);
        assert_eq!(r.original_ids, (0..4).collect::<Vec<u64>>());

        let mut bin = Vec::new();
        g.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 16 + 8 * (g.num_vertices() + 1) + 8 * g.num_edges());
        assert_eq!(&bin[0..8], &4u64.to_le_bytes());
        assert_eq!(&bin[8..16], &4u64.to_le_bytes());
        assert_eq!(Graph::read_binary(bin.as_slice()).unwrap(), g);
    }

    #[test]
    fn binary_rejects_corrupt_input() {
        let (g, _) = load("0 1\n1 2\n");
        let mut bin = Vec::new();
        g.write_binary(&mut bin).unwrap();
        assert!(Graph::read_binary(&bin[..bin.len() - 3]).is_err());
        let mut loop_edge = bin.clone();
        // first target (vertex 0 -> 1) rewritten as 0 -> 0
        let first_target = 16 + 8 * 4;
        loop_edge[first_target..first_target + 8].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(
            Graph::read_binary(loop_edge.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
