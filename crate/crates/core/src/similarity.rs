//! Jaccard similarity between closed neighborhoods of the selected vertices.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::linalg::SymmetricMatrix;
use crate::locality::{intersection_count, Workspace};
use crate::scalar::Scalar;

/// Exact Jaccard index `|A ∩ B| / |A ∪ B|`.
pub type Jaccard = Ratio<u64>;

/// Default cap on memory held by materialized neighborhoods (bytes).
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

/// Jaccard index of two sorted, duplicate-free sets. Both empty gives 1.
pub fn jaccard_sorted(a: &[u32], b: &[u32]) -> Jaccard {
    let inter = intersection_count(a, b) as u64;
    let union = (a.len() + b.len()) as u64 - inter;
    if union == 0 {
        Ratio::from_integer(1)
    } else {
        Ratio::new(inter, union)
    }
}

/// Jaccard index of `N_k[vi]` and `N_k[vj]`.
pub fn jaccard(g: &Graph, vi: VertexId, vj: VertexId, k: usize) -> Jaccard {
    let mut ws = Workspace::for_graph(g);
    let a = ws.neighborhood(g, vi, k);
    let b = ws.neighborhood(g, vj, k);
    jaccard_sorted(&a, &b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix<T> {
    /// Row/column labels.
    pub vertices: Vec<VertexId>,
    pub values: SymmetricMatrix<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn order(&self) -> usize {
        self.vertices.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i, j)
    }

    /// CSV dump: a header `vertex,<id>,<id>,…` then one row per vertex.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "vertex")?;
        for v in &self.vertices {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
        for (i, v) in self.vertices.iter().enumerate() {
            write!(w, "{v}")?;
            for x in self.values.row(i) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
        let header = header?;
        let mut cells = header.split(',');
        if cells.next() != Some("vertex") {
            return Err(bad(1, "header must start with `vertex`".into()));
        }
        let vertices = cells
            .map(|c| c.trim().parse::<u32>().map(VertexId))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(1, e.to_string()))?;
        let mut rows = Vec::with_capacity(vertices.len());
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .skip(1)
                .map(|c| c.trim().parse::<f64>().map(T::lit))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(i + 1, e.to_string()))?;
            rows.push(row);
        }
        if rows.len() != vertices.len() {
            return Err(bad(rows.len() + 1, "row count does not match header".into()));
        }
        Ok(SimilarityMatrix {
            vertices,
            values: SymmetricMatrix::from_rows(rows)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimilarityOptions {
    pub k: usize,
    /// Upper bound on bytes of neighborhoods held at once; rows are processed
    /// in blocks when the selection does not fit.
    pub memory_budget: usize,
}

impl Default for SimilarityOptions {
    fn default() -> Self {
        SimilarityOptions {
            k: 1,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Pairwise Jaccard matrix over `selected`, with `k`-th order neighborhoods.
pub fn build_similarity_matrix<T: Scalar>(g: &Graph, selected: &[VertexId], k: usize) -> Result<SimilarityMatrix<T>> {
    build_similarity_matrix_with(
        g,
        selected,
        &SimilarityOptions {
            k,
            ..Default::default()
        },
    )
}

fn to_scalar<T: Scalar>(r: Jaccard) -> T {
    T::lit(r.to_f64().expect("ratio of u64 converts to f64"))
}

/// Neighborhoods of `selected[start..]` until the block reaches `budget` bytes
/// (always at least one vertex).
fn materialize_block(g: &Graph, selected: &[VertexId], start: usize, k: usize, budget: usize) -> Vec<Vec<u32>> {
    let mut ws = Workspace::for_graph(g);
    let mut block = Vec::new();
    let mut bytes = 0;
    for &v in &selected[start..] {
        let nb = ws.neighborhood(g, v, k);
        bytes += nb.len() * std::mem::size_of::<u32>();
        block.push(nb);
        if bytes >= budget {
            break;
        }
    }
    block
}

pub fn build_similarity_matrix_with<T: Scalar>(
    g: &Graph,
    selected: &[VertexId],
    opts: &SimilarityOptions,
) -> Result<SimilarityMatrix<T>> {
    if selected.is_empty() {
        return Err(Error::arg("selection must not be empty"));
    }
    if opts.k == 0 {
        return Err(Error::arg("similarity order k must be at least 1"));
    }
    let mut seen = HashSet::with_capacity(selected.len());
    for &v in selected {
        if !g.contains(v) {
            return Err(Error::arg(format!("vertex {v} not in graph")));
        }
        if !seen.insert(v) {
            return Err(Error::arg(format!("vertex {v} selected more than once")));
        }
    }
    let q = selected.len();
    let half = (opts.memory_budget / 2).max(1);
    let mut values = SymmetricMatrix::<T>::identity(q);
    let mut i0 = 0;
    while i0 < q {
        let rows = materialize_block(g, selected, i0, opts.k, half);
        let i1 = i0 + rows.len();
        let inner: Vec<Vec<T>> = rows
            .par_iter()
            .enumerate()
            .map(|(a, na)| {
                rows[a + 1..]
                    .iter()
                    .map(|nb| to_scalar(jaccard_sorted(na, nb)))
                    .collect()
            })
            .collect();
        for (a, row) in inner.into_iter().enumerate() {
            for (b, x) in row.into_iter().enumerate() {
                values.set(i0 + a, i0 + a + 1 + b, x);
            }
        }
        let mut j0 = i1;
        while j0 < q {
            let cols = materialize_block(g, selected, j0, opts.k, half);
            let cross: Vec<Vec<T>> = rows
                .par_iter()
                .map(|na| cols.iter().map(|nb| to_scalar(jaccard_sorted(na, nb))).collect())
                .collect();
            for (a, row) in cross.into_iter().enumerate() {
                for (b, x) in row.into_iter().enumerate() {
                    values.set(i0 + a, j0 + b, x);
                }
            }
            j0 += cols.len();
        }
        i0 = i1;
    }
    Ok(SimilarityMatrix {
        vertices: selected.to_vec(),
        values,
    })
}
