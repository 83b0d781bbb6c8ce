//! Spectral clustering of the selected vertices and classical MDS.
//!
//! The similarity matrix is turned into an affinity with an RBF kernel on the
//! Jaccard distance `1 − S`. Clustering uses the normalized affinity
//! `D^{-1/2} W D^{-1/2}`: its top eigenvectors, row-normalized, are clustered
//! with k-means (k-means++ seeding, several restarts). When the cluster count
//! is not given it is taken from the largest gap between consecutive
//! eigenvalues of the same normalized matrix.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::linalg::{symmetric_eigen, SymmetricMatrix};
use crate::scalar::Scalar;
use crate::seed;
use crate::similarity::SimilarityMatrix;

pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 300;
/// Lower bound applied to an estimated cluster count.
pub const MIN_ESTIMATED_CLUSTERS: usize = 2;

/// RBF bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma {
    /// Median of the off-diagonal distances `1 − S_ij` (1 if that median is 0).
    Auto,
    Fixed(f64),
}

/// How many clusters to produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterCount {
    /// Eigengap estimate, capped at `max`.
    Auto {
        max: usize,
    },
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub vertices: Vec<VertexId>,
    /// Cluster id per vertex, in `[0, num_clusters)`.
    pub labels: Vec<usize>,
    pub num_clusters: usize,
}

impl ClusterAssignment {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertex_id,cluster")?;
        for (v, l) in self.vertices.iter().zip(&self.labels) {
            writeln!(w, "{v},{l}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in r.lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| Error::Parse {
                line: i + 1,
                message: m,
            };
            let (v, l) = line
                .split_once(',')
                .ok_or_else(|| bad("expected `vertex_id,cluster`".into()))?;
            vertices.push(VertexId(v.trim().parse().map_err(|e| bad(format!("{e}")))?));
            labels.push(l.trim().parse().map_err(|e| bad(format!("{e}")))?);
        }
        let num_clusters = labels.iter().max().map_or(0, |&m| m + 1);
        Ok(ClusterAssignment {
            vertices,
            labels,
            num_clusters,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics<T> {
    /// Spectrum of the normalized affinity, descending.
    pub eigenvalues: Vec<T>,
    /// Number of clusters used.
    pub chosen_gap_index: usize,
    /// The eigengap suggested fewer than [`MIN_ESTIMATED_CLUSTERS`].
    pub floor_applied: bool,
    pub kmeans_inertia: T,
    pub restarts_used: usize,
    /// Kernel bandwidth actually used, when the affinity was built here.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<T>,
}

/// Affinity `W_ij = exp(−(1 − S_ij)² / 2σ²)`, unit diagonal. Returns the
/// matrix and the bandwidth used.
pub fn rbf_affinity<T: Scalar>(s: &SimilarityMatrix<T>, sigma: Sigma) -> Result<(SymmetricMatrix<T>, T)> {
    let q = s.order();
    let sigma = match sigma {
        Sigma::Fixed(x) if !(x > 0.0 && x.is_finite()) => {
            return Err(Error::arg(format!("sigma must be positive, got {x}")))
        }
        Sigma::Fixed(x) => T::lit(x),
        Sigma::Auto => {
            let mut d: Vec<T> = (0..q)
                .flat_map(|i| (i + 1..q).map(move |j| (i, j)))
                .map(|(i, j)| T::one() - s.get(i, j))
                .collect();
            median(&mut d).filter(|&m| m > T::zero()).unwrap_or(T::one())
        }
    };
    let denom = T::lit(2.0) * sigma * sigma;
    let w = SymmetricMatrix::from_upper(q, |i, j| {
        if i == j {
            T::one()
        } else {
            let d = T::one() - s.get(i, j);
            (-(d * d) / denom).exp()
        }
    });
    Ok((w, sigma))
}

fn median<T: Scalar>(xs: &mut [T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / T::lit(2.0)
    })
}

/// Position `i` (1-based, `1 ≤ i ≤ max_clusters`, `i < len`) of the largest
/// gap `λ_i − λ_{i+1}`; ties go to the smallest `i`.
pub fn largest_gap_index<T: Scalar>(eigenvalues: &[T], max_clusters: usize) -> usize {
    let upper = max_clusters.min(eigenvalues.len().saturating_sub(1));
    let mut best = 1;
    let mut best_gap = T::neg_infinity();
    for i in 1..=upper {
        let gap = eigenvalues[i - 1] - eigenvalues[i];
        if gap > best_gap {
            best_gap = gap;
            best = i;
        }
    }
    best
}

/// Eigengap estimate of the cluster count, never below
/// [`MIN_ESTIMATED_CLUSTERS`] (when there are that many points).
pub fn estimate_num_clusters<T: Scalar>(eigenvalues: &[T], max_clusters: usize) -> usize {
    estimate_with_floor(eigenvalues, max_clusters).0
}

fn estimate_with_floor<T: Scalar>(eigenvalues: &[T], max_clusters: usize) -> (usize, bool) {
    let raw = largest_gap_index(eigenvalues, max_clusters);
    let floor = MIN_ESTIMATED_CLUSTERS.min(eigenvalues.len()).max(1);
    (raw.max(floor), raw < floor)
}

/// `D^{-1/2} W D^{-1/2}` after validating `w`.
pub fn normalized_affinity<T: Scalar>(w: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
    let q = w.order();
    let tol = T::epsilon() * T::lit(64.0);
    if !w.is_symmetric(tol) {
        return Err(Error::arg("affinity matrix is not symmetric"));
    }
    for i in 0..q {
        if (w.get(i, i) - T::one()).abs() > tol {
            return Err(Error::arg("affinity matrix must have a unit diagonal"));
        }
        if w.row(i).iter().any(|&x| !(x >= -tol && x <= T::one() + tol)) {
            return Err(Error::arg("affinity entries must lie in [0, 1]"));
        }
    }
    let inv_sqrt: Vec<T> = (0..q)
        .map(|i| T::one() / w.row(i).iter().copied().sum::<T>().sqrt())
        .collect();
    Ok(SymmetricMatrix::from_upper(q, |i, j| {
        w.get(i, j) * inv_sqrt[i] * inv_sqrt[j]
    }))
}

/// Result of clustering an affinity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralClustering<T> {
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    pub diagnostics: SpectralDiagnostics<T>,
}

impl<T: Scalar> SpectralClustering<T> {
    pub fn assignment(&self, vertices: &[VertexId]) -> ClusterAssignment {
        ClusterAssignment {
            vertices: vertices.to_vec(),
            labels: self.labels.clone(),
            num_clusters: self.num_clusters,
        }
    }
}

/// Clusters `w` into exactly `num_clusters` groups.
pub fn spectral_cluster<T: Scalar>(
    w: &SymmetricMatrix<T>,
    num_clusters: usize,
    seed: u64,
) -> Result<SpectralClustering<T>> {
    cluster_affinity(w, ClusterCount::Fixed(num_clusters), seed)
}

/// Clusters `w`, estimating the cluster count from the eigengap when asked.
pub fn cluster_affinity<T: Scalar>(
    w: &SymmetricMatrix<T>,
    count: ClusterCount,
    seed: u64,
) -> Result<SpectralClustering<T>> {
    let q = w.order();
    if q == 0 {
        return Err(Error::arg("affinity matrix is empty"));
    }
    match count {
        ClusterCount::Fixed(0) | ClusterCount::Auto { max: 0 } => {
            return Err(Error::arg("cluster count must be at least 1"))
        }
        ClusterCount::Fixed(c) if c > q => return Err(Error::arg(format!("cannot form {c} clusters from {q} points"))),
        _ => {}
    }
    let l = normalized_affinity(w)?;
    let eig = symmetric_eigen(&l);
    let (c, floor_applied) = match count {
        ClusterCount::Fixed(c) => (c, false),
        ClusterCount::Auto { max } => estimate_with_floor(&eig.values, max),
    };
    let embedding: Vec<Vec<T>> = (0..q)
        .map(|i| {
            let row: Vec<T> = eig.vectors[..c].iter().map(|v| v[i]).collect();
            let norm = row.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::zero() {
                row.into_iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let km = kmeans(&embedding, c, KMEANS_RESTARTS, KMEANS_MAX_ITER, seed);
    Ok(SpectralClustering {
        labels: km.labels,
        num_clusters: c,
        diagnostics: SpectralDiagnostics {
            eigenvalues: eig.values,
            chosen_gap_index: c,
            floor_applied,
            kmeans_inertia: km.inertia,
            restarts_used: km.restarts,
            sigma: None,
        },
    })
}

/// RBF kernel followed by [`cluster_affinity`].
pub fn cluster_similarity<T: Scalar>(
    s: &SimilarityMatrix<T>,
    sigma: Sigma,
    count: ClusterCount,
    seed: u64,
) -> Result<(ClusterAssignment, SpectralDiagnostics<T>)> {
    let (w, used) = rbf_affinity(s, sigma)?;
    let mut res = cluster_affinity(&w, count, seed)?;
    res.diagnostics.sigma = Some(used);
    Ok((res.assignment(&s.vertices), res.diagnostics))
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans<T> {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    pub inertia: T,
    pub restarts: usize,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding; the restart with the lowest
/// inertia wins (ties go to the earlier restart). Restart seeds are derived
/// from `seed`, so the result does not depend on scheduling.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], k: usize, restarts: usize, max_iter: usize, seed: u64) -> KMeans<T> {
    let restarts = restarts.max(1);
    let runs: Vec<KMeans<T>> = (0..restarts)
        .into_par_iter()
        .map(|r| kmeans_once(points, k, max_iter, seed::derive_indexed(seed, "kmeans", r as u64)))
        .collect();
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .expect("at least one restart");
    best.restarts = restarts;
    best
}

fn kmeans_once<T: Scalar>(points: &[Vec<T>], k: usize, max_iter: usize, seed: u64) -> KMeans<T> {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    let mut rng = seed::rng(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<T>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<T> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: T = d2.iter().copied().sum();
        let pick = if total > T::zero() {
            let mut target = T::lit(rng.gen::<f64>()) * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target = target - d;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let nearest = nearest_centroid(p, &centroids);
            if labels[i] != nearest {
                labels[i] = nearest;
                changed = true;
            }
        }
        repair_empty(points, &mut labels, &centroids, k, &mut changed);
        if !changed {
            break;
        }
        centroids = recompute_centroids(points, &labels, k, dim);
    }
    repair_empty(points, &mut labels, &centroids, k, &mut false);
    centroids = recompute_centroids(points, &labels, k, dim);
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    let (labels, centroids) = canonical_labels(labels, centroids);
    KMeans {
        labels,
        centroids,
        inertia,
        restarts: 1,
    }
}

fn nearest_centroid<T: Scalar>(p: &[T], centroids: &[Vec<T>]) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Moves the point farthest from its centroid (among clusters with more than
/// one member) into each empty cluster.
fn repair_empty<T: Scalar>(
    points: &[Vec<T>],
    labels: &mut [usize],
    centroids: &[Vec<T>],
    k: usize,
    changed: &mut bool,
) {
    if points.len() < k {
        return;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, p) in points.iter().enumerate() {
            if sizes[labels[i]] > 1 {
                let d = sq_dist(p, &centroids[labels[i]]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        if let Some(i) = far {
            sizes[labels[i]] -= 1;
            labels[i] = empty;
            sizes[empty] = 1;
            *changed = true;
        }
    }
}

fn recompute_centroids<T: Scalar>(points: &[Vec<T>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<T>> {
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, &x) in sums[l].iter_mut().zip(p) {
            *s = *s + x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            let c = T::from_count(c);
            s.iter_mut().for_each(|x| *x = *x / c);
        }
    }
    sums
}

/// Relabels clusters in order of first appearance.
fn canonical_labels<T: Scalar>(labels: Vec<usize>, centroids: Vec<Vec<T>>) -> (Vec<usize>, Vec<Vec<T>>) {
    let k = centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    let mut out_c = vec![Vec::new(); k];
    for (old, c) in centroids.into_iter().enumerate() {
        out_c[map[old]] = c;
    }
    (labels.into_iter().map(|l| map[l]).collect(), out_c)
}

/// Classical MDS output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mds<T> {
    /// `coords[i]` has `dims` entries.
    pub coords: Vec<Vec<T>>,
    /// The top `dims` eigenvalues of the double-centered Gram matrix.
    pub eigenvalues: Vec<T>,
    /// Some of those eigenvalues were negative and clamped to zero.
    pub clamped: bool,
}

impl<T: Scalar> Mds<T> {
    /// CSV with `vertex_id,x,y,…` columns.
    pub fn write_csv<W: std::io::Write>(&self, vertices: &[VertexId], mut w: W) -> Result<()> {
        let names = ["x", "y", "z"];
        write!(w, "vertex_id")?;
        for d in 0..self.eigenvalues.len() {
            match names.get(d) {
                Some(n) => write!(w, ",{n}")?,
                None => write!(w, ",c{d}")?,
            }
        }
        writeln!(w)?;
        for (v, row) in vertices.iter().zip(&self.coords) {
            write!(w, "{v}")?;
            for x in row {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classical MDS on the distances `1 − S_ij`.
pub fn classical_mds<T: Scalar>(s: &SimilarityMatrix<T>, dims: usize) -> Result<Mds<T>> {
    mds_from_distances(&s.values.map(|x| T::one() - x), dims)
}

/// Classical MDS of a symmetric distance matrix: `B = −½ J D² J`, then
/// `X = V Λ^{1/2}` from the top `dims` eigenpairs of `B`.
pub fn mds_from_distances<T: Scalar>(d: &SymmetricMatrix<T>, dims: usize) -> Result<Mds<T>> {
    let q = d.order();
    if dims == 0 || dims > q {
        return Err(Error::arg(format!("dims must lie in [1, {q}], got {dims}")));
    }
    let d2 = d.map(|x| x * x);
    let qf = T::from_count(q);
    let means: Vec<T> = (0..q).map(|i| d2.row(i).iter().copied().sum::<T>() / qf).collect();
    let grand = means.iter().copied().sum::<T>() / qf;
    let half = T::lit(0.5);
    let b = SymmetricMatrix::from_upper(q, |i, j| -half * (d2.get(i, j) - means[i] - means[j] + grand));
    let eig = symmetric_eigen(&b);
    let mut clamped = false;
    let scales: Vec<T> = eig.values[..dims]
        .iter()
        .map(|&l| {
            if l < T::zero() {
                clamped = true;
                T::zero()
            } else {
                l.sqrt()
            }
        })
        .collect();
    let coords = (0..q)
        .map(|i| (0..dims).map(|c| eig.vectors[c][i] * scales[c]).collect())
        .collect();
    Ok(Mds {
        coords,
        eigenvalues: eig.values[..dims].to_vec(),
        clamped,
    })
}
