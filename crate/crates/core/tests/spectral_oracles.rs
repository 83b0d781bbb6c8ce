mod common;

use std::collections::HashSet;

use active_scan::eval::ari;
use active_scan::linalg::{eigen_residual, SymmetricMatrix};
use active_scan::similarity::build_similarity_matrix;
use active_scan::spectral::{
    classical_mds, cluster_affinity, kmeans, mds_from_distances, normalized_affinity, rbf_affinity, ClusterCount, Sigma,
};
use active_scan::{Graph, VertexId};
use nalgebra::DMatrix;
use rand::Rng;

use common::{ball, gnp, ideal_affinity, rng, undirected};

fn random_symmetric(q: usize, seed: u64) -> SymmetricMatrix<f64> {
    let mut r = rng(seed);
    let mut m = SymmetricMatrix::zeros(q);
    for i in 0..q {
        for j in i..q {
            m.set(i, j, r.gen_range(-1.0..1.0));
        }
    }
    m
}

#[test]
fn eigenvalues_match_nalgebra() {
    for (q, seed) in [(1, 1), (2, 2), (7, 3), (40, 4), (120, 5)] {
        let m = random_symmetric(q, seed);
        let ours = m.symmetric_eigen();
        let dense = DMatrix::from_fn(q, q, |i, j| m.get(i, j));
        let mut theirs: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in ours.values.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10, "q = {q}: {a} vs {b}");
        }
        for (l, v) in ours.values.iter().zip(&ours.vectors) {
            assert!(eigen_residual(&m, *l, v) < 1e-10);
        }
    }
}

#[test]
fn normalized_affinity_eigenpairs_have_small_residuals() {
    let mut r = rng(77);
    let g = Graph::from_edges(400, gnp(400, 0.02, &mut r)).unwrap();
    let sel: Vec<VertexId> = (0..400).map(VertexId).collect();
    let s = build_similarity_matrix::<f64>(&g, &sel, 1).unwrap();
    let (w, _) = rbf_affinity(&s, Sigma::Auto).unwrap();
    let l = normalized_affinity(&w).unwrap();
    let eig = l.symmetric_eigen();
    for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
        assert!(eigen_residual(&l, *lambda, v) < 1e-8);
    }
    assert!((eig.values[0] - 1.0).abs() < 1e-10);
}

#[test]
fn similarity_matches_set_arithmetic() {
    let mut r = rng(5);
    let g = Graph::from_edges(120, gnp(120, 0.03, &mut r)).unwrap();
    let adj = undirected(&g);
    let sel: Vec<VertexId> = (0..120).step_by(3).map(|i| VertexId(i as u32)).collect();
    for k in 1..=2 {
        let s = build_similarity_matrix::<f64>(&g, &sel, k).unwrap();
        let balls: Vec<HashSet<usize>> = sel.iter().map(|v| ball(&adj, v.index(), k)).collect();
        for i in 0..sel.len() {
            for j in 0..sel.len() {
                let inter = balls[i].intersection(&balls[j]).count() as f64;
                let union = balls[i].union(&balls[j]).count() as f64;
                assert_eq!(s.get(i, j), inter / union, "k = {k}, ({i}, {j})");
            }
        }
    }
}

#[test]
fn mds_reproduces_planar_distances() {
    let mut r = rng(31);
    for trial in 0..5 {
        let q = 6 + trial * 5;
        let pts: Vec<(f64, f64)> = (0..q)
            .map(|_| (r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3)))
            .collect();
        let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let d = SymmetricMatrix::from_upper(q, |i, j| dist(pts[i], pts[j]));
        let mds = mds_from_distances(&d, 2).unwrap();
        for i in 0..q {
            for j in 0..q {
                let c = (mds.coords[i][0] - mds.coords[j][0]).hypot(mds.coords[i][1] - mds.coords[j][1]);
                assert!((c - d.get(i, j)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn mds_of_equidistant_points_is_equilateral() {
    let d = SymmetricMatrix::from_upper(3, |i, j| if i == j { 0.0f64 } else { 1.0 });
    let mds = mds_from_distances(&d, 2).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = (mds.coords[i][0] - mds.coords[j][0]).hypot(mds.coords[i][1] - mds.coords[j][1]);
        assert!((c - 1.0).abs() < 1e-9);
    }
    let one = build_similarity_matrix::<f64>(&Graph::from_edges(2, [(0, 1)]).unwrap(), &[VertexId(0)], 1).unwrap();
    let single = classical_mds(&one, 1).unwrap();
    assert_eq!(single.coords, vec![vec![0.0]]);
}

#[test]
fn clustering_is_seed_deterministic_and_label_invariant() {
    let mut r = rng(8);
    let (rows, truth) = ideal_affinity(&[6, 9, 4], &mut r);
    // soften the ideal case so k-means has real work to do
    let noisy: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &x)| if i == j { 1.0 } else { x * 0.8 + 0.05 })
                .collect()
        })
        .collect();
    let w = SymmetricMatrix::from_rows(noisy).unwrap();
    let a = cluster_affinity(&w, ClusterCount::Fixed(3), 4).unwrap();
    let b = cluster_affinity(&w, ClusterCount::Fixed(3), 4).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(ari(&truth, &a.labels).unwrap(), 1.0);
    let single = cluster_affinity(&w, ClusterCount::Fixed(1), 4).unwrap();
    assert!(single.labels.iter().all(|&l| l == 0));
}

#[test]
fn kmeans_clusters_are_non_empty() {
    let mut r = rng(12);
    let pts: Vec<Vec<f64>> = (0..50)
        .map(|_| vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)])
        .collect();
    for k in 1..=10 {
        let km = kmeans(&pts, k, 3, 100, k as u64);
        for c in 0..k {
            assert!(km.labels.contains(&c), "k = {k}, cluster {c} empty");
        }
    }
}

#[test]
fn f32_pipeline_agrees_with_f64() {
    let mut r = rng(3);
    let g = Graph::from_edges(80, gnp(80, 0.05, &mut r)).unwrap();
    let sel: Vec<VertexId> = (0..40).map(VertexId).collect();
    let s64 = build_similarity_matrix::<f64>(&g, &sel, 1).unwrap();
    let s32 = build_similarity_matrix::<f32>(&g, &sel, 1).unwrap();
    for i in 0..40 {
        for j in 0..40 {
            assert!((s64.get(i, j) - f64::from(s32.get(i, j))).abs() < 1e-6);
        }
    }
    let e64 = s64.values.symmetric_eigen().values;
    let e32 = s32.values.symmetric_eigen().values;
    for (a, b) in e64.iter().zip(&e32) {
        assert!((a - f64::from(*b)).abs() < 1e-3);
    }
}
