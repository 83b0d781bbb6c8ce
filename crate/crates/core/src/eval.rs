//! Evaluation metrics (adjusted Rand index, ROC/AUC) and the Monte-Carlo
//! harness that scores locality statistics on stochastic block model graphs.

use std::collections::HashMap;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{generate_sbm, SbmParams};
use crate::graph::VertexId;
use crate::locality::psi_k_all;
use crate::seed;
use crate::similarity::build_similarity_matrix;
use crate::spectral::{cluster_similarity, ClusterCount, Sigma};

/// Number of points of the fixed FPR grid used to average ROC curves.
pub const ROC_GRID_POINTS: usize = 101;
/// Lowest `Q` for which the benchmark's top-`Q` set is guaranteed to cover
/// all four blocks.
pub const BENCHMARK_MIN_Q: usize = 61;
/// Cap on the eigengap cluster-count estimate in the ARI protocol.
pub const ARI_MAX_CLUSTERS: usize = 8;

fn dense_labels<L: Eq + Hash>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

fn choose2(x: u64) -> i128 {
    let x = i128::from(x);
    x * (x - 1) / 2
}

/// Adjusted Rand index as an exact fraction `(numerator, denominator)`.
/// When the denominator would be zero (both partitions trivial and equal in
/// pair structure) the index is defined as 1 and `(1, 1)` is returned.
pub fn ari_fraction<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<(i128, i128)> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "label sequences differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::arg("ARI needs at least two items"));
    }
    let (da, ka) = dense_labels(a);
    let (db, kb) = dense_labels(b);
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in da.iter().zip(&db) {
        *table.entry((x, y)).or_default() += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let index: i128 = table.values().map(|&c| choose2(c)).sum();
    let sa: i128 = rows.iter().map(|&c| choose2(c)).sum();
    let sb: i128 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    // (index − sa·sb/N) / ((sa + sb)/2 − sa·sb/N), scaled by 2N
    let num = 2 * total * index - 2 * sa * sb;
    let den = total * (sa + sb) - 2 * sa * sb;
    if den == 0 {
        return Ok((1, 1));
    }
    Ok((num, den))
}

/// Adjusted Rand index between two labelings of the same items.
pub fn ari<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64> {
    let (num, den) = ari_fraction(a, b)?;
    Ok(num as f64 / den as f64)
}

/// An ROC curve from `(0, 0)` to `(1, 1)` and the area under it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    /// `(false positive rate, true positive rate)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl EvalCurve {
    /// TPR at `fpr`, interpolating linearly along the curve; on a vertical
    /// segment the highest TPR is taken.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let mut best = 0.0;
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x1 <= fpr {
                best = y1;
            } else if x0 <= fpr {
                let t = (fpr - x0) / (x1 - x0);
                best = y0 + t * (y1 - y0);
                break;
            } else {
                break;
            }
        }
        best
    }
}

/// ROC of thresholding `scores` (higher means positive). Each distinct score
/// is one threshold step, so tied scores give a diagonal segment. The AUC is
/// the trapezoidal area, computed exactly from counts.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<EvalCurve> {
    if scores.len() != positive.len() {
        return Err(Error::arg("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::arg("scores must not be NaN"));
    }
    let p = positive.iter().filter(|&&x| x).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::arg("ROC needs at least one positive and one negative"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).expect("no NaN"));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of 1/(p·n)
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    let auc = area2 as f64 / (2 * u128::from(p) * u128::from(n)) as f64;
    Ok(EvalCurve { points, auc })
}

/// Mean ROC over Monte-Carlo runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub k: usize,
    pub fpr_grid: Vec<f64>,
    /// Vertically averaged TPR at each grid point.
    pub mean_tpr: Vec<f64>,
    pub mean_auc: f64,
    pub aucs: Vec<f64>,
}

impl RocSummary {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("fpr,mean_tpr\n");
        for (f, t) in self.fpr_grid.iter().zip(&self.mean_tpr) {
            s.push_str(&format!("{f},{t}\n"));
        }
        s
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from("run_id,auc\n");
        for (r, a) in self.aucs.iter().enumerate() {
            s.push_str(&format!("{r},{a}\n"));
        }
        s
    }
}

fn check_runs(runs: usize) -> Result<()> {
    if runs == 0 {
        return Err(Error::arg("runs must be at least 1"));
    }
    Ok(())
}

fn run_params(params: &SbmParams, base: u64, run: usize) -> SbmParams {
    params.clone().with_seed(seed::derive_indexed(base, "sbm", run as u64))
}

/// Per run: sample an SBM graph, score every vertex by Ψ_k and compute the
/// ROC of separating blocks `2..B` (positives) from block 1.
pub fn monte_carlo_roc(params: &SbmParams, runs: usize, k: usize, seed: u64) -> Result<RocSummary> {
    check_runs(runs)?;
    params.validate()?;
    let curves: Vec<EvalCurve> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let lg = generate_sbm(&run_params(params, seed, r))?;
            let scores: Vec<f64> = psi_k_all(&lg.graph, k).into_iter().map(|x| x as f64).collect();
            let positive: Vec<bool> = lg.labels.iter().map(|&l| l != 1).collect();
            roc_auc(&scores, &positive)
        })
        .collect::<Result<_>>()?;
    let fpr_grid: Vec<f64> = (0..ROC_GRID_POINTS)
        .map(|i| i as f64 / (ROC_GRID_POINTS - 1) as f64)
        .collect();
    let runs_f = runs as f64;
    let mean_tpr = fpr_grid
        .iter()
        .map(|&f| curves.iter().map(|c| c.tpr_at(f)).sum::<f64>() / runs_f)
        .collect();
    let aucs: Vec<f64> = curves.iter().map(|c| c.auc).collect();
    let mean_auc = aucs.iter().sum::<f64>() / runs_f;
    Ok(RocSummary {
        k,
        fpr_grid,
        mean_tpr,
        mean_auc,
        aucs,
    })
}

/// How the ARI harness chooses the number of clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AriClusters {
    /// Eigengap estimate, capped at `max`.
    Eigengap { max: usize },
    /// The number of distinct true blocks among the selected vertices.
    Blocks,
}

#[derive(Clone, Debug)]
pub struct AriOptions {
    pub similarity_k: usize,
    pub sigma: Sigma,
    pub clusters: AriClusters,
}

impl Default for AriOptions {
    fn default() -> Self {
        AriOptions {
            similarity_k: 1,
            sigma: Sigma::Auto,
            clusters: AriClusters::Eigengap { max: ARI_MAX_CLUSTERS },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AriRow {
    pub q: usize,
    pub mean: f64,
    /// Sample standard deviation across runs (0 for a single run).
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AriRun {
    pub run_id: usize,
    pub q: usize,
    pub ari: f64,
    pub clusters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AriSummary {
    pub k: usize,
    pub rows: Vec<AriRow>,
    pub runs: Vec<AriRun>,
}

impl AriSummary {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("Q,mean_ari,sd_ari\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.q, r.mean, r.sd));
        }
        s
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from("run_id,Q,ari,clusters\n");
        for r in &self.runs {
            s.push_str(&format!("{},{},{},{}\n", r.run_id, r.q, r.ari, r.clusters));
        }
        s
    }
}

/// Per run and per `Q`: take the top `Q` vertices by Ψ_k (full sweep, ties
/// by ascending id), cluster them spectrally from their Jaccard matrix and
/// compare with the true blocks of those vertices.
pub fn monte_carlo_ari(params: &SbmParams, runs: usize, k: usize, q_values: &[usize], seed: u64) -> Result<AriSummary> {
    monte_carlo_ari_with(params, runs, k, q_values, seed, &AriOptions::default())
}

pub fn monte_carlo_ari_with(
    params: &SbmParams,
    runs: usize,
    k: usize,
    q_values: &[usize],
    seed: u64,
    opts: &AriOptions,
) -> Result<AriSummary> {
    check_runs(runs)?;
    params.validate()?;
    let n = params.num_vertices();
    if q_values.is_empty() {
        return Err(Error::arg("q_values must not be empty"));
    }
    if let Some(q) = q_values.iter().find(|&&q| q < 2 || q > n) {
        return Err(Error::arg(format!("Q = {q} outside [2, {n}]")));
    }
    let per_run: Vec<Vec<AriRun>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let lg = generate_sbm(&run_params(params, seed, r))?;
            let scores = psi_k_all(&lg.graph, k);
            let mut ranking: Vec<usize> = (0..n).collect();
            ranking.sort_by_key(|&i| (std::cmp::Reverse(scores[i]), i));
            q_values
                .iter()
                .map(|&q| {
                    let selected: Vec<VertexId> = ranking[..q].iter().map(|&i| VertexId::from_index(i)).collect();
                    let s = build_similarity_matrix::<f64>(&lg.graph, &selected, opts.similarity_k)?;
                    let cluster_seed =
                        seed::derive_indexed(seed::derive_indexed(seed, "cluster", r as u64), "q", q as u64);
                    let truth: Vec<usize> = selected.iter().map(|v| lg.labels[v.index()]).collect();
                    let count = match opts.clusters {
                        AriClusters::Eigengap { max } => ClusterCount::Auto { max },
                        AriClusters::Blocks => {
                            ClusterCount::Fixed(truth.iter().collect::<std::collections::HashSet<_>>().len())
                        }
                    };
                    let (assignment, _) = cluster_similarity(&s, opts.sigma, count, cluster_seed)?;
                    Ok(AriRun {
                        run_id: r,
                        q,
                        ari: ari(&truth, &assignment.labels)?,
                        clusters: assignment.num_clusters,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows = q_values
        .iter()
        .enumerate()
        .map(|(qi, &q)| {
            let xs: Vec<f64> = per_run.iter().map(|r| r[qi].ari).collect();
            let (mean, sd) = mean_sd(&xs);
            AriRow { q, mean, sd }
        })
        .collect();
    Ok(AriSummary {
        k,
        rows,
        runs: per_run.into_iter().flatten().collect(),
    })
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
