//! End-to-end detection: rank vertices by Ψ_k, keep the top `Q`, compare
//! their neighborhoods and cluster them.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::seed;
use crate::similarity::{build_similarity_matrix, SimilarityMatrix};
use crate::spectral::{
    classical_mds, cluster_similarity, ClusterAssignment, ClusterCount, Mds, Sigma, SpectralDiagnostics,
};
use crate::trimming::{run_topq, TrimReport};

/// Settings of a detection run. Missing fields take their defaults when
/// deserialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    /// Neighborhood order of the ranking statistic.
    pub k: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    /// Neighborhood order of the Jaccard similarity.
    pub similarity_k: usize,
    pub sigma: Sigma,
    /// Fixed cluster count; `None` estimates it from the eigengap.
    pub clusters: Option<usize>,
    pub max_clusters: usize,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Also write the full similarity matrix.
    pub write_similarity: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            k: 1,
            q: 2000,
            similarity_k: 1,
            sigma: Sigma::Auto,
            clusters: None,
            max_clusters: 8,
            workers: 1,
            seed: 0,
            out: PathBuf::from("out"),
            write_similarity: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::arg("Q must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::arg("workers must be at least 1"));
        }
        if self.similarity_k == 0 {
            return Err(Error::arg("similarity_k must be at least 1"));
        }
        if self.max_clusters == 0 || self.clusters == Some(0) {
            return Err(Error::arg("cluster counts must be at least 1"));
        }
        if let Sigma::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::arg(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    fn cluster_count(&self) -> ClusterCount {
        match self.clusters {
            Some(c) => ClusterCount::Fixed(c),
            None => ClusterCount::Auto { max: self.max_clusters },
        }
    }
}

/// Everything a detection run produces.
#[derive(Clone, Debug)]
pub struct Detection {
    pub topq: TrimReport,
    pub similarity: SimilarityMatrix<f64>,
    pub assignment: ClusterAssignment,
    pub diagnostics: SpectralDiagnostics<f64>,
    /// `None` when fewer than two vertices were selected.
    pub mds: Option<Mds<f64>>,
}

/// Summary written to `diagnostics.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub q_requested: usize,
    pub q_used: usize,
    pub computed_count: usize,
    pub est1_count: usize,
    pub est2_count: usize,
    pub topq_wall_ms: f64,
    pub num_clusters: usize,
    pub spectral: SpectralDiagnostics<f64>,
    pub mds_clamped: Option<bool>,
    pub seed: u64,
}

/// Runs detection on `g`. `Q` is clamped to the vertex count.
pub fn detect(g: &Graph, cfg: &PipelineConfig) -> Result<Detection> {
    cfg.validate()?;
    let n = g.num_vertices();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let q = cfg.q.min(n);
    if q < cfg.q {
        log::warn!("Q = {} exceeds the {n} vertices; using Q = {n}", cfg.q);
    }
    let topq = run_topq(g, q, cfg.k, cfg.workers)?;
    let selected: Vec<VertexId> = topq.entries[..q].iter().map(|&(v, _)| v).collect();
    let similarity = build_similarity_matrix::<f64>(g, &selected, cfg.similarity_k)?;
    let cluster_count = match cfg.cluster_count() {
        ClusterCount::Fixed(c) if c > q => {
            log::warn!("{c} clusters requested for {q} vertices; using {q}");
            ClusterCount::Fixed(q)
        }
        c => c,
    };
    let (assignment, diagnostics) =
        cluster_similarity(&similarity, cfg.sigma, cluster_count, seed::derive(cfg.seed, "cluster"))?;
    let mds = if q >= 2 {
        Some(classical_mds(&similarity, 2)?)
    } else {
        None
    };
    Ok(Detection {
        topq,
        similarity,
        assignment,
        diagnostics,
        mds,
    })
}

impl Detection {
    pub fn summary(&self, cfg: &PipelineConfig) -> DetectionSummary {
        DetectionSummary {
            n: self.topq.n,
            m: self.topq.m,
            k: cfg.k,
            q_requested: cfg.q,
            q_used: self.assignment.vertices.len(),
            computed_count: self.topq.computed_count,
            est1_count: self.topq.est1_count,
            est2_count: self.topq.est2_count,
            topq_wall_ms: self.topq.wall_ms,
            num_clusters: self.assignment.num_clusters,
            spectral: self.diagnostics.clone(),
            mds_clamped: self.mds.as_ref().map(|m| m.clamped),
            seed: cfg.seed,
        }
    }

    /// Writes `topq.csv`, `clusters.csv`, `diagnostics.json`, `mds.csv` and,
    /// when configured, `similarity.csv` into `dir`.
    pub fn write_artifacts(&self, cfg: &PipelineConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let q = self.assignment.vertices.len();
        let mut topq = String::from("vertex,psi\n");
        for (v, x) in &self.topq.entries[..q] {
            topq.push_str(&format!("{v},{x}\n"));
        }
        fs::write(dir.join("topq.csv"), topq)?;
        self.assignment
            .write_csv(BufWriter::new(File::create(dir.join("clusters.csv"))?))?;
        let json = serde_json::to_string_pretty(&self.summary(cfg)).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(dir.join("diagnostics.json"), json + "\n")?;
        let mds_file = BufWriter::new(File::create(dir.join("mds.csv"))?);
        match &self.mds {
            Some(m) => m.write_csv(&self.assignment.vertices, mds_file)?,
            None => {
                // a single point sits at the origin
                let one = Mds {
                    coords: vec![vec![0.0, 0.0]],
                    eigenvalues: vec![0.0, 0.0],
                    clamped: false,
                };
                one.write_csv(&self.assignment.vertices, mds_file)?;
            }
        }
        if cfg.write_similarity {
            self.similarity
                .write_csv(BufWriter::new(File::create(dir.join("similarity.csv"))?))?;
        }
        Ok(())
    }
}
