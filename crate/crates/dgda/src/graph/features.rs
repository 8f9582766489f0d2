use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

use super::{Graph, GraphError};

/// Structural node features computable from the adjacency alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Degree,
    Coreness,
    Pagerank,
    Clustering,
    EigenvectorCentrality,
}

impl FeatureKind {
    pub fn from_name(name: &str) -> Result<Self, GraphError> {
        match name {
            "degree" => Ok(FeatureKind::Degree),
            "coreness" => Ok(FeatureKind::Coreness),
            "pagerank" => Ok(FeatureKind::Pagerank),
            "clustering" => Ok(FeatureKind::Clustering),
            "eigenvector_centrality" => Ok(FeatureKind::EigenvectorCentrality),
            other => Err(GraphError::UnknownFeature(other.to_string())),
        }
    }
}

pub const DEFAULT_FEATURE_SPEC: [FeatureKind; 5] = [
    FeatureKind::Degree,
    FeatureKind::Coreness,
    FeatureKind::Pagerank,
    FeatureKind::Clustering,
    FeatureKind::EigenvectorCentrality,
];

const PAGERANK_DAMPING: f64 = 0.85;
const PAGERANK_TOL: f64 = 1e-9;
const PAGERANK_MAX_ITERS: usize = 200;
const EIGEN_TOL: f64 = 1e-9;
const EIGEN_MAX_ITERS: usize = 200;

/// Compute the requested feature columns, in spec order, as an `n x K` matrix.
pub fn structural_features(g: &Graph, spec: &[FeatureKind]) -> Result<Tensor, GraphError> {
    let n = g.n();
    let mut out = Tensor::zeros(n, spec.len());
    for (col, kind) in spec.iter().enumerate() {
        let values = match kind {
            FeatureKind::Degree => g.degrees(),
            FeatureKind::Coreness => coreness(g),
            FeatureKind::Pagerank => pagerank(g),
            FeatureKind::Clustering => clustering_coefficient(g),
            FeatureKind::EigenvectorCentrality => eigenvector_centrality(g),
        };
        for (i, v) in values.into_iter().enumerate() {
            out.set(i, col, v);
        }
    }
    Ok(out)
}

/// k-core numbers by iterative minimum-degree peeling.
fn coreness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let a = g.adjacency();
    let mut degree: Vec<usize> = g.degrees().iter().map(|&d| d as usize).collect();
    let mut alive = vec![true; n];
    let mut core = vec![0usize; n];
    let mut remaining = n;
    let mut k = 0usize;
    while remaining > 0 {
        loop {
            let victim = (0..n).find(|&i| alive[i] && degree[i] <= k);
            match victim {
                Some(i) => {
                    alive[i] = false;
                    core[i] = k;
                    remaining -= 1;
                    for j in 0..n {
                        if alive[j] && a.get(i, j) != 0.0 {
                            degree[j] -= 1;
                        }
                    }
                }
                None => break,
            }
        }
        k += 1;
    }
    core.into_iter().map(|c| c as f64).collect()
}

/// PageRank with uniform teleport; dangling mass is redistributed uniformly.
fn pagerank(g: &Graph) -> Vec<f64> {
    let n = g.n();
    if n == 0 {
        return vec![];
    }
    let a = g.adjacency();
    let deg = g.degrees();
    let uniform = 1.0 / n as f64;
    let mut pr = vec![uniform; n];
    for _ in 0..PAGERANK_MAX_ITERS {
        let dangling: f64 = (0..n).filter(|&i| deg[i] == 0.0).map(|i| pr[i]).sum();
        let mut next = vec![(1.0 - PAGERANK_DAMPING) * uniform + PAGERANK_DAMPING * dangling * uniform; n];
        for j in 0..n {
            if deg[j] > 0.0 {
                let share = PAGERANK_DAMPING * pr[j] / deg[j];
                for i in 0..n {
                    if a.get(j, i) != 0.0 {
                        next[i] += share;
                    }
                }
            }
        }
        let diff: f64 = pr.iter().zip(&next).map(|(p, q)| (p - q).abs()).sum();
        pr = next;
        if diff < PAGERANK_TOL {
            break;
        }
    }
    pr
}

/// Local clustering coefficient: closed wedges over the `k(k-1)/2` possible.
fn clustering_coefficient(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let a = g.adjacency();
    (0..n)
        .map(|i| {
            let neighbors: Vec<usize> = (0..n).filter(|&j| a.get(i, j) != 0.0).collect();
            let k = neighbors.len();
            if k < 2 {
                return 0.0;
            }
            let mut closed = 0usize;
            for x in 0..k {
                for y in (x + 1)..k {
                    if a.get(neighbors[x], neighbors[y]) != 0.0 {
                        closed += 1;
                    }
                }
            }
            2.0 * closed as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Eigenvector centrality by power iteration, L2-normalized.
fn eigenvector_centrality(g: &Graph) -> Vec<f64> {
    let n = g.n();
    if n == 0 {
        return vec![];
    }
    let a = g.adjacency();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..EIGEN_MAX_ITERS {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                if a.get(i, j) != 0.0 {
                    w[i] += v[j];
                }
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // no edges: centrality is degenerate, keep the uniform start
            break;
        }
        for x in &mut w {
            *x /= norm;
        }
        let diff: f64 = v.iter().zip(&w).map(|(p, q)| (p - q).abs()).sum();
        v = w;
        if diff < EIGEN_TOL {
            break;
        }
    }
    v
}

/// Per-column mean and standard deviation fitted on a graph collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fit z-normalization statistics over all node rows of the given graphs.
/// Call this on source-train only; target statistics must not leak.
pub fn fit_feature_stats(graphs: &[Graph]) -> Result<FeatureStats, GraphError> {
    let mut cols = None;
    let mut count = 0usize;
    let mut sum: Vec<f64> = Vec::new();
    let mut sum_sq: Vec<f64> = Vec::new();
    for g in graphs {
        let f = g.features_or_err()?;
        let k = f.cols();
        if cols.is_none() {
            cols = Some(k);
            sum = vec![0.0; k];
            sum_sq = vec![0.0; k];
        }
        for i in 0..f.rows() {
            for j in 0..k {
                let v = f.get(i, j);
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        count += f.rows();
    }
    let k = cols.unwrap_or(0);
    let n = count.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std: Vec<f64> = (0..k)
        .map(|j| {
            let var = (sum_sq[j] / n - mean[j] * mean[j]).max(0.0);
            let s = var.sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok(FeatureStats { mean, std })
}

pub fn apply_feature_stats(g: &mut Graph, stats: &FeatureStats) -> Result<(), GraphError> {
    let f = g.features_or_err()?.clone();
    let mut out = f.clone();
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            out.set(i, j, (f.get(i, j) - stats.mean[j]) / stats.std[j]);
        }
    }
    g.set_features(out)
}
