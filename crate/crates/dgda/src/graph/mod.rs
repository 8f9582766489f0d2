//! Graph representation, normalization, perturbation, features, synthetic
//! benchmarks, and dataset I/O.

mod augment;
mod features;
mod io;
mod synthetic;

pub use augment::{augment, AugmentedGraph};
pub use features::{
    apply_feature_stats, fit_feature_stats, structural_features, FeatureKind, FeatureStats,
    DEFAULT_FEATURE_SPEC,
};
pub use io::{dataset_to_jsonl, load_dataset, save_dataset, DatasetError};
pub use synthetic::{
    generate_synthetic_pair, DomainParams, GeneratorConfig, LabelMotif, SplitCounts,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge ({i},{j}) out of range for {n} nodes")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({i},{j}) violates the i<j pair ordering")]
    UnorderedEdge { i: usize, j: usize },
    #[error("duplicate edge ({i},{j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("adjacency is not symmetric at ({i},{j})")]
    Asymmetric { i: usize, j: usize },
    #[error("adjacency diagonal at ({i},{i}) must be zero")]
    NonzeroDiagonal { i: usize },
    #[error("adjacency entry ({i},{j}) must be 0 or 1, got {value}")]
    NonBinaryEntry { i: usize, j: usize, value: f64 },
    #[error("features have {got} rows, expected {expected}")]
    FeatureRows { got: usize, expected: usize },
    #[error("invalid probability {name}={value}, must lie in [0,1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("unknown feature name '{0}'")]
    UnknownFeature(String),
    #[error("infeasible generator config: {name}={value} outside [0,1]")]
    InfeasibleConfig { name: String, value: f64 },
    #[error("graph has no node features")]
    MissingFeatures,
    #[error("graph has no label")]
    MissingLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Source,
    Target,
}

impl DomainTag {
    /// Binary encoding used by the domain classifier: source 0, target 1.
    pub fn value(self) -> f64 {
        match self {
            DomainTag::Source => 0.0,
            DomainTag::Target => 1.0,
        }
    }
}

impl std::fmt::Display for DomainTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainTag::Source => write!(f, "source"),
            DomainTag::Target => write!(f, "target"),
        }
    }
}

/// Undirected simple graph: symmetric 0/1 adjacency with zero diagonal,
/// optional node features and binary label, plus its domain tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Tensor,
    features: Option<Tensor>,
    label: Option<bool>,
    domain: DomainTag,
}

impl Graph {
    /// Build from an `i < j` edge list.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        features: Option<Tensor>,
        label: Option<bool>,
        domain: DomainTag,
    ) -> Result<Self, GraphError> {
        let mut adjacency = Tensor::zeros(n, n);
        for &(i, j) in edges {
            if i >= j {
                return Err(GraphError::UnorderedEdge { i, j });
            }
            if j >= n {
                return Err(GraphError::EdgeOutOfRange { i, j, n });
            }
            if adjacency.get(i, j) != 0.0 {
                return Err(GraphError::DuplicateEdge { i, j });
            }
            adjacency.set(i, j, 1.0);
            adjacency.set(j, i, 1.0);
        }
        if let Some(f) = &features {
            if f.rows() != n {
                return Err(GraphError::FeatureRows { got: f.rows(), expected: n });
            }
        }
        Ok(Graph { n, adjacency, features, label, domain })
    }

    /// Build from a dense adjacency matrix, validating every invariant.
    pub fn from_adjacency(
        adjacency: Tensor,
        features: Option<Tensor>,
        label: Option<bool>,
        domain: DomainTag,
    ) -> Result<Self, GraphError> {
        let n = adjacency.rows();
        validate_adjacency(&adjacency)?;
        if let Some(f) = &features {
            if f.rows() != n {
                return Err(GraphError::FeatureRows { got: f.rows(), expected: n });
            }
        }
        Ok(Graph { n, adjacency, features, label, domain })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn features(&self) -> Option<&Tensor> {
        self.features.as_ref()
    }

    pub fn features_or_err(&self) -> Result<&Tensor, GraphError> {
        self.features.as_ref().ok_or(GraphError::MissingFeatures)
    }

    pub fn set_features(&mut self, features: Tensor) -> Result<(), GraphError> {
        if features.rows() != self.n {
            return Err(GraphError::FeatureRows { got: features.rows(), expected: self.n });
        }
        self.features = Some(features);
        Ok(())
    }

    pub fn label(&self) -> Option<bool> {
        self.label
    }

    pub fn set_label(&mut self, label: Option<bool>) {
        self.label = label;
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    /// Undirected edge count (unordered pairs with an edge).
    pub fn edge_count(&self) -> usize {
        let mut m = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.adjacency.get(i, j) != 0.0 {
                    m += 1;
                }
            }
        }
        m
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.adjacency.get(i, j) != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Edge density over unordered pairs; 0 for a single node.
    pub fn density(&self) -> f64 {
        let pairs = self.n * (self.n.saturating_sub(1)) / 2;
        if pairs == 0 {
            0.0
        } else {
            self.edge_count() as f64 / pairs as f64
        }
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.adjacency.get(i, j)).sum())
            .collect()
    }
}

pub(crate) fn validate_adjacency(a: &Tensor) -> Result<(), GraphError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(GraphError::FeatureRows { got: a.cols(), expected: n });
    }
    for i in 0..n {
        if a.get(i, i) != 0.0 {
            return Err(GraphError::NonzeroDiagonal { i });
        }
        for j in 0..n {
            let v = a.get(i, j);
            if v != 0.0 && v != 1.0 {
                return Err(GraphError::NonBinaryEntry { i, j, value: v });
            }
            if j > i && v != a.get(j, i) {
                return Err(GraphError::Asymmetric { i, j });
            }
        }
    }
    Ok(())
}

/// Symmetric normalization of an adjacency matrix with added self-loops:
/// `D^{-1/2} (A + I) D^{-1/2}` where `D` is the degree matrix of `A + I`.
pub fn normalize_adjacency_matrix(a: &Tensor) -> Tensor {
    let n = a.rows();
    let mut inv_sqrt_deg = vec![0.0; n];
    for i in 0..n {
        let mut d = 1.0; // self-loop
        for j in 0..n {
            d += a.get(i, j);
        }
        inv_sqrt_deg[i] = 1.0 / d.sqrt();
    }
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let tilde = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
            if tilde != 0.0 {
                out.set(i, j, tilde * inv_sqrt_deg[i] * inv_sqrt_deg[j]);
            }
        }
    }
    out
}

/// [`normalize_adjacency_matrix`] applied to a graph's adjacency.
pub fn normalize_adjacency(g: &Graph) -> Tensor {
    normalize_adjacency_matrix(g.adjacency())
}

/// Which on-disk split a graph belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

/// Where a [`DatasetSplit`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProvenance {
    Generator(GeneratorConfig),
    File { path: String },
}

/// The four-way source/target train/test split.
///
/// Target-train labels are never exposed to training consumers: the loader
/// and generator move them into hidden storage, and only the explicitly
/// acknowledged upper-bound baseline reads them back.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub source_train: Vec<Graph>,
    pub source_test: Vec<Graph>,
    pub target_train: Vec<Graph>,
    pub target_test: Vec<Graph>,
    pub provenance: SplitProvenance,
    hidden_target_train_labels: Vec<Option<bool>>,
}

impl DatasetSplit {
    /// Build a split, masking target-train labels into hidden storage.
    pub fn new(
        source_train: Vec<Graph>,
        source_test: Vec<Graph>,
        mut target_train: Vec<Graph>,
        target_test: Vec<Graph>,
        provenance: SplitProvenance,
    ) -> Self {
        let hidden = target_train
            .iter_mut()
            .map(|g| {
                let l = g.label();
                g.set_label(None);
                l
            })
            .collect();
        DatasetSplit {
            source_train,
            source_test,
            target_train,
            target_test,
            provenance,
            hidden_target_train_labels: hidden,
        }
    }

    /// Target-train graphs with their labels restored. Only the
    /// target-supervised upper-bound baseline may use this.
    pub fn unmasked_target_train(&self) -> Vec<Graph> {
        self.target_train
            .iter()
            .zip(&self.hidden_target_train_labels)
            .map(|(g, &l)| {
                let mut g = g.clone();
                g.set_label(l);
                g
            })
            .collect()
    }

    pub(crate) fn hidden_target_train_labels(&self) -> &[Option<bool>] {
        &self.hidden_target_train_labels
    }

    pub fn all_graphs(&self) -> impl Iterator<Item = &Graph> {
        self.source_train
            .iter()
            .chain(&self.source_test)
            .chain(&self.target_train)
            .chain(&self.target_test)
    }

    fn all_graphs_mut(&mut self) -> impl Iterator<Item = &mut Graph> {
        self.source_train
            .iter_mut()
            .chain(&mut self.source_test)
            .chain(&mut self.target_train)
            .chain(&mut self.target_test)
    }

    /// Attach structural features to graphs that lack them, then z-normalize
    /// every feature column with statistics fitted on source-train only.
    pub fn prepare_features(&mut self, spec: &[FeatureKind]) -> Result<(), GraphError> {
        for g in self.all_graphs_mut() {
            if g.features().is_none() {
                let f = structural_features_of(g, spec)?;
                g.set_features(f)?;
            }
        }
        let stats = fit_feature_stats(&self.source_train)?;
        for g in self.all_graphs_mut() {
            apply_feature_stats(g, &stats)?;
        }
        Ok(())
    }
}

fn structural_features_of(g: &Graph, spec: &[FeatureKind]) -> Result<Tensor, GraphError> {
    structural_features(g, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges, None, None, DomainTag::Source).unwrap()
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let g = Graph::from_edges(1, &[], None, None, DomainTag::Source).unwrap();
        let a_hat = normalize_adjacency(&g);
        assert_eq!(a_hat, Tensor::from_rows(&[vec![1.0]]));
    }

    #[test]
    fn two_node_edge_normalizes_to_halves() {
        let g = Graph::from_edges(2, &[(0, 1)], None, None, DomainTag::Source).unwrap();
        let a_hat = normalize_adjacency(&g);
        let expected = Tensor::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(a_hat.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn normalization_is_permutation_equivariant() {
        use rand::seq::SliceRandom;
        let g = path_graph(6);
        let mut perm: Vec<usize> = (0..6).collect();
        let mut rng = crate::seed::rng(99, &[7]);
        perm.shuffle(&mut rng);

        let a = g.adjacency();
        let mut pa = Tensor::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                pa.set(perm[i], perm[j], a.get(i, j));
            }
        }
        let lhs = normalize_adjacency_matrix(&pa);
        let base = normalize_adjacency(&g);
        let mut rhs = Tensor::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                rhs.set(perm[i], perm[j], base.get(i, j));
            }
        }
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn normalized_adjacency_is_symmetric_with_bounded_spectrum() {
        let g = path_graph(7);
        let a_hat = normalize_adjacency(&g);
        assert!(a_hat.max_abs_diff(&a_hat.transpose()) == 0.0);

        // power iteration for the spectral radius
        let mut v = Tensor::filled(7, 1, 1.0 / (7f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = a_hat.matmul(&v).unwrap();
            let norm = w.data().iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = norm;
            v = w.scale(1.0 / norm);
        }
        assert!(lambda <= 1.0 + 1e-9, "spectral radius {lambda}");
    }

    #[test]
    fn from_edges_rejects_bad_edges() {
        assert!(matches!(
            Graph::from_edges(3, &[(2, 1)], None, None, DomainTag::Source),
            Err(GraphError::UnorderedEdge { i: 2, j: 1 })
        ));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 3)], None, None, DomainTag::Source),
            Err(GraphError::EdgeOutOfRange { .. })
        ));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 1), (0, 1)], None, None, DomainTag::Source),
            Err(GraphError::DuplicateEdge { i: 0, j: 1 })
        ));
    }

    #[test]
    fn from_adjacency_validates_invariants() {
        let mut bad = Tensor::zeros(2, 2);
        bad.set(0, 1, 1.0);
        assert!(matches!(
            Graph::from_adjacency(bad, None, None, DomainTag::Source),
            Err(GraphError::Asymmetric { i: 0, j: 1 })
        ));

        let mut diag = Tensor::zeros(2, 2);
        diag.set(0, 0, 1.0);
        assert!(matches!(
            Graph::from_adjacency(diag, None, None, DomainTag::Source),
            Err(GraphError::NonzeroDiagonal { i: 0 })
        ));
    }

    #[test]
    fn target_train_labels_are_masked_but_recoverable() {
        let mut g = path_graph(3);
        g.set_label(Some(true));
        let split = DatasetSplit::new(
            vec![],
            vec![],
            vec![g],
            vec![],
            SplitProvenance::File { path: "x".into() },
        );
        assert_eq!(split.target_train[0].label(), None);
        assert_eq!(split.unmasked_target_train()[0].label(), Some(true));
    }
}
