use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::tensor::Tensor;

use super::{
    structural_features, DatasetSplit, DomainTag, FeatureKind, Graph, GraphError, SplitProvenance,
    DEFAULT_FEATURE_SPEC,
};

/// Gaussian jitter applied on top of structural features.
const FEATURE_NOISE_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

/// Planted-partition edge densities for one label class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMotif {
    pub density_in: f64,
    pub density_out: f64,
}

/// Domain-specific generator knobs: community size ratio, an additive mean
/// shift applied to every feature column, and extra structural noise on top
/// of the global flip rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub block_ratio: f64,
    pub feature_shift: f64,
    /// Additional independent edge-flip rate for this domain (default 0);
    /// composes with the global `flip_rate`.
    #[serde(default)]
    pub extra_flip_rate: f64,
    /// Edge under-observation rate for this domain (default 0): each drawn
    /// edge is independently dropped with this probability, modeling
    /// platforms whose interactions are recorded more sparsely.
    #[serde(default)]
    pub extra_drop_rate: f64,
}

/// Configuration for the synthetic domain-shift benchmark generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub nodes_per_graph: usize,
    pub graphs_per_split: SplitCounts,
    /// Motif densities for label 0 and label 1, in that order.
    pub label_motifs: [LabelMotif; 2],
    pub source: DomainParams,
    pub target: DomainParams,
    /// Independent edge-flip rate applied after the motif draw.
    pub flip_rate: f64,
    pub feature_spec: Vec<FeatureKind>,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    /// The default domain-shift benchmark: label decides community motif
    /// strength, the target domain rebalances block sizes and shifts the
    /// feature means.
    fn default() -> Self {
        GeneratorConfig {
            nodes_per_graph: 50,
            graphs_per_split: SplitCounts { train: 200, test: 100 },
            label_motifs: [
                LabelMotif { density_in: 0.10, density_out: 0.10 },
                LabelMotif { density_in: 0.24, density_out: 0.04 },
            ],
            source: DomainParams {
                block_ratio: 0.5,
                feature_shift: 0.0,
                extra_flip_rate: 0.0,
                extra_drop_rate: 0.0,
            },
            target: DomainParams {
                block_ratio: 0.5,
                feature_shift: 0.0,
                extra_flip_rate: 0.0,
                extra_drop_rate: 0.3,
            },
            flip_rate: 0.02,
            feature_spec: DEFAULT_FEATURE_SPEC.to_vec(),
            seed: 2024,
        }
    }
}

impl GeneratorConfig {
    /// Identical domains, no flips: the no-shift control.
    pub fn zero_shift() -> Self {
        let mut cfg = GeneratorConfig::default();
        cfg.target = cfg.source;
        cfg.flip_rate = 0.0;
        cfg
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let mut checks: Vec<(String, f64)> = vec![
            ("flip_rate".into(), self.flip_rate),
            ("source.block_ratio".into(), self.source.block_ratio),
            ("target.block_ratio".into(), self.target.block_ratio),
            ("source.extra_flip_rate".into(), self.source.extra_flip_rate),
            ("target.extra_flip_rate".into(), self.target.extra_flip_rate),
            ("source.extra_drop_rate".into(), self.source.extra_drop_rate),
            ("target.extra_drop_rate".into(), self.target.extra_drop_rate),
        ];
        for (li, m) in self.label_motifs.iter().enumerate() {
            checks.push((format!("label_motifs[{li}].density_in"), m.density_in));
            checks.push((format!("label_motifs[{li}].density_out"), m.density_out));
        }
        for (name, value) in checks {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(GraphError::InfeasibleConfig { name, value });
            }
        }
        Ok(())
    }

    /// First-block size for a domain; blocks are the contiguous node ranges
    /// `[0, n1)` and `[n1, n)`.
    pub fn block_size(&self, domain: DomainTag) -> usize {
        let ratio = match domain {
            DomainTag::Source => self.source.block_ratio,
            DomainTag::Target => self.target.block_ratio,
        };
        let n = self.nodes_per_graph;
        ((n as f64 * ratio).round() as usize).clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Generate the four-way source/target benchmark split.
///
/// Every graph is an independent draw keyed by `mix(seed, split, index)`:
/// the label (alternating for exact balance) picks the planted-partition
/// densities, the domain picks block sizes and the feature shift, then each
/// pair is flipped independently at `flip_rate`. Features are structural
/// features of the final graph plus the domain shift and Gaussian noise.
pub fn generate_synthetic_pair(cfg: &GeneratorConfig, seed: u64) -> Result<DatasetSplit, GraphError> {
    cfg.validate()?;
    let make = |split_salt: u64, count: usize, domain: DomainTag| -> Result<Vec<Graph>, GraphError> {
        (0..count)
            .map(|i| sample_graph(cfg, seed, split_salt, i, domain))
            .collect()
    };
    let split = DatasetSplit::new(
        make(seed::SALT_SPLIT_SOURCE_TRAIN, cfg.graphs_per_split.train, DomainTag::Source)?,
        make(seed::SALT_SPLIT_SOURCE_TEST, cfg.graphs_per_split.test, DomainTag::Source)?,
        make(seed::SALT_SPLIT_TARGET_TRAIN, cfg.graphs_per_split.train, DomainTag::Target)?,
        make(seed::SALT_SPLIT_TARGET_TEST, cfg.graphs_per_split.test, DomainTag::Target)?,
        SplitProvenance::Generator(cfg.clone()),
    );
    Ok(split)
}

fn sample_graph(
    cfg: &GeneratorConfig,
    seed: u64,
    split_salt: u64,
    index: usize,
    domain: DomainTag,
) -> Result<Graph, GraphError> {
    let n = cfg.nodes_per_graph;
    let label = index % 2 == 1;
    let motif = cfg.label_motifs[label as usize];
    let dp = match domain {
        DomainTag::Source => cfg.source,
        DomainTag::Target => cfg.target,
    };
    let n1 = cfg.block_size(domain);
    let mut rng = seed::rng(seed, &[split_salt, index as u64]);

    // global and per-domain flips compose independently
    let flip = 1.0 - (1.0 - cfg.flip_rate) * (1.0 - dp.extra_flip_rate);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let in_block = (i < n1) == (j < n1);
            let p = if in_block { motif.density_in } else { motif.density_out };
            // Three draws per pair keeps the stream layout identical
            // across noise settings.
            let u_edge: f64 = rng.gen();
            let u_flip: f64 = rng.gen();
            let u_drop: f64 = rng.gen();
            let mut edge = u_edge < p;
            if u_flip < flip {
                edge = !edge;
            }
            if edge && u_drop < dp.extra_drop_rate {
                edge = false;
            }
            if edge {
                edges.push((i, j));
            }
        }
    }
    let mut g = Graph::from_edges(n, &edges, None, Some(label), domain)?;

    let base = structural_features(&g, &cfg.feature_spec)?;
    let noise = Normal::new(0.0, FEATURE_NOISE_STD).expect("valid std");
    let mut features = Tensor::zeros(n, cfg.feature_spec.len());
    for i in 0..n {
        for (c, kind) in cfg.feature_spec.iter().enumerate() {
            let scale = if std::env::var("DGDA_GEN_NO_SCALE").is_ok() { 1.0 } else { feature_scale(*kind, n) };
            let scaled = base.get(i, c) * scale;
            features.set(i, c, scaled + dp.feature_shift + noise.sample(&mut rng));
        }
    }
    g.set_features(features)?;
    Ok(g)
}

/// Deterministic per-column rescaling to O(1) magnitude, so the domain
/// shift perturbs every column at a comparable signal-to-noise ratio.
fn feature_scale(kind: FeatureKind, n: usize) -> f64 {
    let nf = n as f64;
    match kind {
        FeatureKind::Degree | FeatureKind::Coreness => 1.0 / (nf - 1.0).max(1.0),
        FeatureKind::Pagerank => nf,
        FeatureKind::Clustering => 1.0,
        FeatureKind::EigenvectorCentrality => nf.sqrt(),
    }
}
