use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

use super::{Graph, GraphError};

/// A graph together with its edge-perturbed adjacency and the signed
/// record of what changed.
///
/// Invariants held by construction: `a_noise = a_prime - adjacency` exactly,
/// all three matrices symmetric with zero diagonal, `a_prime` binary, and
/// `a_noise` entries in `{-1, 0, 1}` with `-1` only on former edges and `+1`
/// only on former non-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    pub base: Graph,
    pub a_prime: Tensor,
    pub a_noise: Tensor,
    pub p_drop: f64,
    pub p_add: f64,
    pub seed: u64,
}

impl AugmentedGraph {
    /// An unperturbed view of a graph: `a_prime = adjacency`, zero noise.
    /// This is the phase-1 input shape.
    pub fn clean(g: &Graph) -> Self {
        let n = g.n();
        AugmentedGraph {
            a_prime: g.adjacency().clone(),
            a_noise: Tensor::zeros(n, n),
            base: g.clone(),
            p_drop: 0.0,
            p_add: 0.0,
            seed: 0,
        }
    }

    /// Binary perturbation mask `|a_noise|` (1 where a pair was touched).
    pub fn perturbation_mask(&self) -> Tensor {
        self.a_noise.map(f64::abs)
    }
}

/// Randomly drop existing edges and add absent ones.
///
/// Each existing undirected edge is dropped independently with probability
/// `p_drop`; each absent unordered pair gains an edge independently with
/// probability `p_edge * p_add`, where `p_edge` is the graph's edge density
/// over unordered pairs. Masks are sampled on the upper triangle and
/// mirrored, so the result stays symmetric with a zero diagonal.
pub fn augment(g: &Graph, p_drop: f64, p_add: f64, seed: u64) -> Result<AugmentedGraph, GraphError> {
    for (name, value) in [("p_drop", p_drop), ("p_add", p_add)] {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(GraphError::InvalidProbability { name, value });
        }
    }
    let n = g.n();
    let p_edge = g.density();
    let p_add_eff = p_edge * p_add;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = g.adjacency();
    let mut a_prime = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.gen();
            if a.get(i, j) != 0.0 {
                if u < p_drop {
                    a_prime.set(i, j, 0.0);
                    a_prime.set(j, i, 0.0);
                }
            } else if u < p_add_eff {
                a_prime.set(i, j, 1.0);
                a_prime.set(j, i, 1.0);
            }
        }
    }
    let a_noise = a_prime.sub(a).expect("same shape");
    Ok(AugmentedGraph {
        base: g.clone(),
        a_prime,
        a_noise,
        p_drop,
        p_add,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DomainTag;

    fn ten_node_twenty_edge_graph() -> Graph {
        // deterministic 10-node graph with exactly 20 edges
        let mut edges = Vec::new();
        let mut k = 0usize;
        'outer: for i in 0..10 {
            for j in (i + 1)..10 {
                if (i + 2 * j + k) % 2 == 0 {
                    edges.push((i, j));
                    if edges.len() == 20 {
                        break 'outer;
                    }
                }
                k += 1;
            }
        }
        assert_eq!(edges.len(), 20);
        Graph::from_edges(10, &edges, None, None, DomainTag::Source).unwrap()
    }

    #[test]
    fn zero_rates_are_identity() {
        let g = ten_node_twenty_edge_graph();
        let aug = augment(&g, 0.0, 0.0, 7).unwrap();
        assert_eq!(&aug.a_prime, g.adjacency());
        assert_eq!(aug.a_noise, Tensor::zeros(10, 10));
    }

    #[test]
    fn total_drop_empties_the_graph() {
        let g = ten_node_twenty_edge_graph();
        let aug = augment(&g, 1.0, 0.0, 7).unwrap();
        assert_eq!(aug.a_prime, Tensor::zeros(10, 10));
        assert_eq!(aug.a_noise, g.adjacency().scale(-1.0));
    }

    #[test]
    fn invalid_probability_is_rejected() {
        let g = ten_node_twenty_edge_graph();
        assert!(matches!(
            augment(&g, 1.5, 0.0, 7),
            Err(GraphError::InvalidProbability { name: "p_drop", .. })
        ));
        assert!(matches!(
            augment(&g, 0.0, -0.1, 7),
            Err(GraphError::InvalidProbability { name: "p_add", .. })
        ));
    }

    #[test]
    fn noise_identity_and_sign_structure_hold() {
        let g = ten_node_twenty_edge_graph();
        for seed in 0..50 {
            let aug = augment(&g, 0.3, 0.4, seed).unwrap();
            let diff = aug.a_prime.sub(g.adjacency()).unwrap();
            assert_eq!(diff, aug.a_noise);
            for i in 0..10 {
                assert_eq!(aug.a_prime.get(i, i), 0.0);
                for j in 0..10 {
                    assert_eq!(aug.a_prime.get(i, j), aug.a_prime.get(j, i));
                    let noise = aug.a_noise.get(i, j);
                    assert!(noise == 0.0 || noise == 1.0 || noise == -1.0);
                    if noise == -1.0 {
                        assert_eq!(g.adjacency().get(i, j), 1.0);
                    }
                    if noise == 1.0 {
                        assert_eq!(g.adjacency().get(i, j), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn empirical_drop_rate_matches_p_drop() {
        // Monte-Carlo oracle over the Bernoulli definition.
        let g = ten_node_twenty_edge_graph();
        let trials = 20_000u64;
        let mut dropped = 0u64;
        for seed in 0..trials {
            let aug = augment(&g, 0.1, 0.0, seed).unwrap();
            dropped += aug
                .a_noise
                .data()
                .iter()
                .filter(|&&v| v == -1.0)
                .count() as u64
                / 2;
        }
        let rate = dropped as f64 / (trials as f64 * 20.0);
        assert!((0.095..=0.105).contains(&rate), "empirical drop rate {rate}");
    }

    #[test]
    fn expected_added_edges_within_three_sigma() {
        let g = ten_node_twenty_edge_graph();
        let absent_pairs = 45.0 - 20.0;
        let p_edge = 20.0 / 45.0;
        let p = p_edge * 0.3;
        let trials = 10_000u64;
        let mut added = 0u64;
        for seed in 0..trials {
            let aug = augment(&g, 0.0, 0.3, seed).unwrap();
            added += aug.a_noise.data().iter().filter(|&&v| v == 1.0).count() as u64 / 2;
        }
        let mean_added = added as f64 / trials as f64;
        let expected = p * absent_pairs;
        let sigma = (absent_pairs * p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (mean_added - expected).abs() <= 3.0 * sigma,
            "mean added {mean_added}, expected {expected} +/- {}",
            3.0 * sigma
        );
    }
}
