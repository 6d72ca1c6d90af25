//! Seeded synthetic graph generators.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::graph::{AttributedGraph, GraphDataset};
use crate::linalg::Matrix;

/// Size limits for [`random_graph`].
#[derive(Clone, Copy, Debug)]
pub struct RandomGraphLimits {
    pub max_nodes: usize,
    pub max_node_dim: usize,
    pub max_edge_dim: usize,
    pub edge_prob: f64,
}

impl Default for RandomGraphLimits {
    fn default() -> Self {
        RandomGraphLimits {
            max_nodes: 12,
            max_node_dim: 4,
            max_edge_dim: 3,
            edge_prob: 0.3,
        }
    }
}

/// A random directed graph with features drawn uniformly from `[-1, 1]`.
/// Edge order is shuffled; roughly half the graphs are made bidirected.
pub fn random_graph<R: Rng + ?Sized>(limits: &RandomGraphLimits, rng: &mut R) -> AttributedGraph {
    let n = rng.random_range(1..=limits.max_nodes);
    let d = rng.random_range(1..=limits.max_node_dim);
    let p = rng.random_range(0..=limits.max_edge_dim);
    random_graph_with_dims(n, d, p, limits.edge_prob, rng)
}

pub fn random_graph_with_dims<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    p: usize,
    edge_prob: f64,
    rng: &mut R,
) -> AttributedGraph {
    let mut edges = Vec::new();
    for v in 0..n {
        for h in 0..n {
            if v != h && rng.random_bool(edge_prob) {
                edges.push((v, h));
            }
        }
    }
    edges.shuffle(rng);
    let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0));
    let e = Matrix::from_fn(edges.len(), p, |_, _| rng.random_range(-1.0..=1.0));
    let g = AttributedGraph::new(x, edges, e, None).expect("generated graph is valid");
    if rng.random_bool(0.5) {
        g.to_bidirected()
    } else {
        g
    }
}

/// Undirected cycle on `n ≥ 3` nodes with constant node feature 1.
pub fn cycle(n: usize, label: usize) -> AttributedGraph {
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        edges.push((j, i));
        edges.push((i, j));
    }
    AttributedGraph::without_edge_features(Matrix::filled(n, 1, 1.0), edges, Some(label))
        .expect("cycle is valid")
}

/// Undirected star: node 0 joined to `n - 1` leaves, constant node feature 1.
pub fn star(n: usize, label: usize) -> AttributedGraph {
    let mut edges = Vec::with_capacity(2 * n);
    for leaf in 1..n {
        edges.push((0, leaf));
        edges.push((leaf, 0));
    }
    AttributedGraph::without_edge_features(Matrix::filled(n, 1, 1.0), edges, Some(label))
        .expect("star is valid")
}

/// Binary dataset: cycles (class 0) against stars (class 1), sizes in
/// `[5, 15]`, balanced and shuffled.
pub fn cycles_vs_stars<R: Rng + ?Sized>(num_graphs: usize, rng: &mut R) -> Result<GraphDataset> {
    let mut graphs: Vec<AttributedGraph> = (0..num_graphs)
        .map(|i| {
            let n = rng.random_range(5..=15);
            if i % 2 == 0 {
                cycle(n, 0)
            } else {
                star(n, 1)
            }
        })
        .collect();
    graphs.shuffle(rng);
    GraphDataset::new(graphs, 2, 1, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_graphs_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lim = RandomGraphLimits::default();
        for _ in 0..50 {
            let g = random_graph(&lim, &mut rng);
            assert!(g.num_nodes() <= 12 && g.node_dim() <= 4 && g.edge_dim() <= 3);
        }
    }

    #[test]
    fn cycles_and_stars() {
        assert_eq!(cycle(5, 0).num_edges(), 10);
        assert_eq!(star(5, 1).in_degrees()[0], 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = cycles_vs_stars(20, &mut rng).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.majority_rate().unwrap(), 0.5);
    }
}
