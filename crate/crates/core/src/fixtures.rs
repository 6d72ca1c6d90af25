//! Small hand-checkable graphs shared by tests and examples.

use alloc::vec;

use crate::graph::AttributedGraph;
use crate::linalg::Matrix;

/// Directed 3-cycle `1←0, 2←1, 0←2` with `X = [[1,0],[0,1],[1,1]]` and edge
/// weights `0.5, 0.25, 1.0`.
pub fn triangle() -> AttributedGraph {
    AttributedGraph::new(
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap(),
        vec![(1, 0), (2, 1), (0, 2)],
        Matrix::from_rows(&[[0.5], [0.25], [1.0]]).unwrap(),
        Some(0),
    )
    .unwrap()
}

/// Bidirected unweighted path `0 – 1 – 2` with two-dimensional features.
pub fn chain3() -> AttributedGraph {
    AttributedGraph::without_edge_features(
        Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5], [0.25, 3.0]]).unwrap(),
        vec![(1, 0), (0, 1), (2, 1), (1, 2)],
        Some(1),
    )
    .unwrap()
}
