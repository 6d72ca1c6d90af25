use std::fs;
use std::path::Path;

use gma::io::{load_dataset, load_json_dataset, load_tu_dataset, write_json_dataset, Format};
use gma::GmaError;
use gma_core::synthetic::{random_graph, RandomGraphLimits};
use gma_core::GraphDataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mutag() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/MUTAG"))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn mutag_statistics() {
    let ds = load_tu_dataset(mutag(), "MUTAG").unwrap();
    assert_eq!(ds.len(), 188);
    assert_eq!(ds.num_classes(), 2);
    assert!((ds.mean_nodes() - 17.93).abs() <= 0.01, "{}", ds.mean_nodes());
    // Seven atom types, four bond types.
    assert_eq!((ds.node_dim(), ds.edge_dim()), (7, 4));
    assert!((ds.majority_rate().unwrap() - 125.0 / 188.0).abs() < 1e-12);
    assert_eq!(ds.to_bidirected(), ds);
}

#[test]
fn triangle_without_attributes_gets_constant_feature() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "T_A.txt", "1, 2\n2, 3\n3, 1\n");
    write(dir.path(), "T_graph_indicator.txt", "1\n1\n1\n");
    let ds = load_tu_dataset(dir.path(), "T").unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!((ds.node_dim(), ds.edge_dim()), (1, 0));
    let g = &ds.graphs()[0];
    assert_eq!(g.node_features().as_slice(), &[1.0, 1.0, 1.0]);
    // "i, j" is an edge from i to j: center j, source i.
    assert_eq!(g.edges(), &[(1, 0), (2, 1), (0, 2)]);
    assert_eq!(g.label(), None);
}

#[test]
fn labels_and_attributes_are_combined() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "X_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n1, 2\n");
    write(dir.path(), "X_graph_indicator.txt", "1\n1\n2\n2\n");
    write(dir.path(), "X_graph_labels.txt", "-1\n1\n");
    write(dir.path(), "X_node_labels.txt", "5\n3\n5\n9\n");
    write(dir.path(), "X_node_attributes.txt", "0.5, 1.5\n2, 3\n-1, 0\n4, 4\n");
    write(dir.path(), "X_edge_labels.txt", "0\n0\n1\n1\n0\n");
    let ds = load_tu_dataset(dir.path(), "X").unwrap();
    assert_eq!((ds.len(), ds.num_classes(), ds.node_dim(), ds.edge_dim()), (2, 2, 5, 2));
    assert_eq!(ds.labels().unwrap(), vec![0, 1]);
    let g = &ds.graphs()[1];
    assert_eq!(g.node_features().row(0), &[0.0, 1.0, 0.0, -1.0, 0.0]);
    assert_eq!(g.node_features().row(1), &[0.0, 0.0, 1.0, 4.0, 4.0]);
    assert_eq!(g.edge_features().row(0), &[0.0, 1.0]);
    // The repeated first edge is dropped.
    assert_eq!(ds.graphs()[0].num_edges(), 2);
}

#[test]
fn missing_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "M_A.txt", "1, 2\n");
    let err = load_tu_dataset(dir.path(), "M").unwrap_err();
    assert!(err.to_string().contains("M_graph_indicator.txt"), "{err}");

    write(dir.path(), "M_graph_indicator.txt", "1\n1\n");
    write(dir.path(), "M_A.txt", "1, 3\n");
    let err = load_tu_dataset(dir.path(), "M").unwrap_err();
    assert!(matches!(err, GmaError::Malformed(_)), "{err}");
    assert!(err.to_string().contains("node id 3"), "{err}");

    write(dir.path(), "M_A.txt", "1, x\n");
    assert!(matches!(load_tu_dataset(dir.path(), "M").unwrap_err(), GmaError::Malformed(_)));
}

#[test]
fn tu_to_json_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = load_tu_dataset(mutag(), "MUTAG").unwrap();
    let path = dir.path().join("mutag.json");
    write_json_dataset(&path, &ds).unwrap();
    assert_eq!(load_json_dataset(&path).unwrap(), ds);
}

#[test]
fn random_real_features_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let limits = RandomGraphLimits {
        max_node_dim: 3,
        max_edge_dim: 2,
        ..Default::default()
    };
    let graphs: Vec<_> = (0..30)
        .map(|_| random_graph(&limits, &mut rng))
        .filter(|g| g.node_dim() == 3 && g.edge_dim() == 2)
        .collect();
    assert!(!graphs.is_empty());
    let ds = GraphDataset::new(graphs, 1, 3, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_json_dataset(&path, &ds).unwrap();
    assert_eq!(load_json_dataset(&path).unwrap(), ds);
}

#[test]
fn json_single_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.json");
    write(
        dir.path(),
        "one.json",
        r#"{"num_classes": 2, "d": 2, "p": 1, "graphs": [
            {"x": [[1, 0], [0, 1], [1, 1]], "edges": [[0, 1], [1, 2], [2, 0]],
             "e": [[0.5], [1.0], [-1.0]], "label": 0}]}"#,
    );
    let ds = load_json_dataset(&path).unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds.graphs()[0].num_edges(), 3);
    let (ds2, name) = load_dataset(&path, Some(Format::Json)).unwrap();
    assert_eq!((ds2, name.as_str()), (ds, "one"));
}

#[test]
fn json_mismatched_width_names_second_graph() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        r#"{"num_classes": 2, "d": 2, "p": 0, "graphs": [
            {"x": [[1, 0]], "edges": [], "e": [], "label": 0},
            {"x": [[1, 0, 3]], "edges": [], "e": [], "label": 1}]}"#,
    );
    let err = load_json_dataset(&dir.path().join("bad.json")).unwrap_err();
    assert!(err.to_string().contains("graphs[1]"), "{err}");
}

#[test]
fn json_schema_errors_cite_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        r#"{"num_classes": 2, "d": 1, "p": 0, "graphs": [
            {"x": [[1]], "edges": [], "e": [], "label": 0},
            {"x": [["a"]], "edges": [], "e": [], "label": 1}]}"#,
    );
    let err = load_json_dataset(&dir.path().join("bad.json")).unwrap_err();
    match &err {
        GmaError::Json { location, .. } => assert_eq!(location, "graphs[1].x[0][0]"),
        other => panic!("{other}"),
    }
    write(dir.path(), "extra.json", r#"{"num_classes": 2, "d": 1, "p": 0, "graphs": [], "q": 1}"#);
    assert!(load_json_dataset(&dir.path().join("extra.json")).is_err());
}

#[test]
fn empty_graph_list_keeps_num_classes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.json", r#"{"num_classes": 3, "d": 2, "p": 1, "graphs": []}"#);
    let ds = load_json_dataset(&dir.path().join("e.json")).unwrap();
    assert!(ds.is_empty());
    assert_eq!((ds.num_classes(), ds.node_dim(), ds.edge_dim()), (3, 2, 1));
}
