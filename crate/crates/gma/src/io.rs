//! TU text datasets, the JSON dataset format, and message-matrix output.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use gma_core::{AttributedGraph, GraphDataset, Matrix, MessageMatrix};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{GmaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Tu,
    Json,
}

impl std::str::FromStr for Format {
    type Err = GmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tu" => Ok(Format::Tu),
            "json" => Ok(Format::Json),
            other => Err(GmaError::Usage(format!("unknown format '{other}' (expected tu or json)"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GmaError::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    Ok(read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_owned()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn optional_lines(path: &Path) -> Result<Option<Vec<(usize, String)>>> {
    if path.exists() {
        lines(path).map(Some)
    } else {
        Ok(None)
    }
}

fn malformed(path: &Path, line: usize, msg: impl std::fmt::Display) -> GmaError {
    GmaError::Malformed(format!("{} line {line}: {msg}", path.display()))
}

fn parse_fields<T: std::str::FromStr>(path: &Path, line: usize, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<T>()
                .map_err(|_| malformed(path, line, format!("cannot parse '{f}'")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(path: &Path, line: usize, text: &str) -> Result<T> {
    let v: Vec<T> = parse_fields(path, line, text)?;
    match <[T; 1]>::try_from(v) {
        Ok([x]) => Ok(x),
        Err(v) => Err(malformed(path, line, format!("expected one value, found {}", v.len()))),
    }
}

/// One-hot rows for integer labels; classes are the sorted distinct values.
fn one_hot(labels: &[i64]) -> Matrix {
    let classes: BTreeMap<i64, usize> = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, k))
        .collect();
    Matrix::from_fn(labels.len(), classes.len(), |i, j| if classes[&labels[i]] == j { 1.0 } else { 0.0 })
}

/// Real attribute rows, all of the same width.
fn attributes(path: &Path, rows: &[(usize, String)], expected: usize) -> Result<Matrix> {
    if rows.len() != expected {
        return Err(GmaError::Malformed(format!(
            "{} has {} rows, expected {expected}",
            path.display(),
            rows.len()
        )));
    }
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|(l, t)| parse_fields(path, *l, t))
        .collect::<Result<_>>()?;
    let width = parsed.first().map_or(0, Vec::len);
    if let Some((i, r)) = parsed.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(malformed(path, rows[i].0, format!("{} values, expected {width}", r.len())));
    }
    Ok(Matrix::from_fn(parsed.len(), width, |i, j| parsed[i][j]))
}

fn integer_column(path: &Path, rows: &[(usize, String)], expected: usize) -> Result<Vec<i64>> {
    if rows.len() != expected {
        return Err(GmaError::Malformed(format!(
            "{} has {} rows, expected {expected}",
            path.display(),
            rows.len()
        )));
    }
    rows.iter().map(|(l, t)| parse_one(path, *l, t)).collect()
}

/// Feature matrix from optional one-hot labels and optional attributes,
/// concatenated in that order.
fn combine(parts: Vec<Matrix>, rows: usize) -> Result<Matrix> {
    if parts.is_empty() {
        return Ok(Matrix::zeros(rows, 0));
    }
    Ok(Matrix::hstack(&parts.iter().collect::<Vec<_>>())?)
}

/// Loads `<dir>/<name>_*.txt`.
///
/// A line `i, j` of `_A.txt` is the directed edge from node `i` to node `j`:
/// `j` is the center and `i` the source. Graph labels are remapped to
/// `0..C` in sorted order. Repeated edges keep their first occurrence.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let a_path = file("A");
    let ind_path = file("graph_indicator");
    for p in [&a_path, &ind_path] {
        if !p.exists() {
            return Err(GmaError::Malformed(format!("missing required file {}", p.display())));
        }
    }
    let indicator_rows = lines(&ind_path)?;
    let indicator: Vec<i64> = indicator_rows
        .iter()
        .map(|(l, t)| parse_one(&ind_path, *l, t))
        .collect::<Result<_>>()?;
    let num_nodes = indicator.len();
    let graph_ids: Vec<i64> = indicator.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let graph_pos: BTreeMap<i64, usize> = graph_ids.iter().enumerate().map(|(k, &g)| (g, k)).collect();

    // Per node: owning graph and local index.
    let mut nodes_of: Vec<Vec<usize>> = vec![Vec::new(); graph_ids.len()];
    let mut local = vec![0usize; num_nodes];
    for (k, g) in indicator.iter().enumerate() {
        let gi = graph_pos[g];
        local[k] = nodes_of[gi].len();
        nodes_of[gi].push(k);
    }

    let mut node_parts = Vec::new();
    if let Some(rows) = optional_lines(&file("node_labels"))? {
        node_parts.push(one_hot(&integer_column(&file("node_labels"), &rows, num_nodes)?));
    }
    if let Some(rows) = optional_lines(&file("node_attributes"))? {
        node_parts.push(attributes(&file("node_attributes"), &rows, num_nodes)?);
    }
    let node_x = if node_parts.is_empty() {
        Matrix::filled(num_nodes, 1, 1.0)
    } else {
        combine(node_parts, num_nodes)?
    };

    let edge_rows = lines(&a_path)?;
    let mut edge_parts = Vec::new();
    if let Some(rows) = optional_lines(&file("edge_labels"))? {
        edge_parts.push(one_hot(&integer_column(&file("edge_labels"), &rows, edge_rows.len())?));
    }
    if let Some(rows) = optional_lines(&file("edge_attributes"))? {
        edge_parts.push(attributes(&file("edge_attributes"), &rows, edge_rows.len())?);
    }
    let edge_x = combine(edge_parts, edge_rows.len())?;

    let mut edges_of: Vec<Vec<((usize, usize), usize)>> = vec![Vec::new(); graph_ids.len()];
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut duplicates = 0usize;
    for (k, (line, text)) in edge_rows.iter().enumerate() {
        let ids: Vec<i64> = parse_fields(&a_path, *line, text)?;
        let [i, j] = <[i64; 2]>::try_from(ids)
            .map_err(|v| malformed(&a_path, *line, format!("expected two node ids, found {}", v.len())))?;
        let node = |id: i64| -> Result<usize> {
            if id < 1 || id as usize > num_nodes {
                return Err(malformed(&a_path, *line, format!("node id {id} outside 1..={num_nodes}")));
            }
            Ok(id as usize - 1)
        };
        let (src, dst) = (node(i)?, node(j)?);
        let g = graph_pos[&indicator[src]];
        if graph_pos[&indicator[dst]] != g {
            return Err(malformed(&a_path, *line, format!("edge {i}, {j} joins two graphs")));
        }
        if !seen.insert((src, dst)) {
            duplicates += 1;
            continue;
        }
        edges_of[g].push(((local[dst], local[src]), k));
    }
    if duplicates > 0 {
        log::warn!("{}: dropped {duplicates} repeated edges", a_path.display());
    }

    let labels_path = file("graph_labels");
    let (labels, num_classes) = match optional_lines(&labels_path)? {
        Some(rows) => {
            let raw = integer_column(&labels_path, &rows, graph_ids.len())?;
            let classes: BTreeMap<i64, usize> = raw
                .iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(k, v)| (v, k))
                .collect();
            (raw.iter().map(|y| Some(classes[y])).collect(), classes.len().max(1))
        }
        None => (vec![None; graph_ids.len()], 1),
    };

    let graphs = (0..graph_ids.len())
        .map(|g| {
            let x = node_x.select_rows(&nodes_of[g]);
            let rows: Vec<usize> = edges_of[g].iter().map(|&(_, k)| k).collect();
            let e = edge_x.select_rows(&rows);
            let edges = edges_of[g].iter().map(|&(edge, _)| edge).collect();
            AttributedGraph::new(x, edges, e, labels[g]).map_err(|err| {
                GmaError::Malformed(format!("graph {} of {}: {err}", graph_ids[g], dir.display()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphDataset::new(graphs, num_classes, node_x.cols(), edge_x.cols())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonGraph {
    pub x: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub e: Vec<Vec<f64>>,
    #[serde(default)]
    pub label: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonDataset {
    pub num_classes: usize,
    pub d: usize,
    pub p: usize,
    pub graphs: Vec<JsonGraph>,
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, file: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| GmaError::Json {
        file: file.to_path_buf(),
        location: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?, path)
}

fn rows_to_matrix(rows: &[Vec<f64>], width: usize, count: usize, file: &Path, at: &str) -> Result<Matrix> {
    if width == 0 && rows.is_empty() {
        return Ok(Matrix::zeros(count, 0));
    }
    if rows.len() != count {
        return Err(GmaError::Json {
            file: file.to_path_buf(),
            location: at.into(),
            message: format!("{} rows, expected {count}", rows.len()),
        });
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(GmaError::Json {
            file: file.to_path_buf(),
            location: format!("{at}[{r}]"),
            message: format!("{} values, expected {width}", row.len()),
        });
    }
    Ok(Matrix::from_fn(count, width, |i, j| rows[i][j]))
}

impl JsonGraph {
    pub fn from_graph(g: &AttributedGraph) -> Self {
        JsonGraph {
            x: g.node_features().to_rows(),
            edges: g.edges().to_vec(),
            e: g.edge_features().to_rows(),
            label: g.label(),
        }
    }

    /// Converts with the declared widths; `at` is this graph's JSON path.
    pub fn to_graph(&self, d: usize, p: usize, file: &Path, at: &str) -> Result<AttributedGraph> {
        let x = rows_to_matrix(&self.x, d, self.x.len(), file, &format!("{at}.x"))?;
        let e = rows_to_matrix(&self.e, p, self.edges.len(), file, &format!("{at}.e"))?;
        AttributedGraph::new(x, self.edges.clone(), e, self.label).map_err(|err| GmaError::Json {
            file: file.to_path_buf(),
            location: at.into(),
            message: err.to_string(),
        })
    }

    /// Widths inferred from the first node and edge rows.
    pub fn to_graph_inferred(&self, file: &Path) -> Result<AttributedGraph> {
        let d = self.x.first().map_or(0, Vec::len);
        let p = self.e.first().map_or(0, Vec::len);
        self.to_graph(d, p, file, ".")
    }
}

impl JsonDataset {
    pub fn from_dataset(ds: &GraphDataset) -> Self {
        JsonDataset {
            num_classes: ds.num_classes(),
            d: ds.node_dim(),
            p: ds.edge_dim(),
            graphs: ds.graphs().iter().map(JsonGraph::from_graph).collect(),
        }
    }

    pub fn to_dataset(&self, file: &Path) -> Result<GraphDataset> {
        let graphs = self
            .graphs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let at = format!("graphs[{i}]");
                if let Some(width) = g.x.first().map(Vec::len).filter(|&w| w != self.d) {
                    return Err(GmaError::Json {
                        file: file.to_path_buf(),
                        location: format!("{at}.x"),
                        message: format!("graph {i} has d={width} but the dataset declares d={}", self.d),
                    });
                }
                g.to_graph(self.d, self.p, file, &at)
            })
            .collect::<Result<Vec<_>>>()?;
        GraphDataset::new(graphs, self.num_classes, self.d, self.p).map_err(|err| GmaError::Json {
            file: file.to_path_buf(),
            location: ".".into(),
            message: err.to_string(),
        })
    }
}

pub fn load_json_dataset(path: &Path) -> Result<GraphDataset> {
    read_json::<JsonDataset>(path)?.to_dataset(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| GmaError::Usage(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| GmaError::io(path, e))
}

pub fn write_json_dataset(path: &Path, ds: &GraphDataset) -> Result<()> {
    write_json(path, &JsonDataset::from_dataset(ds))
}

/// Loads a TU directory (named after its last path component) or a JSON
/// file. The format is inferred from the path when not given.
pub fn load_dataset(path: &Path, format: Option<Format>) -> Result<(GraphDataset, String)> {
    let format = format.unwrap_or(if path.is_dir() { Format::Tu } else { Format::Json });
    let stem = |p: &Path| -> String {
        let full = p.canonicalize().unwrap_or_else(|_| p.to_path_buf());
        full.file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    };
    match format {
        Format::Tu => {
            let name = stem(path);
            Ok((load_tu_dataset(path, &name)?, name))
        }
        Format::Json => Ok((load_json_dataset(path)?, stem(path))),
    }
}

/// `{"d", "p", "index": [[v, h]], "rows": [[real]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessagesJson {
    pub d: usize,
    pub p: usize,
    pub index: Vec<(usize, usize)>,
    pub rows: Vec<Vec<f64>>,
}

impl MessagesJson {
    pub fn from_messages(m: &MessageMatrix) -> Self {
        MessagesJson {
            d: m.node_dim(),
            p: m.edge_dim(),
            index: m.index().to_vec(),
            rows: m.rows().to_rows(),
        }
    }
}

/// A single graph, or one graph (`index`) of a dataset file.
pub fn load_graph(path: &Path, index: usize) -> Result<AttributedGraph> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse_json(&text, path)?;
    if value.get("graphs").is_some() {
        let ds: JsonDataset = parse_json(&text, path)?;
        let g = ds.graphs.get(index).ok_or_else(|| {
            GmaError::Usage(format!("{} has {} graphs, no graph {index}", path.display(), ds.graphs.len()))
        })?;
        g.to_graph(ds.d, ds.p, path, &format!("graphs[{index}]"))
    } else {
        parse_json::<JsonGraph>(&text, path)?.to_graph_inferred(path)
    }
}

