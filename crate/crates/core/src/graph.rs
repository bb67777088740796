//! Text-attributed graph model, symmetric adjacency normalization and the
//! graph JSON file format.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense materialization of the normalized adjacency is refused above this size.
pub const DENSE_NODE_LIMIT: usize = 4_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({u}, {v}) has an endpoint outside [0, {num_nodes})")]
    EndpointOutOfRange { u: usize, v: usize, num_nodes: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate undirected edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("malformed graph file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dense adjacency requested for {0} nodes (limit {DENSE_NODE_LIMIT})")]
    TooLargeForDense(usize),
}

/// Undirected simple graph whose nodes carry a text and a class label.
///
/// Immutable after construction. Neighbor lists are stored in CSR form,
/// sorted ascending and symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAttributedGraph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    texts: Vec<String>,
    labels: Vec<usize>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl TextAttributedGraph {
    /// Validates the inputs and builds the CSR neighbor lists.
    ///
    /// Edges may be given in either orientation; they are stored as `(u, v)`
    /// with `u < v`, in lexicographic order.
    pub fn new(
        num_nodes: usize,
        edges: &[(usize, usize)],
        texts: Vec<String>,
        labels: Vec<usize>,
    ) -> Result<Self, GraphError> {
        if texts.len() != num_nodes {
            return Err(GraphError::LengthMismatch {
                what: "texts",
                got: texts.len(),
                expected: num_nodes,
            });
        }
        if labels.len() != num_nodes {
            return Err(GraphError::LengthMismatch {
                what: "labels",
                got: labels.len(),
                expected: num_nodes,
            });
        }

        let mut canonical = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EndpointOutOfRange { u, v, num_nodes });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &canonical {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; num_nodes + 1];
        for i in 0..num_nodes {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut cursor = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0usize; offsets[num_nodes]];
        for &(u, v) in &canonical {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..num_nodes {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }

        Ok(Self {
            num_nodes,
            edges: canonical,
            texts,
            labels,
            offsets,
            neighbors,
        })
    }

    /// Same topology and labels, different node texts.
    pub fn with_texts(&self, texts: Vec<String>) -> Result<Self, GraphError> {
        if texts.len() != self.num_nodes {
            return Err(GraphError::LengthMismatch {
                what: "texts",
                got: texts.len(),
                expected: self.num_nodes,
            });
        }
        Ok(Self {
            texts,
            ..self.clone()
        })
    }

    /// Same nodes, texts and labels over a different edge set.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::new(self.num_nodes, edges, self.texts.clone(), self.labels.clone())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges, `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|i| self.degree(i)).collect()
    }

    /// `max(label) + 1`, or 0 for an empty graph.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn normalized_adjacency(&self) -> NormalizedAdjacency {
        NormalizedAdjacency::from_graph(self)
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`,
/// stored sparsely (self-loop included in each row).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn from_graph(g: &TextAttributedGraph) -> Self {
        let n = g.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * g.num_edges() + n);
        let mut weights = Vec::with_capacity(2 * g.num_edges() + n);
        offsets.push(0);
        for i in 0..n {
            let mut inserted_self = false;
            for &j in g.neighbors(i) {
                if !inserted_self && j > i {
                    cols.push(i);
                    weights.push(inv_sqrt[i] * inv_sqrt[i]);
                    inserted_self = true;
                }
                cols.push(j);
                weights.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            if !inserted_self {
                cols.push(i);
                weights.push(inv_sqrt[i] * inv_sqrt[i]);
            }
            offsets.push(cols.len());
        }
        Self {
            n,
            offsets,
            cols,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzero `(column, weight)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Entry `(i, j)`; zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `Â · X`.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "row count must match adjacency dimension");
        let mut out = Array2::zeros(x.raw_dim());
        for i in 0..self.n {
            let mut out_row = out.row_mut(i);
            for (j, w) in self.row(i) {
                out_row.scaled_add(w, &x.row(j));
            }
        }
        out
    }

    /// `Â · f` for a single graph signal.
    pub fn apply_vec(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, w)| w * f[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Result<Array2<f64>, GraphError> {
        if self.n > DENSE_NODE_LIMIT {
            return Err(GraphError::TooLargeForDense(self.n));
        }
        let mut dense = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                dense[[i, j]] = w;
            }
        }
        Ok(dense)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    labels: Vec<i64>,
    texts: Vec<String>,
}

/// Parses a graph from its JSON representation.
///
/// Edges must be listed once with `u < v`; reversed pairs are rejected
/// rather than silently reoriented.
pub fn graph_from_json(json: &str) -> Result<TextAttributedGraph, GraphError> {
    let file: GraphFile = serde_json::from_str(json)?;
    let mut edges = Vec::with_capacity(file.edges.len());
    for [u, v] in file.edges {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if u >= file.num_nodes || v >= file.num_nodes {
            return Err(GraphError::EndpointOutOfRange {
                u,
                v,
                num_nodes: file.num_nodes,
            });
        }
        if u > v {
            return Err(GraphError::Schema(format!(
                "edge [{u}, {v}] must be listed with u < v"
            )));
        }
        edges.push((u, v));
    }
    let mut labels = Vec::with_capacity(file.labels.len());
    for (i, &l) in file.labels.iter().enumerate() {
        if l < 0 {
            return Err(GraphError::Schema(format!("label of node {i} is negative")));
        }
        labels.push(l as usize);
    }
    TextAttributedGraph::new(file.num_nodes, &edges, file.texts, labels)
}

pub fn graph_to_json(g: &TextAttributedGraph) -> String {
    let file = GraphFile {
        num_nodes: g.num_nodes,
        edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
        labels: g.labels.iter().map(|&l| l as i64).collect(),
        texts: g.texts.clone(),
    };
    serde_json::to_string(&file).expect("graph serialization cannot fail")
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<TextAttributedGraph, GraphError> {
    graph_from_json(&fs::read_to_string(path)?)
}

/// Like [`load_graph`], additionally requiring every label to be `< num_classes`.
pub fn load_graph_with_classes(
    path: impl AsRef<Path>,
    num_classes: usize,
) -> Result<TextAttributedGraph, GraphError> {
    let g = load_graph(path)?;
    if let Some((i, &l)) = g.labels().iter().enumerate().find(|(_, &l)| l >= num_classes) {
        return Err(GraphError::Schema(format!(
            "label {l} of node {i} is not below the class count {num_classes}"
        )));
    }
    Ok(g)
}

pub fn save_graph(g: &TextAttributedGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    fs::write(path, graph_to_json(g))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(n: usize) -> (Vec<String>, Vec<usize>) {
        (vec![String::new(); n], vec![0; n])
    }

    fn path3() -> TextAttributedGraph {
        let (t, l) = blank(3);
        TextAttributedGraph::new(3, &[(0, 1), (1, 2)], t, l).unwrap()
    }

    #[test]
    fn two_node_neighbors_are_symmetric() {
        let (t, l) = blank(2);
        let g = TextAttributedGraph::new(2, &[(0, 1)], t, l).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let (t, l) = blank(1);
        let g = TextAttributedGraph::new(1, &[], t, l).unwrap();
        assert!(g.neighbors(0).is_empty());
    }

    #[test]
    fn path_degrees() {
        assert_eq!(path3().degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        let (t, l) = blank(3);
        assert!(matches!(
            TextAttributedGraph::new(3, &[(0, 3)], t.clone(), l.clone()),
            Err(GraphError::EndpointOutOfRange { .. })
        ));
        assert!(matches!(
            TextAttributedGraph::new(3, &[(1, 1)], t.clone(), l.clone()),
            Err(GraphError::SelfLoop(1))
        ));
        assert!(matches!(
            TextAttributedGraph::new(3, &[(0, 1), (1, 0)], t.clone(), l.clone()),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            TextAttributedGraph::new(3, &[], t, vec![0; 2]),
            Err(GraphError::LengthMismatch { what: "labels", .. })
        ));
    }

    #[test]
    fn normalized_adjacency_closed_forms() {
        let (t, l) = blank(2);
        let g = TextAttributedGraph::new(2, &[(0, 1)], t, l).unwrap();
        let a = g.normalized_adjacency().to_dense().unwrap();
        for v in a.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        let (t, l) = blank(1);
        let g = TextAttributedGraph::new(1, &[], t, l).unwrap();
        assert_eq!(g.normalized_adjacency().to_dense().unwrap()[[0, 0]], 1.0);

        let a = path3().normalized_adjacency();
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn apply_matches_dense_product() {
        let a = path3().normalized_adjacency();
        let x = Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64 - 1.5);
        let sparse = a.apply(&x);
        let dense = a.to_dense().unwrap().dot(&x);
        for (s, d) in sparse.iter().zip(dense.iter()) {
            assert!((s - d).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let g = path3();
        let back = graph_from_json(&graph_to_json(&g)).unwrap();
        assert_eq!(back, g);

        let self_loop = r#"{"num_nodes":2,"edges":[[0,0]],"labels":[0,0],"texts":["a","b"]}"#;
        assert!(matches!(graph_from_json(self_loop), Err(GraphError::SelfLoop(0))));

        let reversed = r#"{"num_nodes":2,"edges":[[1,0]],"labels":[0,0],"texts":["a","b"]}"#;
        assert!(matches!(graph_from_json(reversed), Err(GraphError::Schema(_))));

        let negative = r#"{"num_nodes":1,"edges":[],"labels":[-1],"texts":["a"]}"#;
        assert!(matches!(graph_from_json(negative), Err(GraphError::Schema(_))));

        assert!(matches!(graph_from_json("{"), Err(GraphError::Malformed(_))));
    }

    #[test]
    fn label_above_class_count_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        fs::write(
            &path,
            r#"{"num_nodes":2,"edges":[[0,1]],"labels":[0,2],"texts":["a","b"]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_graph_with_classes(&path, 2),
            Err(GraphError::Schema(_))
        ));
        assert!(load_graph_with_classes(&path, 3).is_ok());
    }

    #[test]
    fn save_then_load_keeps_csr() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let g = path3();
        save_graph(&g, &path).unwrap();
        let back = load_graph(&path).unwrap();
        for i in 0..3 {
            assert_eq!(back.neighbors(i), g.neighbors(i));
        }
    }
}
