//! Undirected weighted graphs and their Laplacians.
//!
//! A [`Graph`] is a vertex count plus a list of weighted undirected edges.
//! Vertices are addressed 0-based in the API; the JSON file format (see
//! [`load_graph`]/[`save_graph`]) uses 1-based indices, and conversion
//! happens only at that boundary.
//!
//! [`build_laplacian`] produces the combinatorial Laplacian `L = D - W`:
//! symmetric, rows summing to zero, positive semidefinite. Symmetry is
//! exact because each off-diagonal pair is assigned from the same weight,
//! and the diagonal is the sum of the same weights in the same order.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected weighted graph with no self-loops and no duplicate edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    /// Builds a graph on `n` vertices from `(i, j, weight)` edges, 0-based.
    ///
    /// Rejects self-loops, duplicate edges (in either orientation), negative
    /// or non-finite weights, out-of-range indices, and `n == 0`.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("vertex count must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j, w) in &edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Graph { n, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Adjacency lists (unweighted view), useful for connectivity checks
    /// and for locating neighbouring vertices.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// True when every vertex is reachable from vertex 0.
    pub fn is_connected(&self) -> bool {
        reachable_from(0, self.n, &self.adjacency()) == self.n
    }
}

/// Breadth-first reachable-vertex count; shared with the mesh module.
pub(crate) fn reachable_from(start: usize, n: usize, adj: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count
}

/// Combinatorial Laplacian `L = D - W` of an undirected weighted graph.
///
/// Invariants enforced at construction: square, exactly symmetric, and
/// every row sums to zero within `1e-12` times the largest entry
/// magnitude. Positive semidefiniteness is checked spectrally in
/// [`crate::spectrum::eigendecompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
}

impl Laplacian {
    /// Validates and wraps a candidate Laplacian matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "Laplacian must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "Laplacian not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let max_abs = matrix.amax();
        let row_sum_tol = 1e-12 * max_abs;
        for i in 0..n {
            let s: f64 = matrix.row(i).iter().sum();
            if s.abs() > row_sum_tol {
                return Err(Error::InvalidArgument(format!(
                    "Laplacian row {i} sums to {s:.3e}, beyond {row_sum_tol:.3e}"
                )));
            }
        }
        Ok(Laplacian { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of vertices.
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Builds the Laplacian `L = D - W` of `graph`.
///
/// The diagonal entry of a vertex is the sum of its incident weights,
/// accumulated in edge-list order, so symmetry is exact and row sums
/// vanish to machine precision.
pub fn build_laplacian(graph: &Graph) -> Laplacian {
    let n = graph.vertex_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(i, j, w) in graph.edges() {
        m[(i, j)] = -w;
        m[(j, i)] = -w;
        m[(i, i)] += w;
        m[(j, j)] += w;
    }
    Laplacian::new(m).expect("construction preserves Laplacian invariants")
}

/// Serialized graph: `{"n": N, "edges": [[i, j, w], ...]}` with 1-based
/// vertex indices.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// Parses a graph from its JSON text form. Indices in the file are 1-based.
pub fn graph_from_json(text: &str) -> Result<Graph> {
    let file: GraphFile = serde_json::from_str(text)?;
    let mut edges = Vec::with_capacity(file.edges.len());
    for (i, j, w) in file.edges {
        if i == 0 || j == 0 {
            return Err(Error::InvalidGraph(
                "vertex index 0 in file; indices are 1-based".into(),
            ));
        }
        edges.push((i - 1, j - 1, w));
    }
    Graph::new(file.n, edges)
}

/// Serializes a graph to JSON text, converting indices to 1-based.
pub fn graph_to_json(graph: &Graph) -> String {
    let file = GraphFile {
        n: graph.vertex_count(),
        edges: graph
            .edges()
            .iter()
            .map(|&(i, j, w)| (i + 1, j + 1, w))
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    graph_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_graph(graph: &Graph, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, graph_to_json(graph))?)
}
