//! Weighted, possibly signed interaction graphs and their matrix forms.
//!
//! Layers of a composite network are plain weighted graphs; negative edge
//! weights model antagonistic ties. The degree of a node is the *algebraic*
//! sum of its incident weights, so the Laplacian `ℒ = 𝒟 − 𝒜` keeps zero row
//! sums for signed graphs too. The graph Cartesian product uses row-major
//! flat indexing `(v₁, v₂) ↦ v₁·n₂ + v₂`, which makes the product adjacency
//! literally equal the Kronecker sum of the factor adjacencies.

use nalgebra::DMatrix;
use thiserror::Error;

/// Errors from graph construction or parsing.
#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("node index {index} out of range for {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },
    #[error("self-loop at node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("edge ({tail}, {head}) has invalid weight {weight} (must be finite and nonzero)")]
    BadWeight { tail: usize, head: usize, weight: f64 },
    #[error("edge ({tail}, {head}) appears more than once")]
    DuplicateEdge { tail: usize, head: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One directed edge with its weight. Undirected graphs store both
/// orientations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

/// A weighted graph with signed edges permitted.
///
/// Invariants enforced at construction: node indices in range, no self-loops,
/// finite nonzero weights, no repeated edges, and (for undirected graphs) an
/// edge set closed under orientation reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<Edge>,
    undirected: bool,
}

/// Dense matrix representations of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    /// `adjacency[(i, j)] = w_ij` for each stored edge `(i, j, w)`, else 0.
    pub adjacency: DMatrix<f64>,
    /// Diagonal of algebraic row sums of the adjacency.
    pub degree: DMatrix<f64>,
    /// `degree − adjacency`; rows sum to zero.
    pub laplacian: DMatrix<f64>,
}

impl Graph {
    /// Build an undirected graph from one entry per edge; the reverse
    /// orientation is added automatically.
    pub fn undirected(
        node_count: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, GraphError> {
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(tail, head, weight) in edges {
            directed.push((tail, head, weight));
            directed.push((head, tail, weight));
        }
        let mut g = Self::directed(node_count, &directed)?;
        g.undirected = true;
        Ok(g)
    }

    /// Build a graph from explicitly oriented edges.
    pub fn directed(
        node_count: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for &(tail, head, weight) in edges {
            for index in [tail, head] {
                if index >= node_count {
                    return Err(GraphError::NodeOutOfRange { index, node_count });
                }
            }
            if tail == head {
                return Err(GraphError::SelfLoop { node: tail });
            }
            if !weight.is_finite() || weight == 0.0 {
                return Err(GraphError::BadWeight { tail, head, weight });
            }
            if !seen.insert((tail, head)) {
                return Err(GraphError::DuplicateEdge { tail, head });
            }
            out.push(Edge { tail, head, weight });
        }
        Ok(Graph {
            node_count,
            edges: out,
            undirected: false,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// Parse the plain-text edge-list format:
    ///
    /// ```text
    /// nodes N undirected {true|false}
    /// # comment
    /// tail head weight
    /// ```
    ///
    /// Undirected files list each edge once. Errors carry 1-based line
    /// numbers.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            message: "missing header line `nodes N undirected {true|false}`".into(),
        })?;
        let parse_err = |line: usize, message: &str| GraphError::Parse {
            line,
            message: message.into(),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "nodes" || fields[2] != "undirected" {
            return Err(parse_err(
                header_line,
                "header must be `nodes N undirected {true|false}`",
            ));
        }
        let node_count: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(header_line, "node count must be a nonnegative integer"))?;
        let undirected: bool = fields[3]
            .parse()
            .map_err(|_| parse_err(header_line, "undirected flag must be `true` or `false`"))?;

        let mut edges = Vec::new();
        for (line, text) in lines {
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(line, "edge lines are `tail head weight`"));
            }
            let tail: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(line, "tail must be a node index"))?;
            let head: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(line, "head must be a node index"))?;
            let weight: f64 = fields[2]
                .parse()
                .map_err(|_| parse_err(line, "weight must be a real number"))?;
            edges.push((tail, head, weight));
        }
        if undirected {
            Self::undirected(node_count, &edges)
        } else {
            Self::directed(node_count, &edges)
        }
    }
}

/// Build the adjacency, degree, and Laplacian matrices of a graph.
pub fn matrices_of(g: &Graph) -> GraphMatrices {
    let n = g.node_count();
    let mut adjacency = DMatrix::zeros(n, n);
    for e in g.edges() {
        adjacency[(e.tail, e.head)] = e.weight;
    }
    let mut degree = DMatrix::zeros(n, n);
    for i in 0..n {
        degree[(i, i)] = adjacency.row(i).sum();
    }
    let laplacian = &degree - &adjacency;
    GraphMatrices {
        adjacency,
        degree,
        laplacian,
    }
}

/// Graph Cartesian product with row-major flat indexing
/// `(v₁, v₂) ↦ v₁·n₂ + v₂`.
///
/// `((v₁, v₂), (u₁, u₂))` is an edge iff exactly one coordinate moves along
/// an edge of its factor; the product edge carries that factor edge's weight.
/// With this indexing, `adjacency(g₁ □ g₂) = A₁ ⊕ A₂` holds entrywise.
pub fn cartesian_product(g1: &Graph, g2: &Graph) -> Graph {
    let (n1, n2) = (g1.node_count(), g2.node_count());
    let mut edges = Vec::with_capacity(g1.edges().len() * n2 + g2.edges().len() * n1);
    for e in g1.edges() {
        for v2 in 0..n2 {
            edges.push(Edge {
                tail: e.tail * n2 + v2,
                head: e.head * n2 + v2,
                weight: e.weight,
            });
        }
    }
    for v1 in 0..n1 {
        for e in g2.edges() {
            edges.push(Edge {
                tail: v1 * n2 + e.tail,
                head: v1 * n2 + e.head,
                weight: e.weight,
            });
        }
    }
    // Factor invariants transfer: indices stay in range, coordinates that
    // move exclude self-loops, weights are inherited, and closure under
    // reversal survives coordinate lifting.
    Graph {
        node_count: n1 * n2,
        edges,
        undirected: g1.is_undirected() && g2.is_undirected(),
    }
}
