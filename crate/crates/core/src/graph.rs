//! Undirected topologies, Laplacians and the expected Laplacian induced by
//! Bernoulli packet drops.
//!
//! Nodes are 0-indexed everywhere in the API. The text formats read by
//! [`Graph::parse`] and [`DropModel::parse`] use 1-indexed labels and are
//! translated at the boundary.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;

use crate::eigen::{symmetric_eigen, SymmetricEigen};
use crate::error::{Error, Result};

/// Tolerance on row sums and symmetry of Laplacian-like matrices.
pub const LAPLACIAN_TOL: f64 = 1e-12;

/// Unordered node pair stored as `(min, max)`.
pub type Edge = (usize, usize);

fn canonical(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Simple undirected graph with a sorted, duplicate-free edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if node_count == 0 {
            return Err(Error::Graph("a graph needs at least one node".into()));
        }
        let mut list = Vec::new();
        for (i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::Graph(format!(
                    "edge ({}, {}) references a node outside 1..={}",
                    i + 1,
                    j + 1,
                    node_count
                )));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop on node {}", i + 1)));
            }
            list.push(canonical(i, j));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Graph(format!(
                "duplicate edge ({}, {})",
                w[0].0 + 1,
                w[0].1 + 1
            )));
        }
        Ok(Self {
            node_count,
            edges: list,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&canonical(i, j)).is_ok()
    }

    /// Position of `{i, j}` in [`Graph::edges`].
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&canonical(i, j)).ok()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.node_count, self.node_count);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.node_count];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.node_count {
            return Err(Error::Usage("permutation length differs from node count".into()));
        }
        Self::new(
            self.node_count,
            self.edges.iter().map(|&(i, j)| (perm[i], perm[j])),
        )
    }

    /// Reads the graph text format: the first non-comment line holds `N`,
    /// each further line one `i j` pair with 1-indexed labels. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = significant_lines(text);
        let (line_no, first) = lines
            .next()
            .ok_or_else(|| Error::Graph("empty graph file".into()))?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line: line_no,
            field: "N".into(),
            message: format!("expected a node count, found `{first}`"),
        })?;
        let mut edges = Vec::new();
        for (line_no, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: line_no,
                    field: "edge".into(),
                    message: format!("expected `i j`, found `{line}`"),
                });
            }
            let i = parse_label(fields[0], line_no, n)?;
            let j = parse_label(fields[1], line_no, n)?;
            edges.push((i, j));
        }
        Self::new(n, edges)
    }

    /// Inverse of [`Graph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.node_count);
        for &(i, j) in &self.edges {
            out.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        out
    }
}

fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((idx + 1, line))
    })
}

fn parse_label(s: &str, line: usize, n: usize) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 && v <= n => Ok(v - 1),
        _ => Err(Error::Parse {
            line,
            field: "node".into(),
            message: format!("expected a node label in 1..={n}, found `{s}`"),
        }),
    }
}

/// Per-edge packet-drop probabilities `p_ij` in `[0, 1)`, keyed on unordered
/// pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DropModel {
    probabilities: BTreeMap<Edge, f64>,
}

impl DropModel {
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), f64)>,
    {
        let mut probabilities = BTreeMap::new();
        for ((i, j), p) in entries {
            check_probability(p, i, j)?;
            if probabilities.insert(canonical(i, j), p).is_some() {
                return Err(Error::Config(format!(
                    "drop probability for edge ({}, {}) given twice",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(Self { probabilities })
    }

    /// The same probability on every edge of `graph`.
    pub fn uniform(graph: &Graph, p: f64) -> Result<Self> {
        Self::new(graph.edges().iter().map(|&e| (e, p)))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.probabilities.get(&canonical(i, j)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.probabilities.iter().map(|(&e, &p)| (e, p))
    }

    /// Probabilities in the order of `graph.edges()`; fails when an edge is
    /// missing or an entry names a non-edge.
    pub fn aligned(&self, graph: &Graph) -> Result<Vec<f64>> {
        if let Some((&(i, j), _)) = self
            .probabilities
            .iter()
            .find(|(&(i, j), _)| !graph.has_edge(i, j))
        {
            return Err(Error::Config(format!(
                "drop probability given for ({}, {}), which is not an edge",
                i + 1,
                j + 1
            )));
        }
        graph
            .edges()
            .iter()
            .map(|&(i, j)| {
                self.get(i, j).ok_or_else(|| {
                    Error::Config(format!(
                        "missing drop probability for edge ({}, {})",
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect()
    }

    /// Reads `i j p` triples (1-indexed labels), one per line.
    pub fn parse(text: &str, node_count: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in significant_lines(text) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    field: "drop".into(),
                    message: format!("expected `i j p`, found `{line}`"),
                });
            }
            let i = parse_label(fields[0], line_no, node_count)?;
            let j = parse_label(fields[1], line_no, node_count)?;
            let p: f64 = fields[2].parse().map_err(|_| Error::Parse {
                line: line_no,
                field: "p".into(),
                message: format!("expected a probability, found `{}`", fields[2]),
            })?;
            entries.push(((i, j), p));
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .map(|((i, j), p)| format!("{} {} {}\n", i + 1, j + 1, p))
            .collect()
    }
}

fn check_probability(p: f64, i: usize, j: usize) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "drop probability for edge ({}, {}) must lie in [0, 1), got {p}",
            i + 1,
            j + 1
        )))
    }
}

/// Symmetric matrix with zero row sums, non-positive off-diagonal and
/// non-negative diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacian(DMatrix<f64>);

impl WeightedLaplacian {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Contract("Laplacian must be square".into()));
        }
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = m[(i, j)];
                if (v - m[(j, i)]).abs() > LAPLACIAN_TOL * scale {
                    return Err(Error::Contract(format!("not symmetric at ({i}, {j})")));
                }
                if i != j && v > 0.0 {
                    return Err(Error::Contract(format!("positive off-diagonal at ({i}, {j})")));
                }
                row += v;
            }
            if m[(i, i)] < 0.0 {
                return Err(Error::Contract(format!("negative diagonal at {i}")));
            }
            if row.abs() > LAPLACIAN_TOL * scale {
                return Err(Error::Contract(format!("row {i} sums to {row}")));
            }
        }
        Ok(Self(m))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest diagonal entry: the (expected) maximum degree.
    pub fn max_degree(&self) -> f64 {
        self.0.diagonal().iter().copied().fold(0.0, f64::max)
    }

    pub fn eigen(&self, with_vectors: bool) -> Result<SymmetricEigen> {
        symmetric_eigen(&self.0, with_vectors)
    }

    /// Structural connectivity of the weighted graph (non-zero off-diagonals).
    pub fn is_connected(&self) -> bool {
        let n = self.size();
        let adjacent = |i: usize, j: usize| i != j && self.0[(i, j)] != 0.0;
        reachable_count(n, |i| (0..n).filter(move |&j| adjacent(i, j))) == n
    }
}

/// `L = D - A`.
pub fn laplacian(g: &Graph) -> WeightedLaplacian {
    let n = g.node_count();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    WeightedLaplacian(l)
}

/// Laplacian with edge `e` carrying `weights[e]` (edge order of `g`).
pub(crate) fn weighted_laplacian(g: &Graph, weights: &[f64]) -> WeightedLaplacian {
    let n = g.node_count();
    let mut l = DMatrix::zeros(n, n);
    for (&(i, j), &w) in g.edges().iter().zip(weights) {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    WeightedLaplacian(l)
}

/// `E[L~]`: off-diagonal `-(1 - p_ij) a_ij`, diagonal `sum_q (1 - p_iq) a_iq`.
pub fn expected_laplacian(g: &Graph, d: &DropModel) -> Result<WeightedLaplacian> {
    let weights: Vec<f64> = d.aligned(g)?.into_iter().map(|p| 1.0 - p).collect();
    Ok(weighted_laplacian(g, &weights))
}

/// Breadth-first reachability from node 0.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.node_count();
    let mut neighbours = vec![Vec::new(); n];
    for &(i, j) in g.edges() {
        neighbours[i].push(j);
        neighbours[j].push(i);
    }
    reachable_count(n, |i| neighbours[i].iter().copied()) == n
}

fn reachable_count<F, I>(n: usize, neighbours: F) -> usize
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    if n == 0 {
        return 0;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in neighbours(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count
}
