//! Communication topologies and the constraint operators built on them.
//!
//! Every edge is stored once with canonical orientation `lower -> higher`.
//! The incidence row of edge `(i, j)` carries `+1` at column `i` and `-1` at
//! column `j`, so `MᵀM` is the standard graph Laplacian `D - Adj`.
//!
//! [`ConstraintOps`] applies the stacked operators
//!
//! ```text
//! A = [ M ⊗ I_p ]      B = [    0    ]
//!     [  I_np   ]          [ -I_np   ]
//! ```
//!
//! either through neighbor sums (the default) or through explicit dense
//! matrices, which only exist for verification and spectral checks.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on `n * p` for materializing dense operators.
pub const DENSE_LIMIT: usize = 4096;

/// Sampling attempts for `random_connected` before giving up.
pub const MAX_RANDOM_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("graph is not connected after {attempts} attempt(s)")]
    NotConnected { attempts: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense operators need n*p <= {limit}, got {size}")]
    DenseRequired { size: usize, limit: usize },
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Topology family accepted by [`build_topology`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    Star,
    Path,
    /// `hubs` fully connected hub nodes; leaves attach round-robin to one hub each.
    HubLeaf {
        hubs: usize,
    },
    /// Erdős–Rényi `G(n, prob)`, resampled until connected.
    RandomConnected {
        prob: f64,
    },
    FromEdgeList(Vec<(usize, usize)>),
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Ring => "ring",
            Topology::Star => "star",
            Topology::Path => "path",
            Topology::HubLeaf { .. } => "hub_leaf",
            Topology::RandomConnected { .. } => "random_connected",
            Topology::FromEdgeList(_) => "from_edge_list",
        }
    }
}

/// One edge as seen from an endpoint: `sign` is `+1` at the tail (lower index)
/// and `-1` at the head.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidentEdge {
    pub edge: usize,
    pub neighbor: usize,
    pub sign: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<IncidentEdge>>,
}

impl Graph {
    /// Validate and build a graph from an edge list. Pairs are reoriented to
    /// `lower -> higher`; the given edge order is kept.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::InvalidParam("graph needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            canon.push(e);
        }
        let mut incident = vec![Vec::new(); n];
        for (k, &(i, j)) in canon.iter().enumerate() {
            incident[i].push(IncidentEdge { edge: k, neighbor: j, sign: 1.0 });
            incident[j].push(IncidentEdge { edge: k, neighbor: i, sign: -1.0 });
        }
        for list in &mut incident {
            list.sort_by_key(|e| e.neighbor);
        }
        let g = Graph { n, edges: canon, incident };
        if !g.is_connected() {
            return Err(GraphError::NotConnected { attempts: 1 });
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.incident[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incident.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Incident edges of `i`, sorted by neighbor index.
    pub fn incident(&self, i: usize) -> &[IncidentEdge] {
        &self.incident[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[i].iter().map(|e| e.neighbor)
    }

    fn is_connected(&self) -> bool {
        let mut visited = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for e in &self.incident[u] {
                if !visited[e.neighbor] {
                    visited[e.neighbor] = true;
                    count += 1;
                    queue.push_back(e.neighbor);
                }
            }
        }
        count == self.n
    }

    /// Signed incidence matrix `M` (m × n).
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.edges.len(), self.n);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            m[(k, i)] = 1.0;
            m[(k, j)] = -1.0;
        }
        m
    }

    /// Laplacian `D - Adj` assembled from degrees and adjacency directly.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// Ascending Laplacian eigenvalues.
    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        sorted_eigenvalues(self.laplacian())
    }

    /// Parse the `i j` per-line edge list format (0-based, `#` comments).
    /// The node count is one past the largest index seen unless `n` is given.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    msg: format!("expected two node indices, found {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| GraphError::Parse { line: lineno + 1, msg: format!("{s:?}: {e}") })
            };
            edges.push((parse(fields[0])?, parse(fields[1])?));
        }
        let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1);
        Graph::new(n.unwrap_or(inferred), &edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Graph::parse_edge_list(&text, None)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(i, j)| format!("{i} {j}\n")).collect()
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, m={}, d_max={})", self.n, self.edges.len(), self.max_degree())
    }
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Build a topology. Pure in `(kind, n, seed)`; only `RandomConnected` uses the seed.
pub fn build_topology(kind: &Topology, n: usize, seed: u64) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParam(format!("need n >= 2, got {n}")));
    }
    match kind {
        Topology::Ring => {
            // n = 2 collapses to a single edge
            let edges: Vec<_> = if n == 2 { vec![(0, 1)] } else { (0..n).map(|i| (i, (i + 1) % n)).collect() };
            Graph::new(n, &edges)
        }
        Topology::Star => {
            let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
            Graph::new(n, &edges)
        }
        Topology::Path => {
            let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
            Graph::new(n, &edges)
        }
        Topology::HubLeaf { hubs } => {
            let hubs = *hubs;
            if hubs == 0 || hubs >= n {
                return Err(GraphError::InvalidParam(format!("hub_leaf needs 1 <= hubs < n, got hubs={hubs}, n={n}")));
            }
            let mut edges = Vec::new();
            for a in 0..hubs {
                for b in a + 1..hubs {
                    edges.push((a, b));
                }
            }
            for leaf in hubs..n {
                edges.push(((leaf - hubs) % hubs, leaf));
            }
            Graph::new(n, &edges)
        }
        Topology::RandomConnected { prob } => {
            let prob = *prob;
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(GraphError::InvalidParam(format!("edge probability must lie in (0, 1], got {prob}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..MAX_RANDOM_ATTEMPTS {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < prob {
                            edges.push((i, j));
                        }
                    }
                }
                match Graph::new(n, &edges) {
                    Ok(g) => return Ok(g),
                    Err(GraphError::NotConnected { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(GraphError::NotConnected { attempts: MAX_RANDOM_ATTEMPTS })
        }
        Topology::FromEdgeList(edges) => Graph::new(n, edges),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpsMode {
    Implicit,
    Dense,
}

/// The constraint operators `A`, `B` for per-node dimension `p`.
#[derive(Clone, Debug)]
pub struct ConstraintOps<'g> {
    graph: &'g Graph,
    dim: usize,
    dense: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl<'g> ConstraintOps<'g> {
    pub fn implicit(graph: &'g Graph, dim: usize) -> Self {
        ConstraintOps { graph, dim, dense: None }
    }

    /// Materialize `A` and `B`; refused when `n * p` exceeds [`DENSE_LIMIT`].
    pub fn dense(graph: &'g Graph, dim: usize) -> Result<Self, GraphError> {
        let mut ops = ConstraintOps::implicit(graph, dim);
        ops.dense = Some((ops.dense_a()?, ops.dense_b()?));
        Ok(ops)
    }

    pub fn mode(&self) -> OpsMode {
        if self.dense.is_some() {
            OpsMode::Dense
        } else {
            OpsMode::Implicit
        }
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of a primal stacked vector, `n p`.
    pub fn cols(&self) -> usize {
        self.graph.n * self.dim
    }

    /// Length of a constraint-space vector, `(m + n) p`.
    pub fn rows(&self) -> usize {
        (self.graph.edges.len() + self.graph.n) * self.dim
    }

    fn check_len(expected: usize, got: usize) -> Result<(), GraphError> {
        if expected != got {
            return Err(GraphError::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    fn guard(&self) -> Result<(), GraphError> {
        let size = self.cols();
        if size > DENSE_LIMIT {
            return Err(GraphError::DenseRequired { size, limit: DENSE_LIMIT });
        }
        Ok(())
    }

    /// `A x`: per-edge differences `x_i - x_j` on top, then `x` itself.
    pub fn apply_a(&self, x: &[f64]) -> Result<Vec<f64>, GraphError> {
        Self::check_len(self.cols(), x.len())?;
        if let Some((a, _)) = &self.dense {
            return Ok(dense_mul(a, x));
        }
        let p = self.dim;
        let mut out = Vec::with_capacity(self.rows());
        for &(i, j) in &self.graph.edges {
            out.extend((0..p).map(|c| x[i * p + c] - x[j * p + c]));
        }
        out.extend_from_slice(x);
        Ok(out)
    }

    /// `Aᵀ u` for `u = [α; β]`: node `i` collects `Σ_e M_{e,i} α_e + β_i`.
    pub fn apply_at(&self, u: &[f64]) -> Result<Vec<f64>, GraphError> {
        Self::check_len(self.rows(), u.len())?;
        if let Some((a, _)) = &self.dense {
            return Ok(dense_mul_t(a, u));
        }
        let p = self.dim;
        let m = self.graph.edges.len();
        let mut out = u[m * p..].to_vec();
        for (k, &(i, j)) in self.graph.edges.iter().enumerate() {
            for c in 0..p {
                out[i * p + c] += u[k * p + c];
                out[j * p + c] -= u[k * p + c];
            }
        }
        Ok(out)
    }

    /// `AᵀA x = (L ⊗ I_p) x + x`, evaluated as neighbor sums.
    pub fn apply_ata(&self, x: &[f64]) -> Result<Vec<f64>, GraphError> {
        Self::check_len(self.cols(), x.len())?;
        if let Some((a, _)) = &self.dense {
            return Ok(dense_mul_t(a, &dense_mul(a, x)));
        }
        let p = self.dim;
        let mut out = x.to_vec();
        for i in 0..self.graph.n {
            for e in &self.graph.incident[i] {
                let j = e.neighbor;
                for c in 0..p {
                    out[i * p + c] += x[i * p + c] - x[j * p + c];
                }
            }
        }
        Ok(out)
    }

    /// `B y = [0; -y]`.
    pub fn apply_b(&self, y: &[f64]) -> Result<Vec<f64>, GraphError> {
        Self::check_len(self.cols(), y.len())?;
        if let Some((_, b)) = &self.dense {
            return Ok(dense_mul(b, y));
        }
        let mut out = vec![0.0; self.graph.edges.len() * self.dim];
        out.extend(y.iter().map(|v| -v));
        Ok(out)
    }

    /// `Bᵀ u = -β`.
    pub fn apply_bt(&self, u: &[f64]) -> Result<Vec<f64>, GraphError> {
        Self::check_len(self.rows(), u.len())?;
        if let Some((_, b)) = &self.dense {
            return Ok(dense_mul_t(b, u));
        }
        let off = self.graph.edges.len() * self.dim;
        Ok(u[off..].iter().map(|v| -v).collect())
    }

    /// Explicit `A = [M ⊗ I_p; I_np]`.
    pub fn dense_a(&self) -> Result<DMatrix<f64>, GraphError> {
        self.guard()?;
        let p = self.dim;
        let m = self.graph.incidence_matrix();
        let mut a = DMatrix::zeros(self.rows(), self.cols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    for d in 0..p {
                        a[(r * p + d, c * p + d)] = m[(r, c)];
                    }
                }
            }
        }
        let off = m.nrows() * p;
        for d in 0..self.cols() {
            a[(off + d, d)] = 1.0;
        }
        Ok(a)
    }

    /// Explicit `B = [0; -I_np]`.
    pub fn dense_b(&self) -> Result<DMatrix<f64>, GraphError> {
        self.guard()?;
        let off = self.graph.edges.len() * self.dim;
        let mut b = DMatrix::zeros(self.rows(), self.cols());
        for d in 0..self.cols() {
            b[(off + d, d)] = -1.0;
        }
        Ok(b)
    }

    /// Ascending eigenvalues of `AᵀA`, formed from the explicit dense `A`.
    pub fn ata_spectrum(&self) -> Result<Vec<f64>, GraphError> {
        let a = match &self.dense {
            Some((a, _)) => a.clone(),
            None => self.dense_a()?,
        };
        Ok(sorted_eigenvalues(a.transpose() * a))
    }

    /// `λ_min(AᵀA) = σ_min(A)²`, which equals one on every connected graph.
    pub fn smallest_singular_sq_a(&self) -> Result<f64, GraphError> {
        Ok(self.ata_spectrum()?[0])
    }

    pub fn largest_eigen_ata(&self) -> Result<f64, GraphError> {
        Ok(*self.ata_spectrum()?.last().expect("non-empty spectrum"))
    }
}

fn dense_mul(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
}

fn dense_mul_t(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (m.tr_mul(&nalgebra::DVector::from_column_slice(u))).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig, Strategy};

    #[test]
    fn ring_and_star_degrees() {
        let ring = build_topology(&Topology::Ring, 8, 0).unwrap();
        assert_eq!(ring.edge_count(), 8);
        assert!(ring.degrees().iter().all(|&d| d == 2));

        let star = build_topology(&Topology::Star, 8, 0).unwrap();
        assert_eq!(star.edge_count(), 7);
        assert_eq!(star.degree(0), 7);
        assert!((1..8).all(|i| star.degree(i) == 1));
    }

    #[test]
    fn random_connected_is_deterministic() {
        let kind = Topology::RandomConnected { prob: 0.3 };
        let g1 = build_topology(&kind, 8, 7).unwrap();
        let g2 = build_topology(&kind, 8, 7).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert!(g1.is_connected());
    }

    #[test]
    fn hub_leaf_layout() {
        let g = build_topology(&Topology::HubLeaf { hubs: 1 }, 16, 0).unwrap();
        assert_eq!(g.degree(0), 15);
        let g = build_topology(&Topology::HubLeaf { hubs: 2 }, 10, 0).unwrap();
        // hub clique edge plus 8 leaves
        assert_eq!(g.edge_count(), 9);
        assert_eq!(g.degree(0), 5);
        assert_eq!(g.degree(1), 5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(build_topology(&Topology::Ring, 1, 0), Err(GraphError::InvalidParam(_))));
        assert!(matches!(
            build_topology(&Topology::RandomConnected { prob: 0.0 }, 5, 0),
            Err(GraphError::InvalidParam(_))
        ));
        assert!(matches!(Graph::new(3, &[(0, 0)]), Err(GraphError::SelfLoop(0))));
        assert!(matches!(Graph::new(3, &[(0, 1), (1, 0), (1, 2)]), Err(GraphError::DuplicateEdge(0, 1))));
        assert!(matches!(Graph::new(4, &[(0, 1), (2, 3)]), Err(GraphError::NotConnected { .. })));
        assert!(matches!(Graph::new(2, &[(0, 5)]), Err(GraphError::NodeOutOfRange { .. })));
    }

    #[test]
    fn sparse_random_graph_gives_up() {
        let kind = Topology::RandomConnected { prob: 1e-6 };
        assert!(matches!(
            build_topology(&kind, 12, 3),
            Err(GraphError::NotConnected { attempts: MAX_RANDOM_ATTEMPTS })
        ));
    }

    #[test]
    fn triangle_incidence_by_hand() {
        let g = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let m = g.incidence_matrix();
        let expected = DMatrix::from_row_slice(3, 3, &[1., -1., 0., 0., 1., -1., 1., 0., -1.]);
        assert_eq!(m, expected);
        let lap = DMatrix::from_row_slice(3, 3, &[2., -1., -1., -1., 2., -1., -1., -1., 2.]);
        assert_eq!(m.transpose() * &m, lap);
        assert_eq!(g.laplacian(), lap);
    }

    #[test]
    fn path_pair_incidence_and_apply() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        assert_eq!(g.incidence_matrix(), DMatrix::from_row_slice(1, 2, &[1., -1.]));
        let ops = ConstraintOps::implicit(&g, 1);
        assert_eq!(ops.apply_a(&[3.0, 1.0]).unwrap(), vec![2.0, 3.0, 1.0]);
        let spec = ops.ata_spectrum().unwrap();
        assert_abs_diff_eq!(spec[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn consensus_kills_edge_block() {
        let g = build_topology(&Topology::Star, 5, 0).unwrap();
        let ops = ConstraintOps::implicit(&g, 2);
        let x: Vec<f64> = (0..5).flat_map(|_| [0.7, -1.3]).collect();
        let ax = ops.apply_a(&x).unwrap();
        assert!(ax[..g.edge_count() * 2].iter().all(|&v| v == 0.0));
        assert_eq!(&ax[g.edge_count() * 2..], &x[..]);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let g = build_topology(&Topology::Ring, 4, 0).unwrap();
        let ops = ConstraintOps::implicit(&g, 2);
        assert!(matches!(ops.apply_a(&[1.0; 7]), Err(GraphError::DimensionMismatch { expected: 8, got: 7 })));
    }

    #[test]
    fn dense_guard() {
        let g = build_topology(&Topology::Ring, 100, 0).unwrap();
        assert!(matches!(ConstraintOps::dense(&g, 50), Err(GraphError::DenseRequired { .. })));
    }

    #[test]
    fn spectral_identity_on_named_graphs() {
        for kind in [Topology::Ring, Topology::Star] {
            let g = build_topology(&kind, 8, 0).unwrap();
            let ops = ConstraintOps::implicit(&g, 1);
            assert_abs_diff_eq!(ops.smallest_singular_sq_a().unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn edge_list_roundtrip_and_errors() {
        let g = build_topology(&Topology::RandomConnected { prob: 0.5 }, 7, 11).unwrap();
        let parsed = Graph::parse_edge_list(&g.to_edge_list(), None).unwrap();
        assert_eq!(parsed, g);
        assert!(matches!(Graph::parse_edge_list("0 1\n1 x\n", None), Err(GraphError::Parse { line: 2, .. })));
        assert!(matches!(Graph::parse_edge_list("0 1 2\n", None), Err(GraphError::Parse { line: 1, .. })));
        assert!(Graph::parse_edge_list("# comment\n0 1\n\n1 2 # tail\n", None).is_ok());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..=20, 0u64..1000, 0usize..4).prop_map(|(n, seed, kind)| {
            let kind = match kind {
                0 => Topology::Ring,
                1 => Topology::Star,
                2 => Topology::HubLeaf { hubs: 1 + (seed as usize % (n - 1)) },
                _ => Topology::RandomConnected { prob: 0.4 },
            };
            build_topology(&kind, n, seed).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn graph_invariants(g in arb_graph()) {
            let degree_sum: usize = g.degrees().iter().sum();
            prop_assert_eq!(degree_sum, 2 * g.edge_count());
            let lap = g.incidence_matrix().transpose() * g.incidence_matrix();
            for i in 0..g.node_count() {
                prop_assert_eq!(lap[(i, i)], g.degree(i) as f64);
                let row_sum: f64 = lap.row(i).iter().sum();
                prop_assert_eq!(row_sum, 0.0);
            }
            prop_assert!(g.edges().iter().all(|&(i, j)| i < j));
        }

        #[test]
        fn implicit_matches_dense(g in arb_graph(), p in 1usize..4, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let implicit = ConstraintOps::implicit(&g, p);
            let dense = ConstraintOps::dense(&g, p).unwrap();
            let x: Vec<f64> = (0..implicit.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..implicit.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pairs = [
                (implicit.apply_a(&x).unwrap(), dense.apply_a(&x).unwrap()),
                (implicit.apply_at(&u).unwrap(), dense.apply_at(&u).unwrap()),
                (implicit.apply_ata(&x).unwrap(), dense.apply_ata(&x).unwrap()),
                (implicit.apply_b(&x).unwrap(), dense.apply_b(&x).unwrap()),
                (implicit.apply_bt(&u).unwrap(), dense.apply_bt(&u).unwrap()),
            ];
            for (a, b) in pairs {
                let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
                for (p, q) in a.iter().zip(&b) {
                    prop_assert!((p - q).abs() <= 1e-12 * scale);
                }
            }
            // AᵀA against the Kronecker form L ⊗ I_p + I
            let lap = g.laplacian();
            let ata = implicit.apply_ata(&x).unwrap();
            for i in 0..g.node_count() {
                for c in 0..p {
                    let mut expect = x[i * p + c];
                    for j in 0..g.node_count() {
                        expect += lap[(i, j)] * x[j * p + c];
                    }
                    prop_assert!((ata[i * p + c] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
                }
            }
        }

        #[test]
        fn smallest_singular_value_is_one(g in arb_graph()) {
            let ops = ConstraintOps::implicit(&g, 1);
            let s = ops.smallest_singular_sq_a().unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn build_is_pure(n in 2usize..15, seed in 0u64..500) {
            let kind = Topology::RandomConnected { prob: 0.5 };
            prop_assert_eq!(build_topology(&kind, n, seed).unwrap(), build_topology(&kind, n, seed).unwrap());
        }
    }
}
