//! Unrooted binary phylogenies, their tree metrics, and tree comparison.
//!
//! Leaves are always vertices `0..n`; internal vertices are `n..2n-2`.
//! Every internal vertex has degree exactly three and every edge weight is
//! strictly positive.

mod compare;
mod generate;
mod newick;
mod quartet;

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::matrix::SymMatrix;

pub use compare::robinson_foulds;
pub use generate::{generate_caterpillar, generate_complete_binary, generate_random_regular};
pub use quartet::{four_point_margin, four_point_topology, QuartetSplit};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("newick syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("non-binary vertex at position {position}: {children} children")]
    NonBinary { position: usize, children: usize },
    #[error("invalid branch length at position {position}: {message}")]
    BranchLength { position: usize, message: String },
    #[error("a phylogeny needs at least 3 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("invalid leaf label {0:?}")]
    InvalidLabel(String),
    #[error("duplicate leaf label {0:?}")]
    DuplicateLabel(String),
    #[error("invalid tree structure: {0}")]
    Structure(String),
    #[error("edge {edge} has non-positive or non-finite weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },
    #[error("invalid regularity parameters: need 0 < f <= g < M, got f={f}, g={g}, M={big_m}")]
    InvalidParams { f: f64, g: f64, big_m: f64 },
    #[error("invalid generator argument: {0}")]
    Generator(String),
    #[error("leaf sets differ")]
    LeafMismatch,
    #[error("four-point test needs finite distances, got {0}")]
    NonFiniteDistance(f64),
    #[error("leaf {0} appears more than once")]
    RepeatedLeaf(usize),
    #[error("leaf index {0} out of range")]
    LeafOutOfRange(usize),
}

pub type Result<T> = std::result::Result<T, TreeError>;

/// Characters that cannot appear in a leaf label.
pub(crate) const NEWICK_META: &[char] = &['(', ')', ',', ':', ';', '[', ']', '\'', '"'];

fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.chars().any(|c| c.is_whitespace() || NEWICK_META.contains(&c)) {
        return Err(TreeError::InvalidLabel(label.to_string()));
    }
    Ok(())
}

/// The weight-free shape of a phylogeny: an unrooted binary tree with
/// labelled leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    /// Validates and builds a topology. Vertices `0..labels.len()` are the
    /// leaves; the remaining `n - 2` vertices are internal.
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = labels.len();
        if n < 3 {
            return Err(TreeError::TooFewLeaves(n));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            validate_label(l)?;
            if !seen.insert(l.as_str()) {
                return Err(TreeError::DuplicateLabel(l.clone()));
            }
        }
        let num_vertices = 2 * n - 2;
        if edges.len() != num_vertices - 1 {
            return Err(TreeError::Structure(format!(
                "expected {} edges for {} leaves, got {}",
                num_vertices - 1,
                n,
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); num_vertices];
        for (id, &(u, v)) in edges.iter().enumerate() {
            if u >= num_vertices || v >= num_vertices || u == v {
                return Err(TreeError::Structure(format!("bad edge ({u}, {v})")));
            }
            adj[u].push((v, id));
            adj[v].push((u, id));
        }
        for (v, nbrs) in adj.iter().enumerate() {
            let want = if v < n { 1 } else { 3 };
            if nbrs.len() != want {
                return Err(TreeError::Structure(format!(
                    "vertex {v} has degree {}, expected {want}",
                    nbrs.len()
                )));
            }
        }
        // V - 1 edges plus connectivity gives a tree.
        let mut visited = vec![false; num_vertices];
        let mut stack = vec![0];
        visited[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &adj[x] {
                if !visited[y] {
                    visited[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        if count != num_vertices {
            return Err(TreeError::Structure("graph is not connected".into()));
        }
        Ok(Topology { labels, edges, adj })
    }

    pub fn num_leaves(&self) -> usize {
        self.labels.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, leaf: usize) -> &str {
        &self.labels[leaf]
    }

    pub fn leaf_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbours of `v` as `(vertex, edge id)` pairs.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v < self.labels.len()
    }

    /// Edge ids on the unique path between `u` and `v`.
    pub fn path_edges(&self, u: usize, v: usize) -> Vec<usize> {
        if u == v {
            return Vec::new();
        }
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.num_vertices()];
        let mut queue = VecDeque::from([u]);
        let mut seen = vec![false; self.num_vertices()];
        seen[u] = true;
        while let Some(x) = queue.pop_front() {
            if x == v {
                break;
            }
            for &(y, e) in &self.adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some((x, e));
                    queue.push_back(y);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = v;
        while let Some((p, e)) = parent[cur] {
            path.push(e);
            cur = p;
        }
        path
    }

    /// Pre-order traversal from `root`, yielding `(vertex, parent, edge)`.
    pub(crate) fn preorder(&self, root: usize) -> Vec<(usize, Option<(usize, usize)>)> {
        let mut order = Vec::with_capacity(self.num_vertices());
        let mut stack = vec![(root, None)];
        while let Some((v, par)) = stack.pop() {
            order.push((v, par));
            let parent_vertex = par.map(|(p, _)| p);
            for &(w, e) in self.adj[v].iter().rev() {
                if Some(w) != parent_vertex {
                    stack.push((w, Some((v, e))));
                }
            }
        }
        order
    }

    /// Nontrivial bipartitions as sets of canonical leaf indices: the side
    /// not containing canonical leaf 0 is returned. `canon[leaf]` maps this
    /// topology's leaves onto the canonical numbering.
    pub(crate) fn splits(&self, canon: &[usize]) -> HashSet<Vec<u64>> {
        let n = self.num_leaves();
        let words = n.div_ceil(64);
        let root = canon.iter().position(|&c| c == 0).expect("canonical leaf 0");
        let order = self.preorder(root);
        let mut clade: Vec<Vec<u64>> = vec![vec![0u64; words]; self.num_vertices()];
        let mut out = HashSet::new();
        for &(v, par) in order.iter().rev() {
            if self.is_leaf(v) {
                let c = canon[v];
                clade[v][c / 64] |= 1 << (c % 64);
            }
            if let Some((p, _)) = par {
                if !self.is_leaf(v) && !self.is_leaf(p) {
                    out.insert(clade[v].clone());
                }
                let child = std::mem::take(&mut clade[v]);
                for (w, c) in clade[p].iter_mut().zip(&child) {
                    *w |= c;
                }
            }
        }
        out
    }

    /// Attaches unit weights, mostly so the topology can be written as Newick.
    pub fn with_unit_weights(&self) -> Phylogeny {
        Phylogeny {
            topology: self.clone(),
            weights: vec![1.0; self.num_edges()],
        }
    }

    pub fn to_newick(&self) -> String {
        self.with_unit_weights().to_newick()
    }
}

/// A topology together with positive edge weights (expected substitutions).
#[derive(Clone, Debug, PartialEq)]
pub struct Phylogeny {
    topology: Topology,
    weights: Vec<f64>,
}

impl Phylogeny {
    pub fn new(topology: Topology, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != topology.num_edges() {
            return Err(TreeError::Structure(format!(
                "{} weights for {} edges",
                weights.len(),
                topology.num_edges()
            )));
        }
        for (edge, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(TreeError::NonPositiveWeight { edge, weight: w });
            }
        }
        Ok(Phylogeny { topology, weights })
    }

    pub fn parse_newick(text: &str) -> Result<Self> {
        newick::parse(text)
    }

    pub fn to_newick(&self) -> String {
        newick::write(self)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_leaves(&self) -> usize {
        self.topology.num_leaves()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, edge: usize) -> f64 {
        self.weights[edge]
    }

    pub fn labels(&self) -> &[String] {
        self.topology.labels()
    }

    /// The same tree with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Phylogeny::new(self.topology.clone(), self.weights.iter().map(|w| w * factor).collect())
    }

    /// True iff every edge weight lies in `[f, g]`.
    pub fn is_regular(&self, params: &RegularityParams) -> bool {
        self.weights.iter().all(|&w| params.f <= w && w <= params.g)
    }

    /// Distances from `source` to every vertex.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![0.0; self.topology.num_vertices()];
        for (v, par) in self.topology.preorder(source) {
            if let Some((p, e)) = par {
                dist[v] = dist[p] + self.weights[e];
            }
        }
        dist
    }

    /// All-pairs leaf distances.
    pub fn tree_metric(&self) -> TreeMetric {
        let n = self.num_leaves();
        let mut m = SymMatrix::zeros(n);
        for u in 0..n {
            let dist = self.distances_from(u);
            for v in (u + 1)..n {
                m.set(u, v, dist[v]);
            }
        }
        TreeMetric(m)
    }

    /// Whether the paths `pair1` and `pair2` share no edge. Vertex sharing is
    /// allowed.
    pub fn paths_disjoint(&self, pair1: (usize, usize), pair2: (usize, usize)) -> Result<bool> {
        let leaves = [pair1.0, pair1.1, pair2.0, pair2.1];
        for (i, &x) in leaves.iter().enumerate() {
            if x >= self.num_leaves() {
                return Err(TreeError::LeafOutOfRange(x));
            }
            if leaves[..i].contains(&x) {
                return Err(TreeError::RepeatedLeaf(x));
            }
        }
        let first: HashSet<usize> = self.topology.path_edges(pair1.0, pair1.1).into_iter().collect();
        Ok(self
            .topology
            .path_edges(pair2.0, pair2.1)
            .iter()
            .all(|e| !first.contains(e)))
    }

    /// Pairs of distinct leaves at distance at most `alpha`, as `(a, b)`
    /// with `a < b`.
    pub fn close_pairs(&self, alpha: f64) -> Vec<(usize, usize)> {
        self.tree_metric()
            .matrix()
            .upper_triangle()
            .filter(|&(_, _, d)| d <= alpha)
            .map(|(a, b, _)| (a, b))
            .collect()
    }
}

/// Edge-weight bounds `f <= mu_e <= g` and the scaled-distance cap `M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityParams {
    pub f: f64,
    pub g: f64,
    pub big_m: f64,
}

impl RegularityParams {
    pub fn new(f: f64, g: f64, big_m: f64) -> Result<Self> {
        if !(f > 0.0 && f <= g && g < big_m && big_m.is_finite()) {
            return Err(TreeError::InvalidParams { f, g, big_m });
        }
        Ok(RegularityParams { f, g, big_m })
    }
}

/// Leaf-to-leaf path-length distances of a phylogeny.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeMetric(SymMatrix);

impl TreeMetric {
    pub fn matrix(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.0.get(u, v)
    }

    /// Multiplies every distance by `factor`.
    pub fn scaled(&self, factor: f64) -> SymMatrix {
        self.0.map(|d| d * factor)
    }

    /// Checks the four-point condition on a quadruple: the two largest of the
    /// three pairwise sums agree within `tol`.
    pub fn four_point_holds(&self, q: [usize; 4], tol: f64) -> bool {
        let d = |a, b| self.get(q[a], q[b]);
        let mut sums = [d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)];
        sums.sort_by(f64::total_cmp);
        (sums[2] - sums[1]).abs() <= tol
    }
}

/// Maps the leaves of `other` onto the leaf numbering of `reference` by label.
pub(crate) fn label_map(reference: &Topology, other: &Topology) -> Result<Vec<usize>> {
    if reference.num_leaves() != other.num_leaves() {
        return Err(TreeError::LeafMismatch);
    }
    let index: HashMap<&str, usize> = reference
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    other
        .labels()
        .iter()
        .map(|l| index.get(l.as_str()).copied().ok_or(TreeError::LeafMismatch))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartet() -> Phylogeny {
        Phylogeny::parse_newick("((a:1,b:1):1,(c:1,d:1):1);").unwrap()
    }

    #[test]
    fn quartet_metric_by_hand() {
        let p = quartet();
        let d = p.tree_metric();
        let (a, b, c) = (0, 1, 2);
        assert_eq!(d.get(a, b), 2.0);
        assert_eq!(d.get(a, c), 4.0);
        assert_eq!(d.get(c, a), 4.0);
    }

    #[test]
    fn vertex_and_edge_counts() {
        let p = quartet();
        assert_eq!(p.topology().num_vertices(), 6);
        assert_eq!(p.topology().num_edges(), 5);
    }

    #[test]
    fn topology_rejects_bad_degree() {
        // Leaf 0 attached twice.
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let err = Topology::new(labels, vec![(0, 3), (1, 3), (0, 1)]).unwrap_err();
        assert!(matches!(err, TreeError::Structure(_)));
    }

    #[test]
    fn phylogeny_rejects_zero_weight() {
        let p = quartet();
        let mut w = p.weights().to_vec();
        w[2] = 0.0;
        assert!(matches!(
            Phylogeny::new(p.topology().clone(), w),
            Err(TreeError::NonPositiveWeight { edge: 2, .. })
        ));
    }

    #[test]
    fn regularity_params_ordering() {
        assert!(RegularityParams::new(0.1, 0.2, 1.2).is_ok());
        assert!(RegularityParams::new(0.3, 0.2, 1.2).is_err());
        assert!(RegularityParams::new(0.1, 0.2, 0.2).is_err());
        assert!(RegularityParams::new(0.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn disjoint_cherries() {
        let p = generate_complete_binary(3, 0.1).unwrap();
        assert!(p.paths_disjoint((0, 1), (2, 3)).unwrap());
        assert!(p.paths_disjoint((0, 1), (4, 5)).unwrap());
        assert!(!p.paths_disjoint((0, 2), (1, 3)).unwrap());
    }

    #[test]
    fn interleaved_caterpillar_pairs_share_edges() {
        // Caterpillar a,b,c,d,...: path a..c and path b..d overlap on the spine.
        let p = generate_caterpillar(6, 1.0).unwrap();
        let a = p.topology().leaf_index("leaf_0").unwrap();
        let b = p.topology().leaf_index("leaf_1").unwrap();
        let c = p.topology().leaf_index("leaf_2").unwrap();
        let d = p.topology().leaf_index("leaf_3").unwrap();
        // Explicit path listing: the spine edge between the attachment
        // points of leaf_2 and leaf_3's predecessor is on both paths.
        let pac: HashSet<_> = p.topology().path_edges(a, c).into_iter().collect();
        let pbd: HashSet<_> = p.topology().path_edges(b, d).into_iter().collect();
        assert!(!pac.is_disjoint(&pbd));
        assert!(!p.paths_disjoint((a, c), (b, d)).unwrap());
    }

    #[test]
    fn vertex_sharing_is_not_edge_sharing() {
        // In ((a,b),(c,d)) the paths a-b and c-d are disjoint; a-c and b-d
        // share the internal edge.
        let p = quartet();
        assert!(p.paths_disjoint((0, 1), (2, 3)).unwrap());
        assert!(!p.paths_disjoint((0, 2), (1, 3)).unwrap());
        let t = Phylogeny::parse_newick("((a:1,b:1):1,c:1,(d:1,e:1):1);").unwrap();
        let idx = |s| t.topology().leaf_index(s).unwrap();
        assert!(t.paths_disjoint((idx("a"), idx("c")), (idx("d"), idx("e"))).unwrap());
        assert!(t.paths_disjoint((idx("a"), idx("b")), (idx("c"), idx("d"))).unwrap());
    }

    #[test]
    fn paths_disjoint_rejects_repeats() {
        let p = quartet();
        assert_eq!(p.paths_disjoint((0, 1), (1, 2)), Err(TreeError::RepeatedLeaf(1)));
    }
}
