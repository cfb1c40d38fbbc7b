//! Exact leaf-pattern distributions for small instances, by pruning.

use super::{ModelError, RateDistribution, Result, SubstitutionModel};
use crate::tree::Phylogeny;

const MAX_LEAVES: usize = 8;
const MAX_STATES: usize = 4;

/// Probability of every leaf pattern. Pattern index is
/// `sum_leaf state[leaf] * r^leaf`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafDistribution {
    n: usize,
    r: usize,
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl LeafDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index(&self, states: &[u8]) -> usize {
        states.iter().rev().fold(0, |acc, &x| acc * self.r + x as usize)
    }

    pub fn pattern(&self, mut index: usize) -> Vec<u8> {
        (0..self.n)
            .map(|_| {
                let x = (index % self.r) as u8;
                index /= self.r;
                x
            })
            .collect()
    }

    pub fn prob(&self, states: &[u8]) -> f64 {
        self.probs[self.index(states)]
    }

    /// `(1/2) sum |p - q|`, with leaves matched by label.
    pub fn total_variation(&self, other: &LeafDistribution) -> Result<f64> {
        let mismatch = || {
            ModelError::OutOfRange(format!(
                "distributions over different spaces: (n={}, r={}) vs (n={}, r={}) or different labels",
                self.n, self.r, other.n, other.r
            ))
        };
        if self.n != other.n || self.r != other.r {
            return Err(mismatch());
        }
        let to_other: Vec<usize> = self
            .labels
            .iter()
            .map(|l| other.labels.iter().position(|m| m == l).ok_or_else(mismatch))
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut moved = vec![0u8; self.n];
        for (index, &p) in self.probs.iter().enumerate() {
            for (leaf, x) in self.pattern(index).into_iter().enumerate() {
                moved[to_other[leaf]] = x;
            }
            total += (p - other.prob(&moved)).abs();
        }
        Ok(0.5 * total)
    }
}

/// Exact leaf distribution mixed over a finitely supported rate law, rooted
/// at the first internal vertex.
pub fn exact_leaf_distribution(
    tree: &Phylogeny,
    model: &SubstitutionModel,
    rates: &RateDistribution,
) -> Result<LeafDistribution> {
    exact_leaf_distribution_rooted(tree, model, rates, tree.num_leaves())
}

/// As [`exact_leaf_distribution`] with an explicit root vertex, which may be
/// any vertex including a leaf.
pub fn exact_leaf_distribution_rooted(
    tree: &Phylogeny,
    model: &SubstitutionModel,
    rates: &RateDistribution,
    root: usize,
) -> Result<LeafDistribution> {
    let topo = tree.topology();
    let n = topo.num_leaves();
    let r = model.r();
    if n > MAX_LEAVES || r > MAX_STATES {
        return Err(ModelError::TooLarge { n, r });
    }
    if root >= topo.num_vertices() {
        return Err(ModelError::OutOfRange(format!("root vertex {root}")));
    }
    let support = rates.support().ok_or(ModelError::NotDiscrete)?;
    let order = topo.preorder(root);
    let pi = model.pi();

    // Transition matrix per (support point, edge).
    let mut mats = Vec::with_capacity(support.len());
    for &(lambda, _) in &support {
        let per_edge: Result<Vec<_>> = tree
            .weights()
            .iter()
            .map(|&w| model.transition_matrix(lambda * w))
            .collect();
        mats.push(per_edge?);
    }

    let patterns = r.pow(n as u32);
    let mut dist = LeafDistribution {
        n,
        r,
        labels: tree.labels().to_vec(),
        probs: vec![0.0; patterns],
    };
    let mut partial = vec![[0.0f64; MAX_STATES]; topo.num_vertices()];
    for index in 0..patterns {
        let states = dist.pattern(index);
        let mut total = 0.0;
        for (&(_, weight), edge_mats) in support.iter().zip(&mats) {
            for &(v, _) in order.iter().rev() {
                let mut like = [1.0; MAX_STATES];
                if topo.is_leaf(v) {
                    for (x, l) in like.iter_mut().enumerate().take(r) {
                        *l = if x == states[v] as usize { 1.0 } else { 0.0 };
                    }
                }
                partial[v] = like;
            }
            // Children fold into parents in reverse pre-order.
            for &(v, parent) in order.iter().rev() {
                if let Some((p, e)) = parent {
                    let m = &edge_mats[e];
                    let child = partial[v];
                    for x in 0..r {
                        let s: f64 = (0..r).map(|y| m[x][y] * child[y]).sum();
                        partial[p][x] *= s;
                    }
                }
            }
            total += weight * (0..r).map(|x| pi[x] * partial[root][x]).sum::<f64>();
        }
        dist.probs[index] = total;
    }
    Ok(dist)
}
