//! Tree generators for experiments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::newick::{from_rooted, RootedNode};
use super::{Phylogeny, RegularityParams, Result, Topology, TreeError};

/// Complete binary tree with `2^h` leaves and every edge of weight `mu`.
/// Leaves are labelled `leaf_0 .. leaf_{2^h-1}` from left to right. The two
/// root edges merge into a single edge of weight `2 mu`.
pub fn generate_complete_binary(h: u32, mu: f64) -> Result<Phylogeny> {
    if !(2..=24).contains(&h) {
        return Err(TreeError::Generator(format!("need 2 <= h <= 24, got {h}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(TreeError::Generator(format!("edge weight must be positive, got {mu}")));
    }
    let mut nodes = vec![RootedNode::default()];
    let mut level = vec![0usize];
    for _ in 0..h {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &parent in &level {
            for _ in 0..2 {
                nodes.push(RootedNode {
                    length: mu,
                    ..Default::default()
                });
                let id = nodes.len() - 1;
                nodes[parent].children.push(id);
                next.push(id);
            }
        }
        level = next;
    }
    for (i, &leaf) in level.iter().enumerate() {
        nodes[leaf].label = Some(format!("leaf_{i}"));
    }
    from_rooted(&nodes, 0)
}

/// Caterpillar (ladder) tree `(((leaf_0,leaf_1),leaf_2),...)` with every
/// edge of weight `mu`.
pub fn generate_caterpillar(n: usize, mu: f64) -> Result<Phylogeny> {
    if n < 4 {
        return Err(TreeError::Generator(format!("need n >= 4, got {n}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(TreeError::Generator(format!("edge weight must be positive, got {mu}")));
    }
    let leaf = |i: usize| RootedNode {
        length: mu,
        label: Some(format!("leaf_{i}")),
        ..Default::default()
    };
    let mut nodes = vec![leaf(0), leaf(1)];
    nodes.push(RootedNode {
        children: vec![0, 1],
        length: mu,
        ..Default::default()
    });
    let mut top = 2;
    for i in 2..n {
        nodes.push(leaf(i));
        let l = nodes.len() - 1;
        nodes.push(RootedNode {
            children: vec![top, l],
            length: mu,
            ..Default::default()
        });
        top = nodes.len() - 1;
    }
    from_rooted(&nodes, top)
}

/// Random binary tree on `n` leaves by uniform sequential attachment: start
/// from the 3-leaf star and attach each new leaf to the midpoint of a
/// uniformly chosen existing edge. Edge weights are then drawn uniformly from
/// `[f, g]`. Deterministic for a given seed.
pub fn generate_random_regular(n: usize, params: &RegularityParams, seed: u64) -> Result<Phylogeny> {
    if n < 4 {
        return Err(TreeError::Generator(format!("need n >= 4, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = n;
    let mut edges = vec![(0, center), (1, center), (2, center)];
    let mut next_internal = n + 1;
    for leaf in 3..n {
        let i = rng.random_range(0..edges.len());
        let (u, v) = edges[i];
        let w = next_internal;
        next_internal += 1;
        edges[i] = (u, w);
        edges.push((w, v));
        edges.push((w, leaf));
    }
    let weights: Vec<f64> = (0..edges.len())
        .map(|_| {
            if params.f == params.g {
                params.f
            } else {
                rng.random_range(params.f..=params.g)
            }
        })
        .collect();
    let labels = (0..n).map(|i| format!("leaf_{i}")).collect();
    Phylogeny::new(Topology::new(labels, edges)?, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_h2() {
        let p = generate_complete_binary(2, 0.1).unwrap();
        assert_eq!(p.num_leaves(), 4);
        assert_eq!(p.topology().num_edges(), 5);
        let merged: Vec<f64> = p
            .topology()
            .edges()
            .iter()
            .zip(p.weights())
            .filter(|((u, v), _)| *u >= 4 && *v >= 4)
            .map(|(_, &w)| w)
            .collect();
        assert_eq!(merged, vec![0.2]);
    }

    #[test]
    fn complete_h10_counts() {
        let p = generate_complete_binary(10, 0.1).unwrap();
        assert_eq!(p.num_leaves(), 1024);
        assert_eq!(p.topology().num_vertices(), 2046);
    }

    #[test]
    fn complete_h_too_small() {
        assert!(generate_complete_binary(1, 0.1).is_err());
    }

    #[test]
    fn random_tree_too_small() {
        let params = RegularityParams::new(0.1, 0.2, 1.0).unwrap();
        assert!(generate_random_regular(3, &params, 0).is_err());
    }

    #[test]
    fn random_tree_deterministic() {
        let params = RegularityParams::new(0.1, 0.2, 1.0).unwrap();
        let a = generate_random_regular(50, &params, 42).unwrap().to_newick();
        let b = generate_random_regular(50, &params, 42).unwrap().to_newick();
        let c = generate_random_regular(50, &params, 43).unwrap().to_newick();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn caterpillar_shape() {
        let p = generate_caterpillar(8, 1.0).unwrap();
        let d = p.tree_metric();
        // leaf_0 and leaf_1 form the bottom cherry.
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.get(0, 7), 8.0);
    }
}
