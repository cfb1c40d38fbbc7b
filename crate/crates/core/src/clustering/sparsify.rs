use std::cmp::Ordering;

use super::{AgreementMatrix, ClusteringError, ClusteringThresholds, PairSet, Provenance, Result};
use crate::tree::{Phylogeny, RegularityParams};

/// Every pair with `q_hat(a, b) >= omega_minus` (closed boundary).
pub fn close_pairs(q: &AgreementMatrix, t: &ClusteringThresholds) -> PairSet {
    let pairs = q
        .matrix()
        .upper_triangle()
        .filter(|&(_, _, v)| v >= t.omega_minus)
        .map(|(a, b, _)| (a, b))
        .collect();
    PairSet {
        pairs,
        provenance: Provenance::DataDriven,
    }
}

/// Greedy thinning of `candidates`: take the remaining pair with the largest
/// `q_hat` (ties broken lexicographically), then drop every remaining pair
/// touching a leaf `c` with `q_hat(c, a*) >= omega_plus` or
/// `q_hat(c, b*) >= omega_plus`. A leaf counts as close to itself.
pub fn sparsify(candidates: &PairSet, q: &AgreementMatrix, t: &ClusteringThresholds) -> Result<PairSet> {
    if candidates.is_empty() {
        return Err(ClusteringError::EmptyPairSet);
    }
    let n = q.n();
    check_leaves(candidates, n)?;
    let mut order = candidates.pairs().to_vec();
    order.sort_by(|&x, &y| {
        q.get(y.0, y.1)
            .partial_cmp(&q.get(x.0, x.1))
            .unwrap_or(Ordering::Equal)
            .then(x.cmp(&y))
    });
    let near = |c: usize, x: usize| c == x || q.get(c, x) >= t.omega_plus;
    let kept = greedy(&order, n, near);
    Ok(PairSet {
        pairs: kept,
        provenance: Provenance::DataDriven,
    })
}

/// The idealized construction on the true metric: start from all pairs at
/// distance at most `m`, take them in increasing distance (ties
/// lexicographic), and after each pick drop every pair with a leaf within
/// distance `m` of either picked leaf.
pub fn oracle_sparsify(tree: &Phylogeny, params: &RegularityParams, m: f64) -> Result<PairSet> {
    if !(4.0 * params.g < m && m < params.big_m) {
        return Err(ClusteringError::ParamOrder {
            g: params.g,
            m,
            big_m: params.big_m,
        });
    }
    let d = tree.tree_metric();
    let mut order: Vec<(usize, usize)> = d
        .matrix()
        .upper_triangle()
        .filter(|&(_, _, x)| x <= m)
        .map(|(a, b, _)| (a, b))
        .collect();
    order.sort_by(|&x, &y| d.get(x.0, x.1).total_cmp(&d.get(y.0, y.1)).then(x.cmp(&y)));
    let near = |c: usize, x: usize| d.get(c, x) <= m;
    Ok(PairSet {
        pairs: greedy(&order, tree.num_leaves(), near),
        provenance: Provenance::Oracle,
    })
}

fn greedy(order: &[(usize, usize)], n: usize, near: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let mut blocked = vec![false; n];
    let mut kept = Vec::new();
    for &(a, b) in order {
        if blocked[a] || blocked[b] {
            continue;
        }
        kept.push((a, b));
        for (c, flag) in blocked.iter_mut().enumerate() {
            if near(c, a) || near(c, b) {
                *flag = true;
            }
        }
    }
    kept
}

fn check_leaves(pairs: &PairSet, n: usize) -> Result<()> {
    match pairs.max_leaf() {
        Some(leaf) if leaf >= n => Err(ClusteringError::LeafOutOfRange { leaf, n }),
        _ => Ok(()),
    }
}

/// `gamma_s = 2^{-(2 floor(M/f) + 2)}`.
pub fn sparsity_gamma(params: &RegularityParams) -> f64 {
    let exponent = 2.0 * (params.big_m / params.f).floor() + 2.0;
    (-exponent).exp2()
}

/// The three sparsity properties of a pair set. A check that was not run is
/// `None`; the distance and disjointness checks need the true tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityCertificate {
    pub gamma_s: f64,
    pub n: usize,
    pub size: usize,
    pub path_disjoint: Option<bool>,
    pub size_ok: Option<bool>,
    pub distance_ok: Option<bool>,
}

impl SparsityCertificate {
    /// Only the size check, which needs no tree.
    pub fn size_only(pairs: &PairSet, n: usize, params: &RegularityParams) -> Self {
        let gamma_s = sparsity_gamma(params);
        SparsityCertificate {
            gamma_s,
            n,
            size: pairs.len(),
            path_disjoint: None,
            size_ok: Some(pairs.len() as f64 >= gamma_s * n as f64),
            distance_ok: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.path_disjoint.is_some() && self.size_ok.is_some() && self.distance_ok.is_some()
    }

    /// Complete and every check passed.
    pub fn passes(&self) -> bool {
        self.path_disjoint == Some(true) && self.size_ok == Some(true) && self.distance_ok == Some(true)
    }
}

/// Runs all three checks against the true tree.
pub fn certify(pairs: &PairSet, tree: &Phylogeny, params: &RegularityParams) -> Result<SparsityCertificate> {
    let n = tree.num_leaves();
    check_leaves(pairs, n)?;
    let topo = tree.topology();
    let mut used = vec![false; topo.num_edges()];
    let mut disjoint = true;
    'outer: for &(a, b) in pairs.pairs() {
        for e in topo.path_edges(a, b) {
            if used[e] {
                disjoint = false;
                break 'outer;
            }
            used[e] = true;
        }
    }
    let d = tree.tree_metric();
    // Path sums carry rounding; allow a relative 1e-12.
    let slack = 1e-12 * params.big_m;
    let distance_ok = pairs.pairs().iter().all(|&(a, b)| {
        let x = d.get(a, b);
        2.0 * params.f - slack <= x && x <= params.big_m + slack
    });
    let mut cert = SparsityCertificate::size_only(pairs, n, params);
    cert.path_disjoint = Some(disjoint);
    cert.distance_ok = Some(distance_ok);
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;
    use crate::tree::{generate_caterpillar, generate_complete_binary};

    fn from_matrix(q: SymMatrix) -> AgreementMatrix {
        AgreementMatrix { q, k: 1 }
    }

    #[test]
    fn close_pairs_boundary_closed() {
        let t = ClusteringThresholds::from_g(0.2);
        let q = from_matrix(SymMatrix::from_fn(3, |i, j| match (i, j) {
            _ if i == j => 1.0,
            (0, 1) => t.omega_minus,
            (0, 2) => t.omega_minus - 1e-12,
            _ => 0.0,
        }));
        assert_eq!(close_pairs(&q, &t).pairs(), &[(0, 1)]);
    }

    #[test]
    fn close_pairs_on_exact_values() {
        let g: f64 = 0.2;
        let t = ClusteringThresholds::from_g(g);
        // Constant rate: q = e^{-d}.
        let d = [4.0 * g, 5.0 * g + 0.01, 2.0 * g];
        let q = from_matrix(SymMatrix::from_fn(
            3,
            |i, j| {
                if i == j {
                    1.0
                } else {
                    (-d[i + j - 1]).exp()
                }
            },
        ));
        assert_eq!(close_pairs(&q, &t).pairs(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn sparsify_keeps_far_pairs() {
        let t = ClusteringThresholds::from_g(0.2);
        let q = from_matrix(SymMatrix::from_fn(6, |i, j| {
            if i == j || (i / 2 == j / 2) {
                1.0
            } else {
                0.0
            }
        }));
        let cands = PairSet::new(vec![(0, 1), (2, 3), (4, 5)], Provenance::DataDriven).unwrap();
        assert_eq!(sparsify(&cands, &q, &t).unwrap().pairs(), cands.pairs());
    }

    #[test]
    fn sparsify_overlap_keeps_one() {
        let t = ClusteringThresholds::from_g(0.2);
        let q = from_matrix(SymMatrix::from_fn(3, |i, j| match (i, j) {
            _ if i == j => 1.0,
            (0, 1) => 0.5,
            (1, 2) => 0.6,
            _ => 0.0,
        }));
        let cands = PairSet::new(vec![(0, 1), (1, 2)], Provenance::DataDriven).unwrap();
        assert_eq!(sparsify(&cands, &q, &t).unwrap().pairs(), &[(1, 2)]);
    }

    #[test]
    fn sparsify_rejects_empty() {
        let t = ClusteringThresholds::from_g(0.2);
        let q = from_matrix(SymMatrix::zeros(3));
        let cands = PairSet::new(vec![], Provenance::DataDriven).unwrap();
        assert_eq!(sparsify(&cands, &q, &t), Err(ClusteringError::EmptyPairSet));
    }

    #[test]
    fn oracle_on_complete_tree() {
        let g = 0.2;
        let tree = generate_complete_binary(4, g).unwrap();
        let params = RegularityParams::new(g, g, 1.5).unwrap();
        let pairs = oracle_sparsify(&tree, &params, 5.0 * g + 1e-9).unwrap();
        let cert = certify(&pairs, &tree, &params).unwrap();
        assert!(cert.is_complete() && cert.passes(), "{cert:?}");
        assert!(pairs.len() as f64 >= cert.gamma_s * 16.0);
        // Picked pairs share no leaf.
        let mut leaves: Vec<usize> = pairs.pairs().iter().flat_map(|&(a, b)| [a, b]).collect();
        leaves.sort();
        leaves.dedup();
        assert_eq!(leaves.len(), 2 * pairs.len());
    }

    #[test]
    fn oracle_on_caterpillar() {
        let tree = generate_caterpillar(8, 0.15).unwrap();
        let params = RegularityParams::new(0.1, 0.2, 1.5).unwrap();
        let pairs = oracle_sparsify(&tree, &params, 1.0).unwrap();
        assert!(!pairs.is_empty());
        for (i, &p) in pairs.pairs().iter().enumerate() {
            for &p2 in &pairs.pairs()[i + 1..] {
                assert!(tree.paths_disjoint(p, p2).unwrap());
            }
        }
    }

    #[test]
    fn oracle_param_order() {
        let tree = generate_caterpillar(8, 0.15).unwrap();
        let params = RegularityParams::new(0.1, 0.2, 1.5).unwrap();
        assert!(oracle_sparsify(&tree, &params, 0.8).is_err());
        assert!(oracle_sparsify(&tree, &params, 1.5).is_err());
    }

    #[test]
    fn certificate_detects_shared_edge() {
        let tree = generate_caterpillar(8, 0.15).unwrap();
        let params = RegularityParams::new(0.1, 0.2, 1.5).unwrap();
        // Leaves 0 and 1 hang off one end; (0, 5) and (1, 6) share the spine.
        let pairs = PairSet::new(vec![(0, 5), (1, 6)], Provenance::Oracle).unwrap();
        let cert = certify(&pairs, &tree, &params).unwrap();
        assert_eq!(cert.path_disjoint, Some(false));
        assert!(!cert.passes());
        let partial = SparsityCertificate::size_only(&pairs, 8, &params);
        assert!(!partial.is_complete());
    }

    #[test]
    fn gamma_s_value() {
        let params = RegularityParams::new(0.2, 0.2, 1.0).unwrap();
        assert_eq!(sparsity_gamma(&params), 2f64.powi(-12));
    }
}
