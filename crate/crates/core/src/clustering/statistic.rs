use rayon::prelude::*;

use super::{ClusteringError, PairSet, Result};
use crate::model::{Alignment, SubstitutionModel};
use crate::tree::{Phylogeny, TreeMetric};

fn check(a: &Alignment, pairs: &PairSet) -> Result<()> {
    if pairs.is_empty() {
        return Err(ClusteringError::EmptyPairSet);
    }
    match pairs.max_leaf() {
        Some(leaf) if leaf >= a.n() => Err(ClusteringError::LeafOutOfRange { leaf, n: a.n() }),
        _ => Ok(()),
    }
}

/// Normalized agreement of site `i` averaged over `pairs`.
pub fn site_statistic(a: &Alignment, pairs: &PairSet, i: usize, model: &SubstitutionModel) -> Result<f64> {
    check(a, pairs)?;
    if i >= a.k() {
        return Err(ClusteringError::SiteOutOfRange { site: i, k: a.k() });
    }
    let agree = pairs
        .pairs()
        .iter()
        .filter(|&&(x, y)| a.state(x, i) == a.state(y, i))
        .count();
    Ok(model.agreement().normalize(agree as f64 / pairs.len() as f64))
}

/// [`site_statistic`] for every site.
pub fn site_statistics(a: &Alignment, pairs: &PairSet, model: &SubstitutionModel) -> Result<Vec<f64>> {
    check(a, pairs)?;
    let c = model.agreement();
    let m = pairs.len() as f64;
    const CHUNK: usize = 4096;
    let counts: Vec<u32> = (0..a.k())
        .into_par_iter()
        .chunks(CHUNK)
        .flat_map_iter(|sites| {
            let (lo, hi) = (sites[0], sites[sites.len() - 1] + 1);
            let mut count = vec![0u32; hi - lo];
            for &(x, y) in pairs.pairs() {
                let (rx, ry) = (&a.leaf_row(x)[lo..hi], &a.leaf_row(y)[lo..hi]);
                for ((c, p), q) in count.iter_mut().zip(rx).zip(ry) {
                    *c += (p == q) as u32;
                }
            }
            count
        })
        .collect();
    Ok(counts.into_iter().map(|n| c.normalize(n as f64 / m)).collect())
}

/// `U(lambda) = (1/|pairs|) sum exp(-lambda d(a, b))`, the conditional mean
/// of the site statistic at rate `lambda`.
pub fn expected_statistic(metric: &TreeMetric, pairs: &PairSet, lambda: f64) -> f64 {
    let total: f64 = pairs
        .pairs()
        .iter()
        .map(|&(a, b)| (-lambda * metric.get(a, b)).exp())
        .sum();
    total / pairs.len() as f64
}

/// `(lambda, U(lambda))` on a grid of rates.
pub fn expected_statistic_curve(tree: &Phylogeny, pairs: &PairSet, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if pairs.is_empty() {
        return Err(ClusteringError::EmptyPairSet);
    }
    if let Some(leaf) = pairs.max_leaf().filter(|&l| l >= tree.num_leaves()) {
        return Err(ClusteringError::LeafOutOfRange {
            leaf,
            n: tree.num_leaves(),
        });
    }
    let metric = tree.tree_metric();
    Ok(grid
        .iter()
        .map(|&lambda| (lambda, expected_statistic(&metric, pairs, lambda)))
        .collect())
}

/// Sum over all unordered leaf pairs of the normalized agreement indicator
/// at site `i`. For `r = 2` this is `sum s_a s_b` in the `+-1` encoding.
pub fn full_sum_statistic(a: &Alignment, i: usize, model: &SubstitutionModel) -> Result<f64> {
    if i >= a.k() {
        return Err(ClusteringError::SiteOutOfRange { site: i, k: a.k() });
    }
    let mut counts = vec![0u64; a.r()];
    for leaf in 0..a.n() {
        counts[a.state(leaf, i) as usize] += 1;
    }
    let agree: u64 = counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
    let n = a.n() as u64;
    let total = (n * (n - 1) / 2) as f64;
    let c = model.agreement();
    Ok((agree as f64 - c.q_inf * total) / c.p_inf)
}
