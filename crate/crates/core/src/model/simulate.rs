//! Sequence simulation under the rates-across-sites Poisson model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ModelError, RateDistribution, Result, SubstitutionModel};
use crate::tree::Phylogeny;

/// A `k x n` character matrix over `{0..r}`. Stored leaf-major so that pair
/// comparisons scan two contiguous rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    k: usize,
    n: usize,
    r: usize,
    data: Vec<u8>,
}

impl Alignment {
    /// `data[leaf * k + site]`.
    pub fn from_leaf_major(k: usize, n: usize, r: usize, data: Vec<u8>) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(ModelError::InvalidAlignment(format!("empty alignment: k={k}, n={n}")));
        }
        if !(2..=255).contains(&r) {
            return Err(ModelError::InvalidAlignment(format!("alphabet size {r}")));
        }
        if data.len() != k * n {
            return Err(ModelError::InvalidAlignment(format!(
                "expected {} entries, got {}",
                k * n,
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|&&x| x as usize >= r) {
            return Err(ModelError::InvalidAlignment(format!("state {bad} outside 0..{r}")));
        }
        Ok(Alignment { k, n, r, data })
    }

    /// Builds from per-site rows of `n` states each.
    pub fn from_sites(n: usize, r: usize, sites: &[Vec<u8>]) -> Result<Self> {
        let k = sites.len();
        if let Some(row) = sites.iter().find(|row| row.len() != n) {
            return Err(ModelError::InvalidAlignment(format!(
                "site row has {} states, expected {n}",
                row.len()
            )));
        }
        let mut data = vec![0u8; k * n];
        for (site, row) in sites.iter().enumerate() {
            for (leaf, &x) in row.iter().enumerate() {
                data[leaf * k + site] = x;
            }
        }
        Self::from_leaf_major(k, n, r, data)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn state(&self, leaf: usize, site: usize) -> u8 {
        self.data[leaf * self.k + site]
    }

    /// All `k` states of one leaf.
    #[inline]
    pub fn leaf_row(&self, leaf: usize) -> &[u8] {
        &self.data[leaf * self.k..(leaf + 1) * self.k]
    }

    pub fn site(&self, site: usize) -> Vec<u8> {
        (0..self.n).map(|leaf| self.state(leaf, site)).collect()
    }
}

/// Simulator output: the observable alignment plus the per-site rate draws,
/// kept apart so inference code only ever sees the former.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedAlignment {
    pub alignment: Alignment,
    pub hidden_lambdas: Vec<f64>,
}

/// Draws `k` i.i.d. sites. Site `i` uses its own ChaCha stream `i` under
/// `seed`, so the output does not depend on thread scheduling.
pub fn simulate_alignment(
    tree: &Phylogeny,
    model: &SubstitutionModel,
    rates: &RateDistribution,
    k: usize,
    seed: u64,
) -> Result<SimulatedAlignment> {
    if k == 0 {
        return Err(ModelError::OutOfRange("k must be at least 1".into()));
    }
    let topo = tree.topology();
    let n = topo.num_leaves();
    let order = topo.preorder(n);
    let cumulative: Vec<f64> = model
        .pi()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let draw = |rng: &mut ChaCha8Rng| -> u8 {
        let u: f64 = rng.random();
        cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1) as u8
    };

    let sites: Vec<(f64, Vec<u8>)> = (0..k)
        .into_par_iter()
        .map(|site| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(site as u64);
            let lambda = rates.sample(&mut rng);
            let mut states = vec![0u8; topo.num_vertices()];
            for &(v, parent) in &order {
                states[v] = match parent {
                    None => draw(&mut rng),
                    Some((p, e)) => {
                        let keep = (-lambda * tree.weight(e)).exp();
                        if rng.random::<f64>() < keep {
                            states[p]
                        } else {
                            draw(&mut rng)
                        }
                    }
                };
            }
            states.truncate(n);
            (lambda, states)
        })
        .collect();

    let mut data = vec![0u8; k * n];
    let mut lambdas = Vec::with_capacity(k);
    for (site, (lambda, row)) in sites.into_iter().enumerate() {
        lambdas.push(lambda);
        for (leaf, x) in row.into_iter().enumerate() {
            data[leaf * k + site] = x;
        }
    }
    Ok(SimulatedAlignment {
        alignment: Alignment::from_leaf_major(k, n, model.r(), data)?,
        hidden_lambdas: lambdas,
    })
}
