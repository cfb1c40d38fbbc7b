//! Site clustering: agreement estimates, close pairs, sparsification and the
//! per-site statistic.

mod sparsify;
mod statistic;

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::SymMatrix;
use crate::model::{Alignment, SubstitutionModel};
use crate::tree::TreeError;

pub use sparsify::{certify, close_pairs, oracle_sparsify, sparsify, sparsity_gamma, SparsityCertificate};
pub use statistic::{
    expected_statistic, expected_statistic_curve, full_sum_statistic, site_statistic, site_statistics,
};

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("pair set is empty")]
    EmptyPairSet,
    #[error("site set is empty")]
    EmptySites,
    #[error("site {site} out of range for k={k}")]
    SiteOutOfRange { site: usize, k: usize },
    #[error("leaf {leaf} out of range for n={n}")]
    LeafOutOfRange { leaf: usize, n: usize },
    #[error("pair ({0}, {0}) joins a leaf to itself")]
    SelfPair(usize),
    #[error("pair ({0}, {1}) appears twice")]
    DuplicatePair(usize, usize),
    #[error("need 4g < m < M, got g={g}, m={m}, M={big_m}")]
    ParamOrder { g: f64, m: f64, big_m: f64 },
    #[error("alignment has {alignment} leaves but the tree has {tree}")]
    LeafCountMismatch { alignment: usize, tree: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T> = std::result::Result<T, ClusteringError>;

/// Empirical normalized agreement `q_hat(a, b)`, the average over sites of
/// `(1{agree} - q_inf) / p_inf`. The diagonal is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementMatrix {
    q: SymMatrix,
    k: usize,
}

impl AgreementMatrix {
    pub fn n(&self) -> usize {
        self.q.n()
    }

    /// Number of sites averaged over.
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.q.get(a, b)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.q
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.q
    }
}

/// `q_hat` over every site.
pub fn agreement_matrix(a: &Alignment, model: &SubstitutionModel) -> AgreementMatrix {
    agreement_from_counts(a.n(), a.k(), model, |x, y| {
        let (rx, ry) = (a.leaf_row(x), a.leaf_row(y));
        rx.iter().zip(ry).filter(|(p, q)| p == q).count()
    })
}

/// `q_hat` restricted to a subset of sites.
pub fn agreement_matrix_on(a: &Alignment, sites: &[usize], model: &SubstitutionModel) -> Result<AgreementMatrix> {
    if sites.is_empty() {
        return Err(ClusteringError::EmptySites);
    }
    if let Some(&site) = sites.iter().find(|&&s| s >= a.k()) {
        return Err(ClusteringError::SiteOutOfRange { site, k: a.k() });
    }
    Ok(agreement_from_counts(a.n(), sites.len(), model, |x, y| {
        let (rx, ry) = (a.leaf_row(x), a.leaf_row(y));
        sites.iter().filter(|&&s| rx[s] == ry[s]).count()
    }))
}

fn agreement_from_counts(
    n: usize,
    k: usize,
    model: &SubstitutionModel,
    count: impl Fn(usize, usize) -> usize + Sync,
) -> AgreementMatrix {
    let c = model.agreement();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            ((x + 1)..n)
                .map(|y| c.normalize(count(x, y) as f64 / k as f64))
                .collect()
        })
        .collect();
    let mut q = SymMatrix::zeros(n);
    for (x, row) in rows.into_iter().enumerate() {
        q.set(x, x, 1.0);
        for (offset, v) in row.into_iter().enumerate() {
            q.set(x, x + 1 + offset, v);
        }
    }
    AgreementMatrix { q, k }
}

/// The agreement thresholds, all functions of the maximum edge weight `g`:
/// `omega = e^{-5g}`, `omega_plus = e^{-5.5g}`, `omega_minus = e^{-4.5g}`,
/// and `eta`, the smallest gap between consecutive half-step levels from
/// `e^{-4g}` to `e^{-6g}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusteringThresholds {
    pub omega: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub eta: f64,
}

impl ClusteringThresholds {
    pub fn from_g(g: f64) -> Self {
        let level = |c: f64| (-c * g).exp();
        let eta = [4.0, 4.5, 5.0, 5.5]
            .iter()
            .map(|&c| level(c) - level(c + 0.5))
            .fold(f64::INFINITY, f64::min);
        ClusteringThresholds {
            omega: level(5.0),
            omega_plus: level(5.5),
            omega_minus: level(4.5),
            eta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Built from the true tree metric.
    Oracle,
    /// Built from agreement estimates alone.
    DataDriven,
}

/// Unordered distinct leaf pairs, each stored as `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
    provenance: Provenance,
}

impl PairSet {
    pub fn new(pairs: Vec<(usize, usize)>, provenance: Provenance) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            if a == b {
                return Err(ClusteringError::SelfPair(a));
            }
            let p = (a.min(b), a.max(b));
            if !seen.insert(p) {
                return Err(ClusteringError::DuplicatePair(p.0, p.1));
            }
            out.push(p);
        }
        Ok(PairSet { pairs: out, provenance })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn max_leaf(&self) -> Option<usize> {
        self.pairs.iter().map(|&(_, b)| b).max()
    }
}
