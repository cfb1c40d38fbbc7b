//! Distance estimates from one bin of sites, and the distorted-metric check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clustering::{agreement_matrix_on, ClusteringError};
use crate::matrix::SymMatrix;
use crate::model::{Alignment, SubstitutionModel};

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("bin is empty")]
    EmptyBin,
    #[error("matrix is not symmetric or has the wrong size")]
    Asymmetric,
    #[error("label count {labels} does not match matrix size {n}")]
    LabelCount { labels: usize, n: usize },
    #[error(transparent)]
    Clustering(ClusteringError),
}

pub type Result<T> = std::result::Result<T, DistanceError>;

/// `q_hat*`: normalized agreement over the sites of one bin.
pub fn bin_agreement(a: &Alignment, bin: &[usize], model: &SubstitutionModel) -> Result<SymMatrix> {
    match agreement_matrix_on(a, bin, model) {
        Ok(q) => Ok(q.into_matrix()),
        Err(ClusteringError::EmptySites) => Err(DistanceError::EmptyBin),
        Err(e) => Err(DistanceError::Clustering(e)),
    }
}

/// Symmetric leaf distances with `+inf` for censored pairs. Finite
/// off-diagonal entries are strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortedMetric {
    d: SymMatrix,
    labels: Vec<String>,
    /// Bin the estimate came from, if any.
    pub source_bin: Option<usize>,
    /// Number of sites behind the estimate.
    pub k_star: usize,
}

impl DistortedMetric {
    /// Wraps a matrix. The diagonal is forced to zero; labels default to
    /// `leaf_<i>`.
    pub fn new(mut d: SymMatrix, labels: Option<Vec<String>>) -> Result<Self> {
        let n = d.n();
        let labels = labels.unwrap_or_else(|| (0..n).map(|i| format!("leaf_{i}")).collect());
        if labels.len() != n {
            return Err(DistanceError::LabelCount {
                labels: labels.len(),
                n,
            });
        }
        for i in 0..n {
            d.set(i, i, 0.0);
        }
        Ok(DistortedMetric {
            d,
            labels,
            source_bin: None,
            k_star: 0,
        })
    }

    pub fn from_row_major(n: usize, data: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let d = SymMatrix::from_row_major(n, data).ok_or(DistanceError::Asymmetric)?;
        Self::new(d, labels)
    }

    pub fn n(&self) -> usize {
        self.d.n()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.d.get(u, v)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.d
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(DistanceError::LabelCount {
                labels: labels.len(),
                n: self.n(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    /// Every entry multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        DistortedMetric {
            d: self.d.map(|x| x * factor),
            ..self.clone()
        }
    }

    /// Finite off-diagonal entries.
    pub fn finite_entries(&self) -> Vec<f64> {
        self.d
            .upper_triangle()
            .map(|(_, _, x)| x)
            .filter(|x| x.is_finite())
            .collect()
    }
}

/// `-ln(q)` for `q > 0`, `+inf` for `q <= 0`. Values at or above 1 give
/// the smallest positive distance.
pub fn distance_from_agreement(q: f64) -> f64 {
    if q > 0.0 {
        (-q.ln()).max(f64::MIN_POSITIVE)
    } else {
        f64::INFINITY
    }
}

pub fn distorted_metric(qstar: &SymMatrix) -> DistortedMetric {
    DistortedMetric::new(qstar.map(distance_from_agreement), None).expect("labels match by construction")
}

/// Outcome of checking the short-distance accuracy condition.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionReport {
    pub tau: f64,
    pub psi: f64,
    /// Pairs where either value is below `psi + tau`.
    pub short_pairs: usize,
    /// `(u, v, truth, estimate)` for every pair that breaks the condition.
    pub violations: Vec<(usize, usize, f64, f64)>,
}

impl DistortionReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that whenever the truth or the estimate is below `psi + tau`,
/// the two differ by less than `tau`.
pub fn verify_distortion(dhat: &DistortedMetric, truth: &SymMatrix, tau: f64, psi: f64) -> DistortionReport {
    let mut short_pairs = 0;
    let mut violations = Vec::new();
    for (u, v, d) in truth.upper_triangle() {
        let e = dhat.get(u, v);
        if d < psi + tau || e < psi + tau {
            short_pairs += 1;
            if !((d - e).abs() < tau) {
                violations.push((u, v, d, e));
            }
        }
    }
    DistortionReport {
        tau,
        psi,
        short_pairs,
        violations,
    }
}

/// Synthetic distortion of an exact metric: entries below `psi` get
/// independent uniform noise in `[-noise, noise]`, the rest become `+inf`.
/// With `noise < tau` the result is a `(tau, psi)`-distortion.
pub fn inject_distortion(exact: &SymMatrix, noise: f64, psi: f64, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = exact.clone();
    for (u, v, d) in exact.upper_triangle() {
        let value = if d < psi {
            let e = if noise > 0.0 {
                rng.random_range(-noise..=noise)
            } else {
                0.0
            };
            (d + e).max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        out.set(u, v, value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Phylogeny;

    #[test]
    fn transform_values() {
        assert_eq!(distance_from_agreement(1.0), f64::MIN_POSITIVE);
        assert_eq!(distance_from_agreement(1.3), f64::MIN_POSITIVE);
        assert!((distance_from_agreement((-2.0f64).exp()) - 2.0).abs() < 1e-15);
        assert_eq!(distance_from_agreement(-0.01), f64::INFINITY);
        assert_eq!(distance_from_agreement(0.0), f64::INFINITY);
    }

    #[test]
    fn metric_shape() {
        let q = SymMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.5 - 0.3 * (i + j) as f64 });
        let d = distorted_metric(&q);
        assert_eq!(d.get(0, 0), 0.0);
        assert!((d.get(0, 1) - (-(0.2f64).ln())).abs() < 1e-15);
        assert_eq!(d.get(1, 2), f64::INFINITY);
        assert_eq!(d.finite_entries().len(), 1);
        assert_eq!(d.labels()[2], "leaf_2");
    }

    #[test]
    fn asymmetric_rejected() {
        assert_eq!(
            DistortedMetric::from_row_major(2, vec![0.0, 1.0, 2.0, 0.0], None),
            Err(DistanceError::Asymmetric)
        );
        assert!(DistortedMetric::new(SymMatrix::zeros(2), Some(vec!["a".into()])).is_err());
    }

    #[test]
    fn identical_leaves_on_bin() {
        let a = Alignment::from_sites(3, 2, &[vec![0, 0, 1], vec![1, 1, 1], vec![0, 0, 0]]).unwrap();
        let q = bin_agreement(&a, &[0, 2], &SubstitutionModel::poisson(2).unwrap()).unwrap();
        assert_eq!(q.get(0, 1), 1.0);
        assert_eq!(q.get(0, 2), 0.0);
        assert_eq!(
            bin_agreement(&a, &[], &SubstitutionModel::poisson(2).unwrap()),
            Err(DistanceError::EmptyBin)
        );
    }

    fn truth() -> SymMatrix {
        Phylogeny::parse_newick("(((a:0.1,b:0.2):0.15,e:0.3):0.1,(c:0.3,d:0.12):0.05);")
            .unwrap()
            .tree_metric()
            .scaled(1.3)
    }

    #[test]
    fn exact_passes() {
        let t = truth();
        let d = DistortedMetric::new(t.clone(), None).unwrap();
        let r = verify_distortion(&d, &t, 1e-9, 0.5);
        assert!(r.passes());
        assert!(r.short_pairs > 0);
    }

    #[test]
    fn half_tau_noise_and_censoring_pass() {
        let t = truth();
        let (tau, psi) = (0.02, 0.6);
        for seed in 0..20 {
            let d = DistortedMetric::new(inject_distortion(&t, tau / 2.0, psi, seed), None).unwrap();
            assert!(verify_distortion(&d, &t, tau, psi).passes());
        }
    }

    #[test]
    fn planted_violation() {
        let t = truth();
        let (tau, psi) = (0.02, 0.6);
        let mut m = t.clone();
        m.set(0, 1, t.get(0, 1) + 2.0 * tau);
        let r = verify_distortion(&DistortedMetric::new(m, None).unwrap(), &t, tau, psi);
        assert_eq!(r.violations.len(), 1);
        assert_eq!((r.violations[0].0, r.violations[0].1), (0, 1));
    }
}
