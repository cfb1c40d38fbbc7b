//! The r-state Poisson substitution model with rates-across-sites scaling.

mod exact;
mod rates;
mod simulate;

use thiserror::Error;

pub use exact::{exact_leaf_distribution, exact_leaf_distribution_rooted, LeafDistribution};
pub use rates::{check_assumption, AssumptionReport, RateDistribution};
pub use simulate::{simulate_alignment, Alignment, SimulatedAlignment};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid substitution model: {0}")]
    InvalidModel(String),
    #[error("branch length must be non-negative, got {0}")]
    NegativeBranch(f64),
    #[error("invalid rate distribution: {0}")]
    InvalidRates(String),
    #[error("rate distribution has an atom at 0 (P[rate = 0] must be 0)")]
    AtomAtZero,
    #[error("rate distribution has mean 0")]
    ZeroMean,
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("{0} is below the infimum of the transform")]
    BelowInfimum(f64),
    #[error("instance too large for exact enumeration: n={n}, r={r}, max n=8, r=4")]
    TooLarge { n: usize, r: usize },
    #[error("exact enumeration needs a finitely supported rate distribution")]
    NotDiscrete,
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Stationary frequencies `pi` over an alphabet of size `r = pi.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionModel {
    pi: Vec<f64>,
}

impl SubstitutionModel {
    /// General model. Frequencies must be positive and sum to 1.
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.len() < 2 || pi.len() > 255 {
            return Err(ModelError::InvalidModel(format!(
                "alphabet size must be in 2..=255, got {}",
                pi.len()
            )));
        }
        if pi.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(ModelError::InvalidModel("frequencies must be positive".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidModel(format!("frequencies sum to {total}")));
        }
        Ok(SubstitutionModel { pi })
    }

    /// The r-state Poisson model: uniform stationary frequencies.
    pub fn poisson(r: usize) -> Result<Self> {
        if r < 2 {
            return Err(ModelError::InvalidModel(format!("alphabet size {r} < 2")));
        }
        Self::new(vec![1.0 / r as f64; r])
    }

    pub fn r(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.pi[0];
        self.pi.iter().all(|&p| p == first)
    }

    pub fn agreement(&self) -> AgreementConstants {
        let q_inf: f64 = self.pi.iter().map(|p| p * p).sum();
        AgreementConstants {
            q_inf,
            p_inf: 1.0 - q_inf,
        }
    }

    /// `M[x][x] = pi_x + (1 - pi_x) e^{-mu}`, `M[x][y] = pi_y (1 - e^{-mu})`.
    pub fn transition_matrix(&self, mu: f64) -> Result<Vec<Vec<f64>>> {
        if !(mu >= 0.0) {
            return Err(ModelError::NegativeBranch(mu));
        }
        let keep = (-mu).exp();
        let r = self.r();
        Ok((0..r)
            .map(|x| {
                (0..r)
                    .map(|y| {
                        if x == y {
                            self.pi[x] + (1.0 - self.pi[x]) * keep
                        } else {
                            self.pi[y] * (1.0 - keep)
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

/// `q_inf = sum pi_x^2` is the chance two independent stationary draws agree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgreementConstants {
    pub q_inf: f64,
    pub p_inf: f64,
}

impl AgreementConstants {
    /// `p_inf^{-1} (1{agree} - q_inf)`.
    #[inline]
    pub fn normalize(&self, agree_fraction: f64) -> f64 {
        (agree_fraction - self.q_inf) / self.p_inf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_zero() {
        let m = SubstitutionModel::poisson(4).unwrap().transition_matrix(0.0).unwrap();
        for (x, row) in m.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                assert_eq!(v, if x == y { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn stationary_limit() {
        let model = SubstitutionModel::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = model.transition_matrix(50.0).unwrap();
        for row in &m {
            for (v, p) in row.iter().zip(model.pi()) {
                assert!((v - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cfn_at_ln2() {
        let m = SubstitutionModel::poisson(2)
            .unwrap()
            .transition_matrix(2f64.ln())
            .unwrap();
        assert!((m[0][0] - 0.75).abs() < 1e-15);
        assert!((m[0][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let model = SubstitutionModel::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (f, g) = (0.1, 0.2);
        for mu in [0.0, f, g, 6.0 * g, 50.0] {
            for row in model.transition_matrix(mu).unwrap() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negative_branch_rejected() {
        let model = SubstitutionModel::poisson(2).unwrap();
        assert_eq!(model.transition_matrix(-0.1), Err(ModelError::NegativeBranch(-0.1)));
    }

    #[test]
    fn agreement_constants() {
        let c = SubstitutionModel::poisson(4).unwrap().agreement();
        assert!((c.q_inf - 0.25).abs() < 1e-15);
        assert!((c.normalize(1.0) - 1.0).abs() < 1e-15);
        assert!(c.normalize(0.25).abs() < 1e-15);
    }

    #[test]
    fn invalid_models() {
        assert!(SubstitutionModel::new(vec![0.5, 0.6]).is_err());
        assert!(SubstitutionModel::new(vec![1.0]).is_err());
        assert!(SubstitutionModel::new(vec![0.0, 1.0]).is_err());
    }
}
