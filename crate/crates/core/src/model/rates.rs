//! Per-site rate scaling laws and their Laplace transform `Phi(s) = E[exp(-s L)]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};

use super::{ModelError, Result};
use crate::tree::RegularityParams;

const PHI_INV_TOL: f64 = 1e-12;
const LOGNORMAL_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Constant,
    Discrete(Vec<(f64, f64)>),
    Gamma(f64),
    LogNormal(f64),
}

/// Distribution of the rate multiplier, always normalized to mean 1 with no
/// mass at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RateDistribution {
    kind: Kind,
}

impl RateDistribution {
    pub fn constant() -> Self {
        RateDistribution { kind: Kind::Constant }
    }

    /// Finite mixture of `(rate, probability)` points. Probabilities must sum
    /// to 1; rates are rescaled so the mean is exactly 1.
    pub fn discrete(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(ModelError::InvalidRates("empty support".into()));
        }
        for &(l, p) in points {
            if !(l >= 0.0 && l.is_finite()) || !(p >= 0.0 && p.is_finite()) {
                return Err(ModelError::InvalidRates(format!("bad point ({l}, {p})")));
            }
            if l == 0.0 && p > 0.0 {
                return Err(ModelError::AtomAtZero);
            }
        }
        let total: f64 = points.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidRates(format!("probabilities sum to {total}")));
        }
        let mean: f64 = points.iter().map(|&(l, p)| l * p).sum::<f64>() / total;
        if mean <= 0.0 {
            return Err(ModelError::ZeroMean);
        }
        let support = points
            .iter()
            .filter(|&&(_, p)| p > 0.0)
            .map(|&(l, p)| (l / mean, p / total))
            .collect();
        Ok(RateDistribution {
            kind: Kind::Discrete(support),
        })
    }

    /// Gamma with shape `a` and rate `a` (mean 1).
    pub fn gamma(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(ModelError::InvalidRates(format!("gamma shape {shape}")));
        }
        Ok(RateDistribution {
            kind: Kind::Gamma(shape),
        })
    }

    /// Log-normal with log-scale `sigma` and location `-sigma^2 / 2` (mean 1).
    pub fn lognormal(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ModelError::InvalidRates(format!("lognormal sigma {sigma}")));
        }
        Ok(RateDistribution {
            kind: Kind::LogNormal(sigma),
        })
    }

    /// `(rate, probability)` support points for finitely supported laws;
    /// `constant` is the single point `(1, 1)`.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            Kind::Constant => Some(vec![(1.0, 1.0)]),
            Kind::Discrete(points) => Some(points.clone()),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(points) => points.iter().map(|&(l, p)| l * p).sum(),
            _ => 1.0,
        }
    }

    /// `Phi(s) = E[exp(-s L)]` for `s >= 0`.
    pub fn phi(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(ModelError::OutOfRange(format!("phi needs s >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok(match &self.kind {
            Kind::Constant => (-s).exp(),
            Kind::Discrete(points) => points.iter().map(|&(l, p)| p * (-s * l).exp()).sum(),
            Kind::Gamma(a) => (1.0 + s / a).powf(-a),
            Kind::LogNormal(sigma) => lognormal_phi(*sigma, s),
        })
    }

    /// The unique `s >= 0` with `Phi(s) = y`, by bracket doubling then
    /// bisection to an absolute tolerance of 1e-12.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(ModelError::OutOfRange(format!("phi_inverse needs 0 < y <= 1, got {y}")));
        }
        if y == 1.0 {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.phi(hi)? > y {
            lo = hi;
            hi *= 2.0;
            if hi > 1e15 {
                return Err(ModelError::BelowInfimum(y));
            }
        }
        for _ in 0..200 {
            if hi - lo <= PHI_INV_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.phi(mid)? > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Constant => 1.0,
            Kind::Discrete(points) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(l, p) in points {
                    acc += p;
                    if u < acc {
                        return l;
                    }
                }
                points.last().map(|&(l, _)| l).unwrap_or(1.0)
            }
            Kind::Gamma(a) => Gamma::new(*a, 1.0 / a).expect("validated shape").sample(rng),
            Kind::LogNormal(sigma) => LogNormal::new(-sigma * sigma / 2.0, *sigma)
                .expect("validated sigma")
                .sample(rng),
        }
    }
}

fn lognormal_phi(sigma: f64, s: f64) -> f64 {
    let loc = -sigma * sigma / 2.0;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |z: f64| (-s * (loc + sigma * z).exp()).exp() * (-0.5 * z * z).exp() / norm;
    // Jensen: Phi(s) >= exp(-s), so this absolute target is a relative one.
    let target = LOGNORMAL_REL_TOL * (-s).exp() * 0.1;
    // The normal density underflows past |z| = 38.
    let mut total = 0.0;
    for w in [-38.0, -8.0, -3.0, 0.0, 3.0, 8.0, 38.0].windows(2) {
        total += quadrature::integrate(integrand, w[0], w[1], target / 6.0).integral;
    }
    total
}

impl FromStr for RateDistribution {
    type Err = ModelError;

    /// Grammar: `constant`, `discrete:l1,p1;l2,p2;...`, `gamma:shape`,
    /// `lognormal:sigma`.
    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = || ModelError::InvalidRates(format!("cannot parse rate spec {spec:?}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (spec, None),
        };
        match (name, arg) {
            ("constant", None) => Ok(Self::constant()),
            ("gamma", Some(a)) => Self::gamma(num(a)?),
            ("lognormal", Some(a)) => Self::lognormal(num(a)?),
            ("discrete", Some(a)) => {
                let mut points = Vec::new();
                for item in a.split(';').filter(|s| !s.trim().is_empty()) {
                    let (l, p) = item.split_once(',').ok_or_else(bad)?;
                    points.push((num(l)?, num(p)?));
                }
                Self::discrete(&points)
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for RateDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Constant => write!(f, "constant"),
            Kind::Gamma(a) => write!(f, "gamma:{a}"),
            Kind::LogNormal(s) => write!(f, "lognormal:{s}"),
            Kind::Discrete(points) => {
                write!(f, "discrete:")?;
                for (i, (l, p)) in points.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{l},{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Outcome of checking `Phi^{-1}(e^{-6g}) <= M`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub holds: bool,
    /// `Phi^{-1}(e^{-6g})`.
    pub phi_inv_6g: f64,
    /// `m = Phi^{-1}(e^{-5g})`, the close-pair radius.
    pub m: f64,
    /// Whether `5g <= m < M`; implied by `holds`.
    pub m_bracketed: bool,
}

pub fn check_assumption(rates: &RateDistribution, params: &RegularityParams) -> Result<AssumptionReport> {
    let g = params.g;
    let phi_inv_6g = rates.phi_inverse((-6.0 * g).exp())?;
    let m = rates.phi_inverse((-5.0 * g).exp())?;
    // Bisection tolerance can put m a hair under 5g for the constant law.
    let m_bracketed = m >= 5.0 * g - 1e-9 && m < params.big_m;
    Ok(AssumptionReport {
        // Allow the bisection tolerance so that M = 6g passes for constant rates.
        holds: phi_inv_6g <= params.big_m + PHI_INV_TOL,
        phi_inv_6g,
        m,
        m_bracketed,
    })
}
