//! Binning sites by their clustering statistic and picking an abundant bin.

use thiserror::Error;

use crate::tree::RegularityParams;

#[derive(Debug, Error, PartialEq)]
pub enum BinningError {
    #[error("need at least 4 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("gamma_U = {requested} exceeds the largest admissible value {max}")]
    GammaTooLarge { requested: f64, max: f64 },
    #[error("gamma_U must be positive, got {0}")]
    GammaNotPositive(f64),
    #[error("no bin reaches the abundance threshold {threshold:.3}; best is bin {best_bin} with {best_count} sites")]
    NoAbundantBin {
        threshold: f64,
        best_bin: usize,
        best_count: usize,
    },
    #[error("statistic value at site {0} is not finite")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, BinningError>;

/// Constants governing the bins, all derived from `(f, g, M)`, `n` and the
/// bin-scale knob `gamma_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinningParams {
    /// Lower bound `g / M` on the rate of a site in range.
    pub lambda_lo: f64,
    /// Upper bound `2 / (1 - e^{-5g})`.
    pub lambda_hi: f64,
    /// Mass bound `(1 - e^{-5g}) / 2`.
    pub chi: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    pub gamma_u: f64,
    /// Bin width `gamma_u / ln n`.
    pub delta_u: f64,
    /// Number of interior bins.
    pub n_bins: usize,
    pub n: usize,
}

impl BinningParams {
    /// Derives every constant. Without a request, `gamma_u` is half of
    /// [`max_gamma_u`].
    pub fn derive(reg: &RegularityParams, n: usize, gamma_u: Option<f64>) -> Result<Self> {
        if n < 4 {
            return Err(BinningError::TooFewLeaves(n));
        }
        let RegularityParams { f, g, big_m } = *reg;
        let e5g = (-5.0 * g).exp();
        let lambda_lo = g / big_m;
        let lambda_hi = 2.0 / (1.0 - e5g);
        let u_lo = (-big_m * lambda_hi).exp();
        let u_hi = (-2.0 * f * lambda_lo).exp();
        let max = max_gamma_u(reg, n);
        let gamma_u = match gamma_u {
            None => max / 2.0,
            Some(x) if !(x > 0.0) => return Err(BinningError::GammaNotPositive(x)),
            Some(x) if x > max => return Err(BinningError::GammaTooLarge { requested: x, max }),
            Some(x) => x,
        };
        let delta_u = gamma_u / (n as f64).ln();
        let n_bins = ((u_hi - u_lo + 2.0 * delta_u) / delta_u).ceil() as usize;
        Ok(BinningParams {
            lambda_lo,
            lambda_hi,
            chi: (1.0 - e5g) / 2.0,
            u_lo,
            u_hi,
            gamma_u,
            delta_u,
            n_bins,
            n,
        })
    }

    /// Lower edge of interior bin `j >= 1`.
    pub fn lower_edge(&self, j: usize) -> f64 {
        self.u_lo - self.delta_u + (j as f64 - 1.0) * self.delta_u
    }

    /// Upper edge of interior bin `j >= 1`; the last bin stops at
    /// `u_hi + delta_u`.
    pub fn upper_edge(&self, j: usize) -> f64 {
        (self.u_lo - self.delta_u + j as f64 * self.delta_u).min(self.range_end())
    }

    fn range_start(&self) -> f64 {
        self.u_lo - self.delta_u
    }

    fn range_end(&self) -> f64 {
        self.u_hi + self.delta_u
    }

    /// Bin index for a value: 0 outside `[u_lo - delta, u_hi + delta)`,
    /// otherwise the half-open interior bin containing it.
    pub fn bin_of(&self, u: f64) -> usize {
        if !(u >= self.range_start() && u < self.range_end()) {
            return 0;
        }
        let mut j = ((u - self.range_start()) / self.delta_u).floor() as usize + 1;
        j = j.clamp(1, self.n_bins);
        // Guard the float division against landing one bin off.
        if j > 1 && u < self.lower_edge(j) {
            j -= 1;
        } else if j < self.n_bins && u >= self.lower_edge(j + 1) {
            j += 1;
        }
        j
    }
}

/// Largest `gamma_u` for which the guard bins stay inside
/// `[e^{-2 M lambda_hi}, e^{-f lambda_lo}]`, when doubled.
pub fn max_gamma_u(reg: &RegularityParams, n: usize) -> f64 {
    let RegularityParams { f, g, big_m } = *reg;
    let lambda_lo = g / big_m;
    let lambda_hi = 2.0 / (1.0 - (-5.0 * g).exp());
    let u_lo = (-big_m * lambda_hi).exp();
    let u_hi = (-2.0 * f * lambda_lo).exp();
    let top = ((-f * lambda_lo).exp() - u_hi) / 2.0;
    let bottom = (u_lo - (-2.0 * big_m * lambda_hi).exp()) / 2.0;
    top.min(bottom) * (n as f64).ln()
}

/// Sites grouped by bin. `bins[0]` holds the out-of-range sites.
#[derive(Clone, Debug, PartialEq)]
pub struct BinAssignment {
    pub bins: Vec<Vec<usize>>,
    /// `k chi / (6 N_U)`.
    pub threshold: f64,
}

impl BinAssignment {
    pub fn counts(&self) -> Vec<usize> {
        self.bins.iter().map(Vec::len).collect()
    }

    /// Sites in any interior bin.
    pub fn in_range(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.bins[1..].iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

pub fn bin_sites(u_values: &[f64], bp: &BinningParams) -> Result<BinAssignment> {
    let mut bins = vec![Vec::new(); bp.n_bins + 1];
    for (site, &u) in u_values.iter().enumerate() {
        if !u.is_finite() {
            return Err(BinningError::NonFinite(site));
        }
        bins[bp.bin_of(u)].push(site);
    }
    Ok(BinAssignment {
        bins,
        threshold: u_values.len() as f64 * bp.chi / (6.0 * bp.n_bins as f64),
    })
}

/// The interior bin with the most sites, lowest index on ties, provided it
/// reaches the abundance threshold.
pub fn select_abundant(ba: &BinAssignment) -> Result<usize> {
    let mut best = 1;
    for j in 2..ba.bins.len() {
        if ba.bins[j].len() > ba.bins[best].len() {
            best = j;
        }
    }
    let count = ba.bins.get(best).map_or(0, Vec::len);
    if count > 0 && count as f64 >= ba.threshold {
        Ok(best)
    } else {
        Err(BinningError::NoAbundantBin {
            threshold: ba.threshold,
            best_bin: best,
            best_count: count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> RegularityParams {
        RegularityParams::new(0.1, 0.2, 1.2).unwrap()
    }

    #[test]
    fn derived_constants() {
        let bp = BinningParams::derive(&reg(), 128, None).unwrap();
        assert!((bp.chi - (1.0 - (-1.0f64).exp()) / 2.0).abs() < 1e-15);
        assert!((bp.chi - 0.31606).abs() < 1e-5);
        assert!((bp.lambda_lo - 1.0 / 6.0).abs() < 1e-15);
        assert!((bp.lambda_hi - 3.1639).abs() < 1e-4);
        assert!((bp.u_lo.ln() + 1.2 * bp.lambda_hi).abs() < 1e-12);
        assert!((bp.u_hi.ln() + 1.0 / 30.0).abs() < 1e-12);
        assert!(bp.n_bins >= 3);
        assert!(0.0 < bp.u_lo && bp.u_lo < bp.u_hi && bp.u_hi < 1.0);
    }

    #[test]
    fn default_gamma_satisfies_guards() {
        let r = reg();
        for n in [4, 16, 128, 4096] {
            let bp = BinningParams::derive(&r, n, None).unwrap();
            assert!(bp.u_hi + 2.0 * bp.delta_u <= (-r.f * bp.lambda_lo).exp());
            assert!(bp.u_lo - 2.0 * bp.delta_u >= (-2.0 * r.big_m * bp.lambda_hi).exp());
        }
    }

    #[test]
    fn gamma_request_checked() {
        let max = max_gamma_u(&reg(), 128);
        assert!(BinningParams::derive(&reg(), 128, Some(max)).is_ok());
        assert!(matches!(
            BinningParams::derive(&reg(), 128, Some(max * 1.01)),
            Err(BinningError::GammaTooLarge { .. })
        ));
        assert!(BinningParams::derive(&reg(), 128, Some(0.0)).is_err());
        assert_eq!(
            BinningParams::derive(&reg(), 3, None),
            Err(BinningError::TooFewLeaves(3))
        );
    }

    #[test]
    fn boundaries() {
        let bp = BinningParams::derive(&reg(), 128, None).unwrap();
        assert_eq!(bp.bin_of(bp.u_lo - 2.0 * bp.delta_u), 0);
        assert_eq!(bp.bin_of(bp.u_lo - bp.delta_u), 1);
        assert_eq!(bp.bin_of(bp.u_hi + bp.delta_u), 0);
        assert_eq!(bp.bin_of(1.0), 0);
        assert_eq!(bp.bin_of(f64::NAN), 0);
        for j in 1..=bp.n_bins {
            assert_eq!(bp.bin_of(bp.lower_edge(j)), j);
        }
    }

    #[test]
    fn histogram_oracle() {
        let bp = BinningParams::derive(&reg(), 128, Some(0.01)).unwrap();
        let lo = bp.u_lo - 3.0 * bp.delta_u;
        let hi = bp.u_hi + 3.0 * bp.delta_u;
        let k = 10_007;
        let u: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
        let ba = bin_sites(&u, &bp).unwrap();
        // Independent count: edges via explicit multiplication, not division.
        for j in 1..=bp.n_bins {
            let (a, b) = (bp.lower_edge(j), bp.upper_edge(j));
            let want = u.iter().filter(|&&x| a <= x && x < b).count();
            assert_eq!(ba.bins[j].len(), want, "bin {j}");
        }
        assert_eq!(ba.counts().iter().sum::<usize>(), k);
    }

    #[test]
    fn abundance() {
        let bp = BinningParams::derive(&reg(), 128, None).unwrap();
        let mid = (bp.u_lo + bp.u_hi) / 2.0;
        let ba = bin_sites(&vec![mid; 100], &bp).unwrap();
        assert_eq!(select_abundant(&ba).unwrap(), bp.bin_of(mid));
        let out = bin_sites(&vec![1.0; 100], &bp).unwrap();
        assert!(matches!(
            select_abundant(&out),
            Err(BinningError::NoAbundantBin { best_count: 0, .. })
        ));
        assert!(bin_sites(&[f64::INFINITY], &bp).is_err());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let bp = BinningParams::derive(&reg(), 128, None).unwrap();
        let (a, b) = (bp.lower_edge(3), bp.lower_edge(5));
        let ba = bin_sites(&[b, a, b, a], &bp).unwrap();
        assert_eq!(select_abundant(&ba).unwrap(), 3);
    }
}
