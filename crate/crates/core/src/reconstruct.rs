//! Topology recovery from a distorted metric by confirmed cherry merging.
//!
//! Each step looks at trusted pairs (estimate below `trust_cap`) from the
//! closest up. A pair `(a, b)` is confirmed as a cherry when, among its
//! nearest trusted witnesses, at least one quartet `ab|ce` is resolved with
//! margin above `4 tau` and no quartet resolves against it with such a
//! margin. The first confirmed pair is merged into a new node whose
//! distances are estimated from witness medians.

use thiserror::Error;

use crate::distance::{inject_distortion, DistortedMetric};
use crate::matrix::SymMatrix;
use crate::tree::{four_point_margin, Phylogeny, QuartetSplit, Topology, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum ReconstructionError {
    #[error("need at least 3 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("invalid reconstruction config: {0}")]
    InvalidConfig(String),
    #[error("no finite distances to derive a trust cap from")]
    NoFiniteEntries,
    #[error("no cherry can be confirmed with {remaining} nodes left; the trusted distances are too sparse (increase k or the trust cap)")]
    DisconnectedTrustGraph { remaining: usize },
    #[error("every candidate quartet margin is within 4 tau with {remaining} nodes left (lower tau or increase k)")]
    AmbiguousCherry { remaining: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T> = std::result::Result<T, ReconstructionError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionConfig {
    /// Only estimates strictly below this are used.
    pub trust_cap: f64,
    /// Per-entry noise tolerance; quartets need margin above `4 tau`.
    pub tau: f64,
    /// Witnesses consulted per candidate pair.
    pub witness_count: usize,
}

impl ReconstructionConfig {
    pub fn new(trust_cap: f64, tau: f64, witness_count: usize) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(ReconstructionError::InvalidConfig(format!("tau = {tau}")));
        }
        if !(trust_cap > 4.0 * tau) {
            return Err(ReconstructionError::InvalidConfig(format!(
                "trust_cap = {trust_cap} must exceed 4 tau = {}",
                4.0 * tau
            )));
        }
        if witness_count < 2 {
            return Err(ReconstructionError::InvalidConfig(
                "witness_count must be at least 2".into(),
            ));
        }
        Ok(ReconstructionConfig {
            trust_cap,
            tau,
            witness_count,
        })
    }

    /// Noiseless setting: everything finite is trusted.
    pub fn exact() -> Self {
        ReconstructionConfig {
            trust_cap: f64::INFINITY,
            tau: 0.0,
            witness_count: 10,
        }
    }

    /// Cap at three times the 20th percentile of the finite estimates,
    /// never above the largest finite one; `tau = 0`, 10 witnesses.
    pub fn from_data(dhat: &DistortedMetric) -> Result<Self> {
        let mut finite = dhat.finite_entries();
        if finite.is_empty() {
            return Err(ReconstructionError::NoFiniteEntries);
        }
        finite.sort_by(f64::total_cmp);
        let p20 = finite[(finite.len() - 1) / 5];
        let max = finite[finite.len() - 1];
        Self::new((3.0 * p20).min(max), 0.0, 10)
    }

    /// Cap and tolerance multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        ReconstructionConfig {
            trust_cap: self.trust_cap * c,
            tau: self.tau * c,
            ..*self
        }
    }
}

struct State {
    d: SymMatrix,
    active: Vec<usize>,
    cap: f64,
}

impl State {
    fn trusted(&self, x: usize, y: usize) -> bool {
        self.d.get(x, y) < self.cap
    }

    fn witnesses(&self, a: usize, b: usize, count: usize) -> Vec<usize> {
        let mut w: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&c| c != a && c != b && self.trusted(a, c) && self.trusted(b, c))
            .collect();
        let key = |c: usize| self.d.get(a, c).max(self.d.get(b, c));
        w.sort_by(|&x, &y| key(x).total_cmp(&key(y)).then(x.cmp(&y)));
        w.truncate(count);
        w
    }
}

enum Verdict {
    Confirmed,
    /// At least one decisive quartet, but not a clean confirmation.
    Rejected,
    /// No decisive quartet at all.
    Undecided,
    NoQuartet,
}

fn judge(state: &State, a: usize, b: usize, witnesses: &[usize], tau: f64) -> Verdict {
    let (mut support, mut against, mut evaluated) = (0, 0, 0);
    for (i, &c) in witnesses.iter().enumerate() {
        for &e in &witnesses[i + 1..] {
            if !state.trusted(c, e) {
                continue;
            }
            evaluated += 1;
            let (split, margin) = four_point_margin(&state.d, [a, b, c, e]).expect("trusted entries are finite");
            if margin <= 4.0 * tau {
                continue;
            }
            if split == QuartetSplit::AbCe {
                support += 1;
            } else {
                against += 1;
            }
        }
    }
    match (support, against, evaluated) {
        (_, _, 0) => Verdict::NoQuartet,
        (s, 0, _) if s > 0 => Verdict::Confirmed,
        (0, 0, _) => Verdict::Undecided,
        _ => Verdict::Rejected,
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// Recovers an unrooted binary topology whose leaves carry the metric's
/// labels.
pub fn reconstruct_topology(dhat: &DistortedMetric, cfg: &ReconstructionConfig) -> Result<Topology> {
    let n = dhat.n();
    if n < 3 {
        return Err(ReconstructionError::TooFewLeaves(n));
    }
    let total = 2 * n;
    let mut d = SymMatrix::filled(total, f64::INFINITY);
    for (u, v, x) in dhat.matrix().upper_triangle() {
        d.set(u, v, if x.is_nan() { f64::INFINITY } else { x });
    }
    let mut state = State {
        d,
        active: (0..n).collect(),
        cap: cfg.trust_cap,
    };
    let mut edges = Vec::with_capacity(2 * n - 3);
    let mut next = n;
    while state.active.len() > 3 {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (i, &a) in state.active.iter().enumerate() {
            for &b in &state.active[i + 1..] {
                if state.trusted(a, b) {
                    let (x, y) = (a.min(b), a.max(b));
                    candidates.push((state.d.get(a, b), x, y));
                }
            }
        }
        candidates.sort_by(|p, q| p.0.total_cmp(&q.0).then((p.1, p.2).cmp(&(q.1, q.2))));
        let mut chosen = None;
        let mut any_quartet = false;
        let mut any_decisive = false;
        for &(_, a, b) in &candidates {
            let w = state.witnesses(a, b, cfg.witness_count);
            match judge(&state, a, b, &w, cfg.tau) {
                Verdict::Confirmed => {
                    chosen = Some((a, b, w));
                    break;
                }
                Verdict::Rejected => {
                    any_quartet = true;
                    any_decisive = true;
                }
                Verdict::Undecided => any_quartet = true,
                Verdict::NoQuartet => {}
            }
        }
        let remaining = state.active.len();
        let (a, b, w) = match chosen {
            Some(c) => c,
            None if any_quartet && !any_decisive => {
                return Err(ReconstructionError::AmbiguousCherry { remaining });
            }
            None => return Err(ReconstructionError::DisconnectedTrustGraph { remaining }),
        };

        let dab = state.d.get(a, b);
        let mut la: Vec<f64> = w
            .iter()
            .map(|&c| (dab + state.d.get(a, c) - state.d.get(b, c)) / 2.0)
            .collect();
        let mut lb: Vec<f64> = w
            .iter()
            .map(|&c| (dab + state.d.get(b, c) - state.d.get(a, c)) / 2.0)
            .collect();
        let (la, lb) = (median(&mut la), median(&mut lb));
        let v = next;
        next += 1;
        state.active.retain(|&c| c != a && c != b);
        for &c in &state.active {
            let mut vals: Vec<f64> = [state.d.get(a, c) - la, state.d.get(b, c) - lb]
                .into_iter()
                .filter(|x| x.is_finite())
                .collect();
            let dv = if vals.is_empty() {
                f64::INFINITY
            } else {
                median(&mut vals)
            };
            state.d.set(v, c, dv);
        }
        state.active.push(v);
        edges.push((v, a));
        edges.push((v, b));
    }
    let center = next;
    for &c in &state.active {
        edges.push((center, c));
    }
    Ok(Topology::new(dhat.labels().to_vec(), edges)?)
}

/// Fraction of seeds for which the topology of `tree` is recovered from
/// `inject_distortion(scale * d, noise, psi, seed)`.
pub fn end_to_end_contract_check(
    tree: &Phylogeny,
    cfg: &ReconstructionConfig,
    noise: f64,
    psi: f64,
    scale: f64,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() {
        return Ok(1.0);
    }
    let exact = tree.tree_metric().scaled(scale);
    let truth = tree.topology();
    let mut passed = 0;
    for &seed in seeds {
        let noisy = inject_distortion(&exact, noise, psi, seed);
        let dhat = DistortedMetric::new(noisy, Some(tree.labels().to_vec())).expect("labels come from the tree");
        if let Ok(t) = reconstruct_topology(&dhat, cfg) {
            if crate::tree::robinson_foulds(truth, &t)? == 0 {
                passed += 1;
            }
        }
    }
    Ok(passed as f64 / seeds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{generate_caterpillar, generate_random_regular, robinson_foulds, RegularityParams};

    fn exact_metric(tree: &Phylogeny) -> DistortedMetric {
        DistortedMetric::new(tree.tree_metric().into_matrix(), Some(tree.labels().to_vec())).unwrap()
    }

    #[test]
    fn quartet_noiseless() {
        let tree = Phylogeny::parse_newick("((a:1,b:1):2,(c:1,e:1):0.5);").unwrap();
        let t = reconstruct_topology(&exact_metric(&tree), &ReconstructionConfig::exact()).unwrap();
        assert_eq!(robinson_foulds(tree.topology(), &t).unwrap(), 0);
    }

    #[test]
    fn caterpillar_noiseless() {
        let tree = generate_caterpillar(8, 0.3).unwrap();
        let t = reconstruct_topology(&exact_metric(&tree), &ReconstructionConfig::exact()).unwrap();
        assert_eq!(robinson_foulds(tree.topology(), &t).unwrap(), 0);
    }

    #[test]
    fn three_leaves_is_star() {
        let tree = Phylogeny::parse_newick("(a:1,b:1,c:1);").unwrap();
        let t = reconstruct_topology(&exact_metric(&tree), &ReconstructionConfig::exact()).unwrap();
        assert_eq!(t.num_edges(), 3);
    }

    #[test]
    fn censored_noisy_metric() {
        let params = RegularityParams::new(0.1, 0.2, 1.5).unwrap();
        let cfg = ReconstructionConfig::new(5.0 * 0.2 * 64f64.ln(), 0.1 / 5.0, 10).unwrap();
        for seed in 0..5 {
            let tree = generate_random_regular(64, &params, seed).unwrap();
            let rate = end_to_end_contract_check(&tree, &cfg, 0.01, cfg.trust_cap, 1.0, &[seed, seed + 100]).unwrap();
            assert_eq!(rate, 1.0, "seed {seed}");
        }
    }

    #[test]
    fn disconnected_when_nothing_trusted() {
        let tree = generate_caterpillar(6, 0.3).unwrap();
        let cfg = ReconstructionConfig::new(0.5, 0.0, 10).unwrap();
        assert!(matches!(
            reconstruct_topology(&exact_metric(&tree), &cfg),
            Err(ReconstructionError::DisconnectedTrustGraph { remaining: 6 })
        ));
    }

    #[test]
    fn ambiguous_when_tau_too_large() {
        let tree = generate_caterpillar(6, 0.3).unwrap();
        let cfg = ReconstructionConfig::new(f64::INFINITY, 1.0, 10).unwrap();
        assert!(matches!(
            reconstruct_topology(&exact_metric(&tree), &cfg),
            Err(ReconstructionError::AmbiguousCherry { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(ReconstructionConfig::new(1.0, 0.3, 10).is_err());
        assert!(ReconstructionConfig::new(1.0, -0.1, 10).is_err());
        assert!(ReconstructionConfig::new(1.0, 0.1, 1).is_err());
        let d = DistortedMetric::new(SymMatrix::filled(4, f64::INFINITY), None).unwrap();
        assert_eq!(
            ReconstructionConfig::from_data(&d),
            Err(ReconstructionError::NoFiniteEntries)
        );
    }

    #[test]
    fn data_driven_cap() {
        let d = DistortedMetric::from_row_major(3, vec![0.0, 1.0, 2.0, 1.0, 0.0, 10.0, 2.0, 10.0, 0.0], None).unwrap();
        let cfg = ReconstructionConfig::from_data(&d).unwrap();
        // Sorted finite entries [1, 2, 10]: 20th percentile is 1.
        assert_eq!(cfg.trust_cap, 3.0);
        let d = DistortedMetric::from_row_major(3, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0], None).unwrap();
        assert_eq!(ReconstructionConfig::from_data(&d).unwrap().trust_cap, 1.0);
    }
}
