use crate::matrix::SymMatrix;

use super::{Result, TreeError};

/// A resolved four-leaf split, relative to the order `[a, b, c, e]` the
/// leaves were passed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuartetSplit {
    /// `ab|ce`
    AbCe,
    /// `ac|be`
    AcBe,
    /// `ae|bc`
    AeBc,
    /// The smallest pairwise sum is tied.
    Unresolved,
}

/// Four-point split with its margin: the gap between the smallest and the
/// second-smallest of the three pairwise sums. A margin of zero means the
/// split is `Unresolved`.
pub fn four_point_margin(d: &SymMatrix, q: [usize; 4]) -> Result<(QuartetSplit, f64)> {
    let [a, b, c, e] = q;
    for (i, j) in [(a, b), (a, c), (a, e), (b, c), (b, e), (c, e)] {
        let x = d.get(i, j);
        if !x.is_finite() {
            return Err(TreeError::NonFiniteDistance(x));
        }
    }
    let sums = [
        (QuartetSplit::AbCe, d.get(a, b) + d.get(c, e)),
        (QuartetSplit::AcBe, d.get(a, c) + d.get(b, e)),
        (QuartetSplit::AeBc, d.get(a, e) + d.get(b, c)),
    ];
    let mut best = 0;
    for i in 1..3 {
        if sums[i].1 < sums[best].1 {
            best = i;
        }
    }
    let runner_up = (0..3)
        .filter(|&i| i != best)
        .map(|i| sums[i].1)
        .fold(f64::INFINITY, f64::min);
    let margin = runner_up - sums[best].1;
    if margin > 0.0 {
        Ok((sums[best].0, margin))
    } else {
        Ok((QuartetSplit::Unresolved, 0.0))
    }
}

/// The split `xy|zw` whose within-pair sum `d(x,y) + d(z,w)` is strictly
/// smallest, or `Unresolved` on a tie.
pub fn four_point_topology(d: &SymMatrix, q: [usize; 4]) -> Result<QuartetSplit> {
    four_point_margin(d, q).map(|(split, _)| split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartet_metric(internal: f64) -> SymMatrix {
        // ((a,b),(c,e)) with unit pendant edges.
        SymMatrix::from_fn(4, |i, j| {
            if i == j {
                0.0
            } else if (i < 2) == (j < 2) {
                2.0
            } else {
                2.0 + internal
            }
        })
    }

    #[test]
    fn exact_quartet() {
        let d = quartet_metric(2.0);
        assert_eq!(four_point_topology(&d, [0, 1, 2, 3]).unwrap(), QuartetSplit::AbCe);
        assert_eq!(four_point_topology(&d, [0, 2, 1, 3]).unwrap(), QuartetSplit::AcBe);
        assert_eq!(four_point_topology(&d, [0, 2, 3, 1]).unwrap(), QuartetSplit::AeBc);
        let (_, margin) = four_point_margin(&d, [0, 1, 2, 3]).unwrap();
        assert_eq!(margin, 4.0);
    }

    #[test]
    fn star_is_unresolved() {
        let d = SymMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { 2.0 });
        assert_eq!(four_point_topology(&d, [0, 1, 2, 3]).unwrap(), QuartetSplit::Unresolved);
    }

    #[test]
    fn noise_below_half_internal_edge() {
        // Internal edge 2: the correct sum is smaller by 4. Each of the six
        // entries moved by < 1 can shift any sum difference by < 4. Enumerate
        // the extreme sign patterns at magnitude 0.999.
        let base = quartet_metric(2.0);
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for mask in 0..64u32 {
            let mut d = base.clone();
            for (bit, &(i, j)) in pairs.iter().enumerate() {
                let s = if mask & (1 << bit) != 0 { 0.999 } else { -0.999 };
                d.set(i, j, base.get(i, j) + s);
            }
            assert_eq!(four_point_topology(&d, [0, 1, 2, 3]).unwrap(), QuartetSplit::AbCe);
        }
    }

    #[test]
    fn infinite_entry_rejected() {
        let mut d = quartet_metric(2.0);
        d.set(0, 3, f64::INFINITY);
        assert!(four_point_topology(&d, [0, 1, 2, 3]).is_err());
        d.set(0, 3, f64::NAN);
        assert!(four_point_topology(&d, [0, 1, 2, 3]).is_err());
    }
}
