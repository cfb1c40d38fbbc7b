//! Dense symmetric matrices indexed by leaf pairs.

/// A symmetric `n × n` matrix of `f64` stored in full row-major form.
///
/// Entries may be `+inf` (censored distances); the diagonal is whatever the
/// owner puts there, usually zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, 0.0)
    }

    pub fn filled(n: usize, value: f64) -> Self {
        SymMatrix {
            n,
            data: vec![value; n * n],
        }
    }

    /// Builds a matrix from a row-major vector, returning `None` if the
    /// length is wrong or the entries are not symmetric (NaN never matches).
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Option<Self> {
        if data.len() != n * n {
            return None;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if a != b {
                    return None;
                }
            }
        }
        Some(SymMatrix { n, data })
    }

    /// Builds a matrix from a function evaluated on the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_is_symmetric() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 2, 1.5);
        assert_eq!(m.get(2, 0), 1.5);
        assert_eq!(m.upper_triangle().count(), 3);
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrix::from_row_major(2, vec![0.0, 1.0, 2.0, 0.0]).is_none());
        assert!(SymMatrix::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).is_some());
        assert!(SymMatrix::from_row_major(2, vec![0.0; 3]).is_none());
    }
}
