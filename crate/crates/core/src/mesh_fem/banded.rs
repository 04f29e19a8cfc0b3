use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a banded matrix.
///
/// Rows are stored in windows of width `2 kl + ku + 1` so that row swaps during
/// pivoting never leave the band.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors a CSR matrix using its own bandwidth for `kl = ku`.
    pub fn factor_csr(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.dim();
        let band = matrix.half_bandwidth();
        let mut lu = Self::zeros(n, band, band);
        for row in 0..n {
            for (col, v) in matrix.row(row) {
                *lu.entry_mut(row, col) = v;
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + col + self.kl - row
    }

    #[inline]
    fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[self.idx(row, col)]
    }

    #[inline]
    fn entry_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        let k = self.idx(row, col);
        &mut self.data[k]
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.entry(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.entry(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(Error::SingularMatrix(k));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.entry(k, k);
            for i in k + 1..=last_row {
                let l = self.entry(i, k) / pivot;
                *self.entry_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = self.entry(k, j);
                        *self.entry_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut b = rhs.to_vec();
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.entry(i, k) * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                acc -= self.entry(i, j) * b[j];
            }
            b[i] = acc / self.entry(i, i);
        }
        b
    }
}
