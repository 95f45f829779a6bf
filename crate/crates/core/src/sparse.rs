//! Row-compressed matrices over interior unknowns and a banded LU without
//! pivoting.
//!
//! Every system solved here is a Z-matrix (nonpositive off-diagonal). Such a
//! matrix is a nonsingular M-matrix iff Gaussian elimination without pivoting
//! runs with strictly positive pivots, so a nonpositive pivot is reported as
//! [`FactorError::NotMMatrix`]: the shift has reached the principal eigenvalue
//! of the frozen operator.

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().cloned().zip(self.vals[r].iter().cloned())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        CsrMatrix::from_rows(rows)
    }

    /// `self - shift * I`.
    pub fn shifted(&self, shift: f64) -> CsrMatrix {
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<_> = self.row(i).collect();
                r.push((i, -shift));
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    lower = lower.max(i - c);
                } else {
                    upper = upper.max(c - i);
                }
            }
        }
        (lower, upper)
    }

    /// Largest positive off-diagonal entry, if any.
    pub fn max_offdiag(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                if c != i {
                    m = m.max(v);
                }
            }
        }
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    /// Pivot `pivot` at row `row` is not safely positive.
    NotMMatrix { row: usize, pivot: f64 },
}

/// LU factors of a banded matrix, stored row-wise over the band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    band: Vec<f64>,
    min_pivot: f64,
}

/// Pivots at or below `PIVOT_GUARD * ||A||_inf` count as singular.
pub const PIVOT_GUARD: f64 = 1e-13;

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, FactorError> {
        let n = a.dim();
        let (lower, upper) = a.bandwidths();
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        let idx = |i: usize, j: usize| i * width + (j + lower - i);
        for i in 0..n {
            for (c, v) in a.row(i) {
                band[idx(i, c)] = v;
            }
        }
        let guard = PIVOT_GUARD * a.inf_norm().max(f64::MIN_POSITIVE);
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let pivot = band[idx(k, k)];
            if pivot <= guard || !pivot.is_finite() {
                return Err(FactorError::NotMMatrix { row: k, pivot });
            }
            min_pivot = min_pivot.min(pivot);
            let row_end = (k + upper).min(n - 1);
            for i in (k + 1)..=(k + lower).min(n - 1) {
                let l = band[idx(i, k)];
                if l == 0.0 {
                    continue;
                }
                let m = l / pivot;
                band[idx(i, k)] = m;
                for j in (k + 1)..=row_end {
                    let u = band[idx(k, j)];
                    if u != 0.0 {
                        band[idx(i, j)] -= m * u;
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            lower,
            upper,
            width,
            band,
            min_pivot,
        })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (lower, upper, width) = (self.lower, self.upper, self.width);
        let idx = |i: usize, j: usize| i * width + (j + lower - i);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(lower);
            let mut s = x[i];
            for j in start..i {
                s -= self.band[idx(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + upper).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=end {
                s -= self.band[idx(i, j)] * x[j];
            }
            x[i] = s / self.band[idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplace_1d(6);
        let x: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin() + 1.0).collect();
        let b = a.matvec(&x);
        let lu = BandedLu::factor(&a).unwrap();
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_band_nonsymmetric() {
        let n = 25;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 6.0)];
                if i >= 5 {
                    r.push((i - 5, -1.5));
                }
                if i + 5 < n {
                    r.push((i + 5, -0.5));
                }
                if i >= 1 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -2.0));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        assert_eq!(a.bandwidths(), (5, 5));
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / 7.0).collect();
        let b = a.matvec(&x);
        let y = BandedLu::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
        let at = a.transpose();
        assert_eq!(at.get(0, 5), -1.5);
        assert_eq!(at.get(5, 0), -0.5);
    }

    #[test]
    fn shift_past_principal_eigenvalue_is_detected() {
        // Smallest eigenvalue of tridiag(-1, 2, -1) of size 4 is 2 - 2cos(pi/5).
        let a = laplace_1d(4);
        let lam = 2.0 - 2.0 * (std::f64::consts::PI / 5.0).cos();
        assert!(BandedLu::factor(&a.shifted(lam - 1e-6)).is_ok());
        assert!(BandedLu::factor(&a.shifted(lam + 1e-6)).is_err());
    }
}
