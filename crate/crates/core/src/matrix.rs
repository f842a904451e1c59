//! Dense rational matrices with a column-sparse view for fast
//! matrix-vector products.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{one, zero, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: Vec<Vec<Rational>>,
    /// Nonzero entries per column: `(row, value)`.
    columns: Vec<Vec<(usize, Rational)>>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidSpec("ragged matrix".into()));
        }
        let mut columns = vec![Vec::new(); width];
        for (i, row) in rows.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if !x.is_zero() {
                    columns[j].push((i, x.clone()));
                }
            }
        }
        Ok(Matrix { rows, columns })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            rows: vec![vec![zero(); n_cols]; n_rows],
            columns: vec![Vec::new(); n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { one() } else { zero() }).collect())
            .collect();
        Matrix::from_rows(rows).expect("square")
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_square(&self, n: usize) -> bool {
        self.n_rows() == n && self.n_cols() == n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> &[(usize, Rational)] {
        &self.columns[j]
    }

    /// `M v`.
    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        debug_assert_eq!(v.len(), self.n_cols());
        let mut out = vec![zero(); self.n_rows()];
        for (j, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (i, m) in &self.columns[j] {
                out[*i] += m * x;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n_rows();
        let p = other.n_cols();
        let mut rows = vec![vec![zero(); p]; n];
        for (j, col) in other.columns.iter().enumerate() {
            for (k, b) in col {
                for (i, a) in &self.columns[*k] {
                    rows[*i][j] += a * b;
                }
            }
        }
        Matrix::from_rows(rows).expect("rectangular")
    }

    pub fn transpose(&self) -> Matrix {
        let rows = (0..self.n_cols())
            .map(|j| (0..self.n_rows()).map(|i| self.rows[i][j].clone()).collect())
            .collect();
        Matrix::from_rows(rows).expect("rectangular")
    }

    pub fn kron(&self, other: &Matrix) -> Matrix {
        let (r2, c2) = (other.n_rows(), other.n_cols());
        let mut rows = vec![vec![zero(); self.n_cols() * c2]; self.n_rows() * r2];
        for (i1, row1) in self.rows.iter().enumerate() {
            for (j1, a) in row1.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (i2, row2) in other.rows.iter().enumerate() {
                    for (j2, b) in row2.iter().enumerate() {
                        if !b.is_zero() {
                            rows[i1 * r2 + i2][j1 * c2 + j2] = a * b;
                        }
                    }
                }
            }
        }
        Matrix::from_rows(rows).expect("rectangular")
    }

    /// Block-diagonal `diag(self, other)`.
    pub fn direct_sum(&self, other: &Matrix) -> Matrix {
        let (r1, c1) = (self.n_rows(), self.n_cols());
        let mut rows = vec![vec![zero(); c1 + other.n_cols()]; r1 + other.n_rows()];
        for (i, row) in self.rows.iter().enumerate() {
            rows[i][..c1].clone_from_slice(row);
        }
        for (i, row) in other.rows.iter().enumerate() {
            rows[r1 + i][c1..].clone_from_slice(row);
        }
        Matrix::from_rows(rows).expect("rectangular")
    }

    /// Every column sums to 1 and every entry lies in [0, 1].
    pub fn is_column_stochastic(&self) -> bool {
        self.columns.iter().all(|col| {
            col.iter().all(|(_, x)| !x.is_negative() && *x <= one())
                && col.iter().fold(zero(), |acc, (_, x)| acc + x) == one()
        })
    }

    /// Max absolute column sum (induced 1-norm).
    pub fn norm_one(&self) -> Rational {
        self.columns
            .iter()
            .map(|col| col.iter().fold(zero(), |acc, (_, x)| acc + x.abs()))
            .max()
            .unwrap_or_else(zero)
    }

    /// Max absolute row sum (induced infinity-norm).
    pub fn norm_inf(&self) -> Rational {
        self.rows
            .iter()
            .map(|row| row.iter().fold(zero(), |acc, x| acc + x.abs()))
            .max()
            .unwrap_or_else(zero)
    }

    /// Spectral norm at most `c`. Tries the cheap certificate
    /// `||M||_2^2 <= ||M||_1 ||M||_inf <= c^2` first, then decides exactly
    /// whether `c^2 I - M^T M` is positive semidefinite.
    pub fn norm_bounded_by(&self, c: &Rational) -> bool {
        let c2 = c * c;
        if self.norm_one() * self.norm_inf() <= c2 {
            return true;
        }
        let mut slack = self.transpose().mul(self);
        for i in 0..slack.n_rows() {
            for j in 0..slack.n_cols() {
                let g = &slack.rows[i][j];
                slack.rows[i][j] = if i == j { &c2 - g } else { -g };
            }
        }
        slack.is_psd()
    }

    /// Exact positive-semidefiniteness test for a symmetric matrix by
    /// symmetric elimination: every pivot must be nonnegative, and a zero
    /// pivot must have a zero row.
    pub fn is_psd(&self) -> bool {
        let n = self.n_rows();
        let mut a = self.rows.clone();
        for k in 0..n {
            if a[k][k].is_negative() {
                return false;
            }
            if a[k][k].is_zero() {
                if a[k][k + 1..].iter().any(|x| !x.is_zero()) {
                    return false;
                }
                continue;
            }
            for i in k + 1..n {
                if a[i][k].is_zero() {
                    continue;
                }
                let f = &a[i][k] / &a[k][k];
                let (top, rest) = a.split_at_mut(i);
                for (x, p) in rest[0][k + 1..].iter_mut().zip(&top[k][k + 1..]) {
                    *x -= &f * p;
                }
            }
        }
        true
    }

    /// `M^T M = c^2 I`, i.e. `M / c` is an isometry.
    pub fn is_scaled_isometry(&self, c: &Rational) -> bool {
        let gram = self.transpose().mul(self);
        let c2 = c * c;
        (0..gram.n_rows()).all(|i| {
            (0..gram.n_cols()).all(|j| {
                let expect = if i == j { c2.clone() } else { zero() };
                gram.rows[i][j] == expect
            })
        })
    }

    /// Row `i` is added into row `target[i]` of an `n_rows`-row result;
    /// rows routed to `None` are dropped.
    pub fn route_rows(&self, target: &[Option<usize>], n_rows: usize) -> Matrix {
        let mut rows = vec![vec![zero(); self.n_cols()]; n_rows];
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(t) = target[i] {
                for (j, x) in row.iter().enumerate() {
                    rows[t][j] += x;
                }
            }
        }
        Matrix::from_rows(rows).expect("rectangular")
    }

    /// Pads to `n x n` by appending zero rows and columns.
    pub fn pad_zero(&self, n: usize) -> Matrix {
        let mut rows = self.rows.clone();
        for row in &mut rows {
            row.resize(n, zero());
        }
        rows.resize(n, vec![zero(); n]);
        Matrix::from_rows(rows).expect("square")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn m(rows: &[&[i64]]) -> Matrix {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect()).unwrap()
    }

    #[test]
    fn apply_and_mul_agree() {
        let a = m(&[&[1, 2], &[3, 4]]);
        let b = m(&[&[0, 1], &[1, 0]]);
        let v = vec![int(5), int(-1)];
        assert_eq!(a.mul(&b).apply(&v), a.apply(&b.apply(&v)));
        assert_eq!(a.apply(&v), vec![int(3), int(11)]);
    }

    #[test]
    fn kron_layout() {
        let a = m(&[&[1, 2], &[3, 4]]);
        let i = Matrix::identity(2);
        let k = a.kron(&i);
        assert_eq!(k.get(0, 2), &int(2));
        assert_eq!(k.get(3, 1), &int(3));
        assert_eq!(k.get(1, 0), &int(0));
        assert_eq!(i.kron(&Matrix::identity(3)), Matrix::identity(6));
    }

    #[test]
    fn norms_and_isometry() {
        let rot = Matrix::from_rows(vec![
            vec![ratio(3, 5), ratio(-4, 5)],
            vec![ratio(4, 5), ratio(3, 5)],
        ])
        .unwrap();
        assert!(rot.is_scaled_isometry(&int(1)));
        let scaled = m(&[&[3, -4], &[4, 3]]);
        assert!(scaled.is_scaled_isometry(&int(5)));
        assert!(!m(&[&[1, 1], &[0, 1]]).is_scaled_isometry(&int(1)));
        // ||.||_1 ||.||_inf = 40 but the spectral norm is about 5.86
        assert!(m(&[&[1, 4], &[0, 4]]).norm_bounded_by(&int(6)));
        assert!(!m(&[&[1, 4], &[0, 4]]).norm_bounded_by(&int(5)));
        assert!(scaled.norm_bounded_by(&int(5)));
        assert!(!scaled.norm_bounded_by(&ratio(49, 10)));
    }

    #[test]
    fn psd() {
        assert!(m(&[&[2, 1], &[1, 2]]).is_psd());
        assert!(m(&[&[0, 0], &[0, 3]]).is_psd());
        assert!(!m(&[&[1, 2], &[2, 1]]).is_psd());
        assert!(!m(&[&[0, 1], &[1, 3]]).is_psd());
    }

    #[test]
    fn stochastic_check() {
        let p = Matrix::from_rows(vec![vec![ratio(1, 2), int(0)], vec![ratio(1, 2), int(1)]]).unwrap();
        assert!(p.is_column_stochastic());
        assert!(!m(&[&[1, 1], &[0, 1]]).is_column_stochastic());
        assert!(Matrix::from_rows(vec![vec![int(1)], vec![]]).is_err());
    }
}
