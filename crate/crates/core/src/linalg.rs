//! Minimal dense linear algebra for the estimator.
//!
//! The adaptive observer carries a regressor filter `Psi` (`n_v x n_theta`)
//! and a covariance `P` (`n_theta x n_theta`); with at most a few dozen
//! parameters these are tiny, so plain row-major slices and straightforward
//! loops beat pulling in a matrix library and keep every kernel generic over
//! the scalar type. All matrices are row-major; dimensions are passed
//! explicitly and checked with `debug_assert!`.

use crate::num::Real;

/// Small owned row-major matrix, used for configuration values (initial
/// covariance) and test oracles rather than in hot loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Mat<R> {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = R::one();
        }
        m
    }

    /// Builds a matrix from a row-major closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major backing slice.
    pub fn as_slice(&self) -> &[R] {
        &self.data
    }
}

impl<R> std::ops::Index<(usize, usize)> for Mat<R> {
    type Output = R;
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R> std::ops::IndexMut<(usize, usize)> for Mat<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

/// `y = A x` for row-major `a` of shape `(r, c)`.
pub fn mat_vec<R: Real>(a: &[R], x: &[R], y: &mut [R], r: usize, c: usize) {
    debug_assert_eq!(a.len(), r * c);
    debug_assert_eq!(x.len(), c);
    debug_assert_eq!(y.len(), r);
    for i in 0..r {
        let row = &a[i * c..(i + 1) * c];
        let mut acc = R::zero();
        for (aij, xj) in row.iter().zip(x) {
            acc = acc + *aij * *xj;
        }
        y[i] = acc;
    }
}

/// `C = A B` for row-major `a` of shape `(r, k)` and `b` of shape `(k, c)`.
pub fn mat_mat<R: Real>(a: &[R], b: &[R], out: &mut [R], r: usize, k: usize, c: usize) {
    debug_assert_eq!(a.len(), r * k);
    debug_assert_eq!(b.len(), k * c);
    debug_assert_eq!(out.len(), r * c);
    for i in 0..r {
        for j in 0..c {
            let mut acc = R::zero();
            for l in 0..k {
                acc = acc + a[i * k + l] * b[l * c + j];
            }
            out[i * c + j] = acc;
        }
    }
}

/// `C = A^T A` for row-major `a` of shape `(r, c)`; `out` has shape `(c, c)`.
pub fn gram<R: Real>(a: &[R], out: &mut [R], r: usize, c: usize) {
    debug_assert_eq!(a.len(), r * c);
    debug_assert_eq!(out.len(), c * c);
    for i in 0..c {
        for j in i..c {
            let mut acc = R::zero();
            for l in 0..r {
                acc = acc + a[l * c + i] * a[l * c + j];
            }
            out[i * c + j] = acc;
            out[j * c + i] = acc;
        }
    }
}

/// Replaces the square matrix `p` by its symmetric part `(P + P^T) / 2`.
pub fn symmetrize<R: Real>(p: &mut [R], n: usize) {
    debug_assert_eq!(p.len(), n * n);
    let half = R::of(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (p[i * n + j] + p[j * n + i]) * half;
            p[i * n + j] = avg;
            p[j * n + i] = avg;
        }
    }
}

/// In-place lower Cholesky factorization of a symmetric matrix.
///
/// On success the lower triangle of `a` holds `L` with `L L^T = A` (the strict
/// upper triangle is left untouched). Returns the index of the first
/// non-positive pivot if the matrix is not positive definite.
pub fn cholesky_in_place<R: Real>(a: &mut [R], n: usize) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if d <= R::zero() || !d.is_finite() {
            return Err(j);
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

/// Whether the symmetric matrix `p` is positive definite (by attempting a
/// Cholesky factorization of a scratch copy).
pub fn is_positive_definite<R: Real>(p: &[R], n: usize) -> bool {
    let mut scratch = p.to_vec();
    cholesky_in_place(&mut scratch, n).is_ok()
}

/// Solves `A x = b` in place given the lower Cholesky factor `l` of `A`
/// (forward then backward substitution).
pub fn solve_cholesky<R: Real>(l: &[R], b: &mut [R], n: usize) {
    debug_assert_eq!(l.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn products_match_hand_computation() {
        // A = [1 2; 3 4], B = [5 6; 7 8], x = [1, -1]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut y = [0.0; 2];
        mat_vec(&a, &[1.0, -1.0], &mut y, 2, 2);
        assert_eq!(y, [-1.0, -1.0]);
        let mut c = [0.0; 4];
        mat_mat(&a, &b, &mut c, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        let mut g = [0.0; 4];
        gram(&a, &mut g, 2, 2);
        assert_eq!(g, [10.0, 14.0, 14.0, 20.0]);
    }

    #[test]
    fn symmetrize_averages_off_diagonal_pairs() {
        let mut p = [1.0, 2.0, 4.0, 3.0];
        symmetrize(&mut p, 2);
        assert_eq!(p, [1.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn cholesky_solves_an_spd_system() {
        // A = L0 L0^T with a known well-conditioned L0.
        let l0 = [2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 1.5];
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += l0[i * 3 + k] * l0[j * 3 + k];
                }
                a[i * 3 + j] = s;
            }
        }
        let x_true = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        mat_vec(&a, &x_true, &mut b, 3, 3);
        cholesky_in_place(&mut a, 3).unwrap();
        solve_cholesky(&a, &mut b, 3);
        for (got, want) in b.iter().zip(x_true) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrices() {
        let mut a = [1.0, 2.0, 2.0, 1.0]; // eigenvalues 3 and -1
        assert_eq!(cholesky_in_place(&mut a, 2), Err(1));
        assert!(!is_positive_definite(&[0.0, 0.0, 0.0, 0.0], 2));
        assert!(is_positive_definite(&Mat::<f64>::identity(4).data, 4));
    }
}
