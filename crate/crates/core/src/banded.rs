//! Direct band solvers: Cholesky for SPD matrices, LU with partial pivoting otherwise.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Half bandwidth of the lower triangle, `max(i - j)` over stored entries.
fn lower_bandwidth<T: Real>(a: &CsrMatrix<T>) -> usize {
    (0..a.nrows())
        .flat_map(|i| a.row(i).0.iter().map(move |&j| i.saturating_sub(j)))
        .max()
        .unwrap_or(0)
}

fn upper_bandwidth<T: Real>(a: &CsrMatrix<T>) -> usize {
    (0..a.nrows())
        .flat_map(|i| a.row(i).0.iter().map(move |&j| j.saturating_sub(i)))
        .max()
        .unwrap_or(0)
}

fn check_square<T: Real>(a: &CsrMatrix<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    Ok(())
}

/// `A = L L^T` in lower band storage.
#[derive(Debug, Clone)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    // row i holds L[i, i-bw ..= i]
    l: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    /// Factors a symmetric positive definite matrix; only the lower triangle is read.
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        check_square(a)?;
        let n = a.nrows();
        let bw = lower_bandwidth(a);
        let w = bw + 1;
        let mut l = vec![T::zero(); n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    l[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[i * w + (j + bw - i)];
                let klo = lo.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in klo..j {
                    s = s - l[ri + k] * l[rj + k];
                }
                if j == i {
                    if !(s > T::zero()) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s.as_f64() });
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.n, "right-hand side length");
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let r = i * w + bw - i;
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s = s - self.l[r + k] * x[k];
            }
            x[i] = s / self.l[r + i];
        }
        for i in (0..self.n).rev() {
            let r = i * w + bw - i;
            let xi = x[i] / self.l[r + i];
            x[i] = xi;
            for k in i.saturating_sub(bw)..i {
                x[k] = x[k] - self.l[r + k] * xi;
            }
        }
    }
}

/// `P A = L U` with partial pivoting in LAPACK-style column band storage.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    // upper bandwidth of U after pivoting, kl + ku
    ku2: usize,
    // column j holds rows j-ku2 ..= j+kl
    ab: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        check_square(a)?;
        let n = a.nrows();
        let kl = lower_bandwidth(a);
        let ku2 = kl + upper_bandwidth(a);
        let h = ku2 + kl + 1;
        let mut ab = vec![T::zero(); n * h];
        let at = |i: usize, j: usize| j * h + (i + ku2 - j);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                ab[at(i, j)] = v;
            }
        }
        let mut piv = vec![0; n];
        let scale = a.max_abs();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = ab[at(k, k)].abs();
            for i in k + 1..=last {
                let v = ab[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if !(best > T::zero()) || best <= scale * T::epsilon() * T::lit(1e-3) {
                return Err(Error::Singular { row: k });
            }
            let jend = (k + ku2).min(n - 1);
            if p != k {
                for j in k..=jend {
                    ab.swap(at(k, j), at(p, j));
                }
            }
            let d = ab[at(k, k)];
            for i in k + 1..=last {
                let li = ab[at(i, k)] / d;
                ab[at(i, k)] = li;
                if li != T::zero() {
                    for j in k + 1..=jend {
                        let u = ab[at(k, j)];
                        let idx = at(i, j);
                        ab[idx] = ab[idx] - li * u;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku2, ab, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.n, "right-hand side length");
        let n = self.n;
        let h = self.ku2 + self.kl + 1;
        let at = |i: usize, j: usize| j * h + (i + self.ku2 - j);
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] = x[i] - self.ab[at(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let xk = x[k] / self.ab[at(k, k)];
            x[k] = xk;
            for i in k.saturating_sub(self.ku2)..k {
                x[i] = x[i] - self.ab[at(i, k)] * xk;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> CsrMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    fn dense_solve(a: &CsrMatrix<f64>, b: &[f64]) -> Vec<f64> {
        let x = a.to_dense().lu().solve(&DVector::from_column_slice(b)).unwrap();
        x.iter().copied().collect()
    }

    #[test]
    fn cholesky_matches_dense_solve() {
        let b = random_banded(30, 3, 3, 1);
        // B B^T + I is SPD with half bandwidth 6
        let spd = CsrMatrix::from_dense(&(b.to_dense() * b.to_dense().transpose() + DMatrix::identity(30, 30)));
        let rhs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = BandedCholesky::factor(&spd).unwrap().solve(&rhs);
        for (u, v) in x.iter().zip(dense_solve(&spd, &rhs)) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(BandedCholesky::factor(&a), Err(Error::NotPositiveDefinite { row: 1, .. })));
    }

    #[test]
    fn lu_matches_dense_solve_with_pivoting() {
        for (kl, ku, seed) in [(2, 1, 3), (0, 4, 4), (5, 0, 5), (3, 3, 6)] {
            let a = random_banded(40, kl, ku, seed);
            let rhs: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.1).collect();
            let x = BandedLu::factor(&a).unwrap().solve(&rhs);
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(&rhs).map(|(p, q)| p - q).collect();
            let xn = crate::scalar::norm2(&x);
            assert!(crate::scalar::norm2(&r) < 1e-12 * xn, "kl={kl} ku={ku}");
            for (u, v) in x.iter().zip(dense_solve(&a, &rhs)) {
                assert!((u - v).abs() < 1e-8 * xn);
            }
        }
    }

    #[test]
    fn lu_needs_pivoting_on_zero_diagonal() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let x = BandedLu::factor(&a).unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn lu_reports_singular() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(BandedLu::factor(&a), Err(Error::Singular { .. })));
    }
}
