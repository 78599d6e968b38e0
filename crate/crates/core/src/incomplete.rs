//! Incomplete LU and Cholesky factorizations used as inner preconditioners.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::krylov::Preconditioner;
use crate::scalar::{norm2, Real};
use crate::sparse::CsrMatrix;

/// Which entries an incomplete factorization keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dropping<T> {
    /// The sparsity pattern of `A` (ILU(0) / IC(0)).
    Pattern,
    /// Fill entries below `tol * ||a_i||` are discarded.
    Threshold(T),
}

/// `A ~ L U` with unit lower `L`.
#[derive(Debug, Clone)]
pub struct Ilu<T> {
    n: usize,
    // strict lower part of L, row-wise
    l: CsrMatrix<T>,
    // U including its diagonal, row-wise
    u: CsrMatrix<T>,
}

fn ikj<T: Real>(a: &CsrMatrix<T>, drop: Dropping<T>) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
    let n = a.nrows();
    let mut lt = Vec::new();
    let mut ut: Vec<(usize, usize, T)> = Vec::new();
    // U rows stored for the elimination of later rows
    let mut urows: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
    let mut work = vec![T::zero(); n];
    let mut present = vec![false; n];
    let scale = a.max_abs();
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut lower: BTreeSet<usize> = BTreeSet::new();
        let mut touched: Vec<usize> = Vec::with_capacity(cols.len());
        for (&j, &v) in cols.iter().zip(vals) {
            work[j] = v;
            present[j] = true;
            touched.push(j);
            if j < i {
                lower.insert(j);
            }
        }
        let rownorm = norm2(vals);
        let mut lrow = Vec::new();
        while let Some(k) = lower.pop_first() {
            let ukk = urows[k][0].1;
            let lik = work[k] / ukk;
            if let Dropping::Threshold(tol) = drop {
                if lik.abs() < tol * rownorm {
                    work[k] = T::zero();
                    continue;
                }
            }
            work[k] = lik;
            lrow.push((k, lik));
            for &(j, ukj) in &urows[k][1..] {
                if present[j] {
                    work[j] = work[j] - lik * ukj;
                } else if matches!(drop, Dropping::Threshold(_)) {
                    present[j] = true;
                    touched.push(j);
                    work[j] = -lik * ukj;
                    if j < i {
                        lower.insert(j);
                    }
                }
            }
        }
        let mut urow = Vec::new();
        let mut diag = T::zero();
        let mut uj: Vec<usize> = touched.iter().copied().filter(|&j| j > i).collect();
        uj.sort_unstable();
        if present[i] {
            diag = work[i];
        }
        if !(diag.abs() > scale * T::epsilon()) || !diag.is_finite() {
            for &j in &touched {
                work[j] = T::zero();
                present[j] = false;
            }
            return Err(Error::Singular { row: i });
        }
        urow.push((i, diag));
        for j in uj {
            let v = work[j];
            let keep = match drop {
                Dropping::Pattern => true,
                Dropping::Threshold(tol) => v.abs() >= tol * rownorm,
            };
            if keep && v != T::zero() {
                urow.push((j, v));
            }
        }
        for &j in &touched {
            work[j] = T::zero();
            present[j] = false;
        }
        lt.extend(lrow.into_iter().map(|(k, v)| (i, k, v)));
        ut.extend(urow.iter().map(|&(j, v)| (i, j, v)));
        urows.push(urow);
    }
    Ok((CsrMatrix::from_triplets(n, n, &lt), CsrMatrix::from_triplets(n, n, &ut)))
}

/// Diagonal shifts tried after a breakdown: `1e-3 mean|diag|`, doubling.
fn shift_sequence<T: Real>(a: &CsrMatrix<T>) -> impl Iterator<Item = T> {
    let d = a.diagonal();
    let mean = d.iter().fold(T::zero(), |s, v| s + v.abs()) / T::of_usize(d.len().max(1));
    let first = T::lit(1e-3) * if mean > T::zero() { mean } else { T::one() };
    (0..30).map(move |k| first * T::lit(2.0).powi(k))
}

impl<T: Real> Ilu<T> {
    /// Factors `A`; on a zero pivot it retries on `A + tau I` with growing `tau`.
    pub fn new(a: &CsrMatrix<T>, drop: Dropping<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        let n = a.nrows();
        match ikj(a, drop) {
            Ok((l, u)) => return Ok(Self { n, l, u }),
            Err(Error::Singular { .. }) => {}
            Err(e) => return Err(e),
        }
        let mut tried = 0;
        for tau in shift_sequence(a) {
            tried += 1;
            if let Ok((l, u)) = ikj(&a.shifted(-tau), drop) {
                return Ok(Self { n, l, u });
            }
        }
        Err(Error::IncompleteBreakdown { shifts: tried })
    }

    pub fn l(&self) -> &CsrMatrix<T> {
        &self.l
    }

    pub fn u(&self) -> &CsrMatrix<T> {
        &self.u
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        for i in 0..self.n {
            let (cols, vals) = self.l.row(i);
            let mut s = x[i];
            for (&k, &v) in cols.iter().zip(vals) {
                s = s - v * x[k];
            }
            x[i] = s;
        }
        for i in (0..self.n).rev() {
            let (cols, vals) = self.u.row(i);
            let mut s = x[i];
            let mut d = T::one();
            for (&k, &v) in cols.iter().zip(vals) {
                if k == i {
                    d = v;
                } else {
                    s = s - v * x[k];
                }
            }
            x[i] = s / d;
        }
    }
}

impl<T: Real> Preconditioner<T> for Ilu<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        z.copy_from_slice(r);
        self.solve_in_place(z);
        Ok(())
    }
}

/// Incomplete Cholesky `A ~ U^T D^{-1} U`, where `U` is the upper factor of an
/// incomplete LU of the symmetric matrix `A` and `D = diag(U)`.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky<T> {
    n: usize,
    u: CsrMatrix<T>,
    diag: Vec<T>,
    shift: T,
}

impl<T: Real> IncompleteCholesky<T> {
    /// Factors SPD `A`; nonpositive pivots trigger a retry on `A + tau I`.
    pub fn new(a: &CsrMatrix<T>, drop: Dropping<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        let attempt = |m: &CsrMatrix<T>, shift: T| -> Option<Self> {
            let (_, u) = ikj(m, drop).ok()?;
            let diag = u.diagonal();
            diag.iter().all(|&d| d > T::zero()).then(|| Self { n: m.nrows(), u, diag, shift })
        };
        if let Some(f) = attempt(a, T::zero()) {
            return Ok(f);
        }
        let mut tried = 0;
        for tau in shift_sequence(a) {
            tried += 1;
            if let Some(f) = attempt(&a.shifted(-tau), tau) {
                return Ok(f);
            }
        }
        Err(Error::IncompleteBreakdown { shifts: tried })
    }

    /// Diagonal shift that was needed, zero when the plain factorization succeeded.
    pub fn shift(&self) -> T {
        self.shift
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        // U^T y = x, column-oriented sweep over the rows of U
        for i in 0..self.n {
            let xi = x[i] / self.diag[i];
            x[i] = xi;
            let (cols, vals) = self.u.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    x[j] = x[j] - v * xi;
                }
            }
        }
        for (xi, d) in x.iter_mut().zip(&self.diag) {
            *xi = *xi * *d;
        }
        for i in (0..self.n).rev() {
            let (cols, vals) = self.u.row(i);
            let mut s = x[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    s = s - v * x[j];
                }
            }
            x[i] = s / self.diag[i];
        }
    }
}

impl<T: Real> Preconditioner<T> for IncompleteCholesky<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        z.copy_from_slice(r);
        self.solve_in_place(z);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_convection, assemble_mass, assemble_stiffness, UniformMesh};
    use crate::krylov::{bicgstab, cg, Identity, SolverSettings};

    fn mesh(n: usize) -> UniformMesh {
        UniformMesh::new(n).unwrap()
    }

    #[test]
    fn ilu0_is_exact_on_tridiagonal() {
        let t: Vec<_> = (0..10)
            .flat_map(|i| {
                let mut v = vec![(i, i, 3.0)];
                if i > 0 {
                    v.push((i, i - 1, -1.0));
                }
                if i < 9 {
                    v.push((i, i + 1, -1.5));
                }
                v
            })
            .collect();
        let a = CsrMatrix::from_triplets(10, 10, &t);
        let f = Ilu::new(&a, Dropping::Pattern).unwrap();
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let r = a.mul_vec(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn ic0_keeps_pattern_and_matches_on_it() {
        let a = assemble_stiffness::<f64>(&mesh(6));
        let f = IncompleteCholesky::new(&a, Dropping::Pattern).unwrap();
        assert_eq!(f.shift(), 0.0);
        // (U^T D^-1 U)_ij = a_ij on the pattern of A
        let ut = f.u.transpose();
        let dinv = CsrMatrix::from_diagonal(&f.diag.iter().map(|d| 1.0 / d).collect::<Vec<_>>());
        let m = dense_product(&ut, &dinv, &f.u);
        for (i, j, v) in a.triplets() {
            assert!((m[(i, j)] - v).abs() < 1e-12);
        }
    }

    fn dense_product(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, c: &CsrMatrix<f64>) -> nalgebra::DMatrix<f64> {
        a.to_dense() * b.to_dense() * c.to_dense()
    }

    #[test]
    fn threshold_zero_gives_exact_factors() {
        let m = mesh(5);
        let a = assemble_stiffness::<f64>(&m).lin_comb(1.0, &assemble_convection(&m, (2.0, 3.0)), 1.0);
        let f = Ilu::new(&a, Dropping::Threshold(0.0)).unwrap();
        let b: Vec<f64> = (0..25).map(|i| (i as f64).cos()).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        for (p, q) in a.mul_vec(&x).iter().zip(&b) {
            assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn preconditioning_reduces_iterations() {
        let m = mesh(20);
        let k = assemble_stiffness::<f64>(&m);
        let b = vec![1.0; m.dofs()];
        let s = SolverSettings::new(1e-8, 500);
        let plain = cg(&k, &b, &Identity, s).unwrap();
        let ic = cg(&k, &b, &IncompleteCholesky::new(&k, Dropping::Pattern).unwrap(), s).unwrap();
        assert!(ic.converged && ic.iterations < plain.iterations);
        let z = k.lin_comb(1.0, &assemble_convection(&m, (2.0, 3.0)), 1.0).lin_comb(1.0, &assemble_mass(&m), 1.0);
        let ilu = bicgstab(&z, &b, &Ilu::new(&z, Dropping::Threshold(1e-3)).unwrap(), s).unwrap();
        let none = bicgstab(&z, &b, &Identity, s).unwrap();
        assert!(ilu.converged && ilu.iterations < none.iterations);
    }

    #[test]
    fn indefinite_input_is_shifted() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0, 2.0]);
        let f = IncompleteCholesky::new(&a, Dropping::Pattern).unwrap();
        assert!(f.shift() > 1.0);
    }
}
