//! Krylov solvers: right-preconditioned GMRES and FGMRES, PCG and BiCGstab.
//!
//! All solvers start from `x0 = 0` and measure convergence by the relative
//! residual `||b - A x|| / ||b||`.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm2, Real};
use crate::sparse::CsrMatrix;

pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

impl<T: Real> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.mul_vec_into(x, y);
    }
}

/// Action of an approximate inverse `z = P^{-1} r`.
///
/// Fallible because a preconditioner may itself run an iterative solve.
pub trait Preconditioner<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<T: Copy> Preconditioner<T> for Identity {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

impl<T, P: Preconditioner<T> + ?Sized> Preconditioner<T> for &P {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        (**self).apply(r, z)
    }
}

impl<T, A: LinearOperator<T> + ?Sized> LinearOperator<T> for &A {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T> {
    pub tol: T,
    pub maxit: usize,
}

impl<T: Real> SolverSettings<T> {
    pub fn new(tol: T, maxit: usize) -> Self {
        Self { tol, maxit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovResult<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Relative residual after each iteration (index 0 is the initial one).
    pub history: Vec<T>,
    /// Final true relative residual.
    pub residual: T,
    pub converged: bool,
}

fn check_dims<T, A: LinearOperator<T> + ?Sized>(a: &A, b: &[T]) -> Result<()> {
    if a.dim() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.len() });
    }
    Ok(())
}

fn true_residual<T: Real, A: LinearOperator<T> + ?Sized>(a: &A, b: &[T], x: &[T], bnorm: T) -> T {
    let mut r = vec![T::zero(); b.len()];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    norm2(&r) / bnorm
}

fn zero_rhs<T: Real>(n: usize) -> KrylovResult<T> {
    KrylovResult { x: vec![T::zero(); n], iterations: 0, history: vec![T::zero()], residual: T::zero(), converged: true }
}

/// GMRES without restarts, preconditioned on the right: `A P^{-1} u = b`, `x = P^{-1} u`.
pub fn gmres<T: Real>(
    a: &(impl LinearOperator<T> + ?Sized),
    b: &[T],
    p: &(impl Preconditioner<T> + ?Sized),
    settings: SolverSettings<T>,
) -> Result<KrylovResult<T>> {
    arnoldi_solve(a, b, p, settings, false)
}

/// Flexible GMRES: the preconditioner may change between iterations.
pub fn fgmres<T: Real>(
    a: &(impl LinearOperator<T> + ?Sized),
    b: &[T],
    p: &(impl Preconditioner<T> + ?Sized),
    settings: SolverSettings<T>,
) -> Result<KrylovResult<T>> {
    arnoldi_solve(a, b, p, settings, true)
}

fn givens<T: Real>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

fn arnoldi_solve<T: Real>(
    a: &(impl LinearOperator<T> + ?Sized),
    b: &[T],
    p: &(impl Preconditioner<T> + ?Sized),
    settings: SolverSettings<T>,
    flexible: bool,
) -> Result<KrylovResult<T>> {
    let method = if flexible { "fgmres" } else { "gmres" };
    check_dims(a, b)?;
    let n = b.len();
    let beta = norm2(b);
    if beta == T::zero() {
        return Ok(zero_rhs(n));
    }
    if !beta.is_finite() {
        return Err(Error::NonFinite { method, iteration: 0 });
    }
    let m = settings.maxit;
    let mut v: Vec<Vec<T>> = vec![b.iter().map(|&bi| bi / beta).collect()];
    let mut z: Vec<Vec<T>> = Vec::new();
    // column j of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<T>> = Vec::new();
    let mut rot: Vec<(T, T)> = Vec::new();
    let mut g = vec![beta];
    let mut history = vec![T::one()];
    let mut zj = vec![T::zero(); n];

    let assemble = |h: &[Vec<T>], g: &[T], v: &[Vec<T>], z: &[Vec<T>]| -> Result<Vec<T>> {
        let k = h.len();
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                s = s - h[l][i] * *yl;
            }
            y[i] = s / h[i][i];
        }
        let mut x = vec![T::zero(); n];
        if flexible {
            for (yi, zi) in y.iter().zip(z) {
                axpy(*yi, zi, &mut x);
            }
        } else {
            let mut u = vec![T::zero(); n];
            for (yi, vi) in y.iter().zip(v) {
                axpy(*yi, vi, &mut u);
            }
            p.apply(&u, &mut x)?;
        }
        Ok(x)
    };

    let mut x = vec![T::zero(); n];
    let mut residual = T::one();
    let mut converged = false;
    let mut iterations = 0;
    for j in 0..m {
        p.apply(&v[j], &mut zj)?;
        let mut w = vec![T::zero(); n];
        a.apply(&zj, &mut w);
        if flexible {
            z.push(zj.clone());
        }
        let mut col = vec![T::zero(); j + 2];
        for i in 0..=j {
            let hij = dot(&w, &v[i]);
            col[i] = hij;
            axpy(-hij, &v[i], &mut w);
        }
        let hnext = norm2(&w);
        col[j + 1] = hnext;
        if !hnext.is_finite() || col.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { method, iteration: j + 1 });
        }
        for i in 0..j {
            let (c, s) = rot[i];
            let (a0, a1) = (col[i], col[i + 1]);
            col[i] = c * a0 + s * a1;
            col[i + 1] = -s * a0 + c * a1;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = T::zero();
        rot.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        iterations = j + 1;
        let estimate = g[j + 1].abs() / beta;
        history.push(estimate);
        let lucky = hnext <= T::epsilon() * beta;
        if h[j][j] == T::zero() {
            return Err(Error::Breakdown { method, iteration: j + 1 });
        }
        if estimate <= settings.tol || lucky || j + 1 == m {
            x = assemble(&h, &g, &v, &z)?;
            residual = true_residual(a, b, &x, beta);
            if residual <= settings.tol {
                converged = true;
                break;
            }
            if lucky {
                break;
            }
        }
        if !lucky {
            v.push(w.iter().map(|&wi| wi / hnext).collect());
        }
    }
    if let Some(last) = history.last_mut() {
        if converged || iterations == m {
            *last = residual;
        }
    }
    Ok(KrylovResult { x, iterations, history, residual, converged })
}

/// Preconditioned conjugate gradients for SPD `A` and SPD `P`.
///
/// Nonpositive curvature `p^T A p <= 0` (or `r^T P^{-1} r <= 0`) is reported as [`Error::Indefinite`].
pub fn cg<T: Real>(
    a: &(impl LinearOperator<T> + ?Sized),
    b: &[T],
    p: &(impl Preconditioner<T> + ?Sized),
    settings: SolverSettings<T>,
) -> Result<KrylovResult<T>> {
    check_dims(a, b)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return Ok(zero_rhs(n));
    }
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    p.apply(&r, &mut z)?;
    let mut rz = dot(&r, &z);
    if !(rz > T::zero()) {
        return Err(Error::Indefinite { method: "cg", iteration: 0, curvature: rz.as_f64() });
    }
    let mut d = z.clone();
    let mut q = vec![T::zero(); n];
    let mut history = vec![T::one()];
    let mut rel = T::one();
    for it in 1..=settings.maxit {
        a.apply(&d, &mut q);
        let curv = dot(&d, &q);
        if !curv.is_finite() {
            return Err(Error::NonFinite { method: "cg", iteration: it });
        }
        if !(curv > T::zero()) {
            return Err(Error::Indefinite { method: "cg", iteration: it, curvature: curv.as_f64() });
        }
        let step = rz / curv;
        axpy(step, &d, &mut x);
        axpy(-step, &q, &mut r);
        rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= settings.tol {
            return Ok(KrylovResult { x, iterations: it, history, residual: rel, converged: true });
        }
        p.apply(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        if !(rz_new > T::zero()) {
            return Err(Error::Indefinite { method: "cg", iteration: it, curvature: rz_new.as_f64() });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = *zi + beta * *di;
        }
    }
    Ok(KrylovResult { x, iterations: settings.maxit, history, residual: rel, converged: false })
}

/// Right-preconditioned BiCGstab.
pub fn bicgstab<T: Real>(
    a: &(impl LinearOperator<T> + ?Sized),
    b: &[T],
    p: &(impl Preconditioner<T> + ?Sized),
    settings: SolverSettings<T>,
) -> Result<KrylovResult<T>> {
    const M: &str = "bicgstab";
    check_dims(a, b)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return Ok(zero_rhs(n));
    }
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut pv = vec![T::zero(); n];
    let mut phat = vec![T::zero(); n];
    let mut shat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut history = vec![T::one()];
    let mut rel = T::one();
    for it in 1..=settings.maxit {
        let rho_new = dot(&rhat, &r);
        if rho_new == T::zero() || omega == T::zero() {
            return Err(Error::Breakdown { method: M, iteration: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            pv[i] = r[i] + beta * (pv[i] - omega * v[i]);
        }
        p.apply(&pv, &mut phat)?;
        a.apply(&phat, &mut v);
        let den = dot(&rhat, &v);
        if den == T::zero() {
            return Err(Error::Breakdown { method: M, iteration: it });
        }
        alpha = rho / den;
        axpy(-alpha, &v, &mut r);
        let snorm = norm2(&r) / bnorm;
        if !snorm.is_finite() {
            return Err(Error::NonFinite { method: M, iteration: it });
        }
        if snorm <= settings.tol {
            axpy(alpha, &phat, &mut x);
            history.push(snorm);
            return Ok(KrylovResult { x, iterations: it, history, residual: snorm, converged: true });
        }
        p.apply(&r, &mut shat)?;
        a.apply(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > T::zero() { dot(&t, &r) / tt } else { T::zero() };
        axpy(alpha, &phat, &mut x);
        axpy(omega, &shat, &mut x);
        axpy(-omega, &t, &mut r);
        rel = norm2(&r) / bnorm;
        history.push(rel);
        if !rel.is_finite() {
            return Err(Error::NonFinite { method: M, iteration: it });
        }
        if rel <= settings.tol {
            return Ok(KrylovResult { x, iterations: it, history, residual: rel, converged: true });
        }
    }
    Ok(KrylovResult { x, iterations: settings.maxit, history, residual: rel, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_stiffness, UniformMesh};

    struct Jacobi(Vec<f64>);

    impl Preconditioner<f64> for Jacobi {
        fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
            for i in 0..r.len() {
                z[i] = r[i] / self.0[i];
            }
            Ok(())
        }
    }

    fn laplacian(n: usize) -> CsrMatrix<f64> {
        assemble_stiffness(&UniformMesh::new(n).unwrap())
    }

    fn rhs(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect()
    }

    #[test]
    fn gmres_identity_one_step() {
        let a = CsrMatrix::identity(5);
        let r = gmres(&a, &[1.0, 2.0, 3.0, 4.0, 5.0], &Identity, SolverSettings::new(1e-12, 10)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn gmres_exact_preconditioner_one_step() {
        let a = laplacian(6);
        let lu = crate::banded::BandedLu::factor(&a).unwrap();
        struct Exact(crate::banded::BandedLu<f64>);
        impl Preconditioner<f64> for Exact {
            fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
                z.copy_from_slice(&self.0.solve(r));
                Ok(())
            }
        }
        let b = rhs(36);
        let r = gmres(&a, &b, &Exact(lu), SolverSettings::new(1e-10, 10)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn solvers_agree_on_laplacian() {
        let a = laplacian(8);
        let b = rhs(64);
        let s = SolverSettings::new(1e-10, 200);
        let jac = Jacobi(a.diagonal());
        let x1 = gmres(&a, &b, &jac, s).unwrap();
        let x2 = fgmres(&a, &b, &jac, s).unwrap();
        let x3 = cg(&a, &b, &jac, s).unwrap();
        let x4 = bicgstab(&a, &b, &jac, s).unwrap();
        for r in [&x1, &x2, &x3, &x4] {
            assert!(r.converged);
            assert!(true_residual(&a, &b, &r.x, norm2(&b)) < 1e-9);
        }
        assert_eq!(x1.iterations, x2.iterations);
        // GMRES residuals never increase
        assert!(x1.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn gmres_terminates_within_dimension() {
        // nonsymmetric matrix; unpreconditioned GMRES finishes in at most n steps
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + i as f64));
            if i + 1 < n {
                t.push((i, i + 1, 1.5));
                t.push((i + 1, i, -0.7));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let r = gmres(&a, &rhs(n), &Identity, SolverSettings::new(1e-12, 50)).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= n);
    }

    #[test]
    fn not_converged_is_reported() {
        let a = laplacian(10);
        let r = gmres(&a, &rhs(100), &Identity, SolverSettings::new(1e-12, 3)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(r.residual > 1e-12);
    }

    #[test]
    fn cg_rejects_indefinite() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            cg(&a, &[1.0, 1.0], &Identity, SolverSettings::new(1e-10, 10)),
            Err(Error::Indefinite { .. })
        ));
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = laplacian(3);
        let r = gmres(&a, &[0.0; 9], &Identity, SolverSettings::new(1e-8, 10)).unwrap();
        assert!(r.converged && r.iterations == 0 && r.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let a = laplacian(3);
        assert!(gmres(&a, &[1.0; 4], &Identity, SolverSettings::new(1e-8, 10)).is_err());
    }
}
