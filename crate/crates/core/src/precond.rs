//! Block back-substitution preconditioners for the saddle-point systems.
//!
//! With `Z` the constraint operator (`K` for Poisson), the variants are
//!
//! ```text
//! P_N     = [[0, a Z^T, 0], [0, a M, -M], [Z, -M, 0]]          (scaled system)
//! P_BCT   = [[0, 0, Z^T],   [0, a M, -M], [Z, -M, 0]]          (scaled system)
//! P~_BCT  = [[h^4 M, 0, Z^T], [0, 0, -M], [Z, -M, 0]]          (scaled system)
//! P_D     = [[Mb, 0, Zb^T], [0, 0, -Mb], [Zb, -Mb, 0]]         (unscaled system)
//! ```
//!
//! Each is applied by three sequential inner solves with `Z`, `Z^T` and `M`.

use std::str::FromStr;

use crate::banded::{BandedCholesky, BandedLu};
use crate::error::{Error, Result};
use crate::incomplete::{Dropping, IncompleteCholesky, Ilu};
use crate::krylov::{bicgstab, cg, Preconditioner, SolverSettings};
use crate::saddle::SaddleSystem;
use crate::scalar::{axpy, Real};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Identity,
    Pn,
    Pbct,
    Pd,
    PtildeBct,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Identity, Variant::Pn, Variant::Pbct, Variant::Pd, Variant::PtildeBct];

    /// Whether the preconditioner is built for the unscaled system `Abar`.
    pub fn acts_on_unscaled(self) -> bool {
        self == Variant::Pd
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Identity => "none",
            Variant::Pn => "pn",
            Variant::Pbct => "pbct",
            Variant::Pd => "pd",
            Variant::PtildeBct => "ptilde",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown preconditioner '{s}'")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the inner systems with `M`, `Z` and `Z^T` are solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerMode<T> {
    /// Banded Cholesky (SPD blocks) or banded LU (`Z` under advection).
    Direct,
    /// PCG with incomplete Cholesky for SPD blocks, BiCGstab with ILU otherwise.
    Iterative { tol: T, maxit: usize, drop_tol: T },
}

impl<T: Real> InnerMode<T> {
    /// Iterative inner solves with tolerance `tol`, 500 iterations and drop tolerance `1e-2`.
    pub fn iterative(tol: T) -> Self {
        InnerMode::Iterative { tol, maxit: 500, drop_tol: T::lit(1e-2) }
    }
}

enum Inner<T: Real> {
    Cholesky(BandedCholesky<T>),
    Lu(BandedLu<T>),
    Cg { a: CsrMatrix<T>, p: IncompleteCholesky<T>, s: SolverSettings<T> },
    Bicgstab { a: CsrMatrix<T>, p: Ilu<T>, s: SolverSettings<T> },
}

impl<T: Real> Inner<T> {
    fn new(a: &CsrMatrix<T>, spd: bool, mode: InnerMode<T>) -> Result<Self> {
        Ok(match (mode, spd) {
            (InnerMode::Direct, true) => Inner::Cholesky(BandedCholesky::factor(a)?),
            (InnerMode::Direct, false) => Inner::Lu(BandedLu::factor(a)?),
            (InnerMode::Iterative { tol, maxit, drop_tol }, true) => Inner::Cg {
                a: a.clone(),
                p: IncompleteCholesky::new(a, Dropping::Threshold(drop_tol))?,
                s: SolverSettings::new(tol, maxit),
            },
            (InnerMode::Iterative { tol, maxit, drop_tol }, false) => Inner::Bicgstab {
                a: a.clone(),
                p: Ilu::new(a, Dropping::Threshold(drop_tol))?,
                s: SolverSettings::new(tol, maxit),
            },
        })
    }

    fn solve(&self, b: &[T], stage: usize) -> Result<Vec<T>> {
        let fail = |reason: String| Error::InnerSolve { stage, reason };
        match self {
            Inner::Cholesky(f) => Ok(f.solve(b)),
            Inner::Lu(f) => Ok(f.solve(b)),
            Inner::Cg { a, p, s } => {
                let r = cg(a, b, p, *s).map_err(|e| fail(e.to_string()))?;
                if !r.converged {
                    return Err(fail(format!("PCG did not reach {} in {} iterations", s.tol, s.maxit)));
                }
                Ok(r.x)
            }
            Inner::Bicgstab { a, p, s } => {
                let r = bicgstab(a, b, p, *s).map_err(|e| fail(e.to_string()))?;
                if !r.converged {
                    return Err(fail(format!("BiCGstab did not reach {} in {} iterations", s.tol, s.maxit)));
                }
                Ok(r.x)
            }
        }
    }
}

/// A factorized (or iteratively applied) block preconditioner.
pub struct SaddlePreconditioner<T: Real> {
    variant: Variant,
    dofs: usize,
    alpha: T,
    h: T,
    m: CsrMatrix<T>,
    z: CsrMatrix<T>,
    m_solver: Option<Inner<T>>,
    z_solver: Option<Inner<T>>,
    // None when Z is symmetric and z_solver serves both
    zt_solver: Option<Inner<T>>,
}

impl<T: Real> SaddlePreconditioner<T> {
    pub fn new(sys: &SaddleSystem<T>, variant: Variant, mode: InnerMode<T>) -> Result<Self> {
        let symmetric = sys.is_poisson();
        let needs = variant != Variant::Identity;
        let m_solver = needs.then(|| Inner::new(sys.mass(), true, mode)).transpose()?;
        let z_solver = needs.then(|| Inner::new(sys.constraint(), symmetric, mode)).transpose()?;
        let zt_solver = (needs && !symmetric)
            .then(|| Inner::new(&sys.constraint().transpose(), false, mode))
            .transpose()?;
        Ok(Self {
            variant,
            dofs: sys.mesh().dofs(),
            alpha: sys.alpha(),
            h: sys.h(),
            m: sys.mass().clone(),
            z: sys.constraint().clone(),
            m_solver,
            z_solver,
            zt_solver,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        3 * self.dofs
    }

    fn solve_m(&self, b: &[T], stage: usize) -> Result<Vec<T>> {
        self.m_solver.as_ref().expect("built for a non-identity variant").solve(b, stage)
    }

    fn solve_z(&self, b: &[T], stage: usize) -> Result<Vec<T>> {
        self.z_solver.as_ref().expect("built for a non-identity variant").solve(b, stage)
    }

    fn solve_zt(&self, b: &[T], stage: usize) -> Result<Vec<T>> {
        match &self.zt_solver {
            Some(s) => s.solve(b, stage),
            None => self.solve_z(b, stage),
        }
    }

    /// The preconditioner as an explicit sparse matrix.
    pub fn assemble(&self) -> CsrMatrix<T> {
        let h2 = self.h * self.h;
        let zt = self.z.transpose();
        let neg_m = self.m.scaled(-T::one());
        let am = self.m.scaled(self.alpha);
        let blocks = match self.variant {
            Variant::Identity => return CsrMatrix::identity(self.dim()),
            Variant::Pn => {
                let azt = zt.scaled(self.alpha);
                CsrMatrix::block(&[
                    vec![None, Some(&azt), None],
                    vec![None, Some(&am), Some(&neg_m)],
                    vec![Some(&self.z), Some(&neg_m), None],
                ])
            }
            Variant::Pbct => CsrMatrix::block(&[
                vec![None, None, Some(&zt)],
                vec![None, Some(&am), Some(&neg_m)],
                vec![Some(&self.z), Some(&neg_m), None],
            ]),
            Variant::PtildeBct => {
                let h4m = self.m.scaled(h2 * h2);
                CsrMatrix::block(&[
                    vec![Some(&h4m), None, Some(&zt)],
                    vec![None, None, Some(&neg_m)],
                    vec![Some(&self.z), Some(&neg_m), None],
                ])
            }
            Variant::Pd => {
                let mb = self.m.scaled(h2);
                let neg_mb = mb.scaled(-T::one());
                CsrMatrix::block(&[
                    vec![Some(&mb), None, Some(&zt)],
                    vec![None, None, Some(&neg_mb)],
                    vec![Some(&self.z), Some(&neg_mb), None],
                ])
            }
        };
        blocks.expect("blocks have matching sizes")
    }
}

impl<T: Real> Preconditioner<T> for SaddlePreconditioner<T> {
    fn apply(&self, r: &[T], out: &mut [T]) -> Result<()> {
        if r.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: r.len() });
        }
        let d = self.dofs;
        let (r1, r2, r3) = (&r[..d], &r[d..2 * d], &r[2 * d..]);
        let alpha = self.alpha;
        let h2 = self.h * self.h;
        let (z1, z2, z3) = match self.variant {
            Variant::Identity => {
                out.copy_from_slice(r);
                return Ok(());
            }
            Variant::Pn => {
                let z2: Vec<T> = self.solve_zt(r1, 1)?.into_iter().map(|v| v / alpha).collect();
                let mut z3 = self.solve_m(r2, 2)?;
                for (a, b) in z3.iter_mut().zip(&z2) {
                    *a = alpha * *b - *a;
                }
                let mut rhs = self.m.mul_vec(&z2);
                axpy(T::one(), r3, &mut rhs);
                (self.solve_z(&rhs, 3)?, z2, z3)
            }
            Variant::Pbct => {
                let z3 = self.solve_zt(r1, 1)?;
                let mut z2 = self.solve_m(r2, 2)?;
                for (a, b) in z2.iter_mut().zip(&z3) {
                    *a = (*a + *b) / alpha;
                }
                let mut rhs = self.m.mul_vec(&z2);
                axpy(T::one(), r3, &mut rhs);
                (self.solve_z(&rhs, 3)?, z2, z3)
            }
            Variant::PtildeBct => {
                let z3: Vec<T> = self.solve_m(r2, 1)?.into_iter().map(|v| -v).collect();
                let mut rhs = self.z.mul_vec_transpose(&z3);
                for (a, b) in rhs.iter_mut().zip(r1) {
                    *a = *b - *a;
                }
                let h4 = h2 * h2;
                let z1: Vec<T> = self.solve_m(&rhs, 2)?.into_iter().map(|v| v / h4).collect();
                let mut rhs = self.z.mul_vec(&z1);
                axpy(-T::one(), r3, &mut rhs);
                (z1, self.solve_m(&rhs, 3)?, z3)
            }
            Variant::Pd => {
                // Mb^{-1} v = M^{-1} v / h^2
                let z3: Vec<T> = self.solve_m(r2, 1)?.into_iter().map(|v| -v / h2).collect();
                let mut rhs = self.z.mul_vec_transpose(&z3);
                for (a, b) in rhs.iter_mut().zip(r1) {
                    *a = *b - *a;
                }
                let z1: Vec<T> = self.solve_m(&rhs, 2)?.into_iter().map(|v| v / h2).collect();
                let mut rhs = self.z.mul_vec(&z1);
                axpy(-T::one(), r3, &mut rhs);
                let z2 = self.solve_m(&rhs, 3)?.into_iter().map(|v| v / h2).collect();
                (z1, z2, z3)
            }
        };
        out[..d].copy_from_slice(&z1);
        out[d..2 * d].copy_from_slice(&z2);
        out[2 * d..].copy_from_slice(&z3);
        Ok(())
    }
}

/// The matrix and right-hand side a variant is meant to precondition.
pub fn target_system<T: Real>(sys: &SaddleSystem<T>, variant: Variant) -> (CsrMatrix<T>, Vec<T>) {
    if variant.acts_on_unscaled() {
        (sys.unscaled_matrix(), sys.unscaled_rhs().to_vec())
    } else {
        (sys.matrix().clone(), sys.rhs().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::{build_system, ConstraintKind, TestProblem};
    use crate::scalar::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn single_node_back_substitution() {
        for alpha in [1.0f64, 1e-3, 7.5] {
            let s = build_system(1, alpha, ConstraintKind::Poisson, |_, _| 0.0, |_, _| 0.0).unwrap();
            let p = SaddlePreconditioner::new(&s, Variant::Pn, InnerMode::Direct).unwrap();
            let mut z = [0.0; 3];
            p.apply(&[1.0, 0.0, 0.0], &mut z).unwrap();
            let expect = [1.0 / (32.0 * alpha), 1.0 / (4.0 * alpha), 0.25];
            for (a, b) in z.iter().zip(expect) {
                assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn apply_inverts_assembled_matrix() {
        for problem in [TestProblem::Poisson, TestProblem::Advection] {
            let s = problem.build(4, 1e-2).unwrap();
            for v in Variant::ALL {
                let p = SaddlePreconditioner::new(&s, v, InnerMode::Direct).unwrap();
                let pm = p.assemble();
                let x = random_vec(48, 11);
                let mut y = vec![0.0; 48];
                p.apply(&pm.mul_vec(&x), &mut y).unwrap();
                let err: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                assert!(norm2(&err) <= 1e-10 * norm2(&x), "{problem:?} {v}");

                let r = random_vec(48, 7);
                let mut z = vec![0.0; 48];
                p.apply(&r, &mut z).unwrap();
                let back = pm.mul_vec(&z);
                let err: Vec<f64> = back.iter().zip(&r).map(|(a, b)| a - b).collect();
                if matches!(v, Variant::Pd | Variant::PtildeBct) {
                    // the small (1,1) pivot makes z large; check the normwise backward error instead
                    let scale = pm.max_abs() * norm2(&z) + norm2(&r);
                    assert!(norm2(&err) <= 1e-14 * scale, "{problem:?} {v}");
                } else {
                    assert!(norm2(&err) <= 1e-11 * norm2(&r), "{problem:?} {v}");
                }
            }
        }
    }

    #[test]
    fn iterative_mode_approximates_direct() {
        let s = TestProblem::Advection.build(8, 1e-3).unwrap();
        let r = random_vec(192, 3);
        for v in [Variant::Pn, Variant::Pbct] {
            let direct = SaddlePreconditioner::new(&s, v, InnerMode::Direct).unwrap();
            let iter = SaddlePreconditioner::new(&s, v, InnerMode::iterative(1e-10)).unwrap();
            let (mut a, mut b) = (vec![0.0; 192], vec![0.0; 192]);
            direct.apply(&r, &mut a).unwrap();
            iter.apply(&r, &mut b).unwrap();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            assert!(norm2(&d) < 1e-6 * norm2(&a), "{v}");
        }
    }

    #[test]
    fn inner_failure_reports_stage() {
        let s = TestProblem::Poisson.build(12, 1e-3).unwrap();
        let mode = InnerMode::Iterative { tol: 1e-14, maxit: 1, drop_tol: 0.5 };
        let p = SaddlePreconditioner::new(&s, Variant::Pn, mode).unwrap();
        let mut z = vec![0.0; s.order()];
        match p.apply(&random_vec(s.order(), 1), &mut z) {
            Err(Error::InnerSolve { stage, .. }) => assert_eq!(stage, 1),
            other => panic!("expected an inner-solve failure, got {other:?}"),
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("pq".parse::<Variant>().is_err());
    }
}
