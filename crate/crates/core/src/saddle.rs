//! Scaled optimality systems of distributed control with a Poisson or an
//! advection-diffusion-reaction state equation.
//!
//! The unscaled system in the unknowns `(y, u, p)` reads
//!
//! ```text
//! [ Mb   0     Zb^T ] [y]   [ Mb y_d ]
//! [ 0    a Mb  -Mb  ] [u] = [   0    ]
//! [ Zb   -Mb   0    ] [p]   [   z    ]
//! ```
//!
//! with `Zb = Kb` (Poisson) or `Zb = Kb + Vb + r Mb` (advection). The scaled matrix
//! is `A = D1 Abar D2`, `D1 = diag(h^2 I, I, I)`, `D2 = diag(I, I/h^2, I/h^2)`, so
//! `A = [[h^4 M, 0, Z^T], [0, a M, -M], [Z, -M, 0]]` with `M = Mb/h^2`, `K = Kb`
//! and `Z = K + h V + r h^2 M`, `V = Vb/h`.

use crate::error::{Error, Result};
use crate::fem::{assemble_convection, assemble_load, assemble_mass, assemble_stiffness, interpolate, ScalarField, UniformMesh};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind<T> {
    Poisson,
    /// `-Laplace y + c . grad y + r y`
    Advection { c: (T, T), r: T },
}

/// How the desired state enters the first block of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetLoad {
    /// `(y_d, phi_i)` by quadrature.
    #[default]
    Projected,
    /// `Mb` times the nodal interpolant of `y_d`.
    Interpolated,
}

#[derive(Debug, Clone)]
pub struct SaddleSystem<T: Real> {
    mesh: UniformMesh,
    alpha: T,
    kind: ConstraintKind<T>,
    m: CsrMatrix<T>,
    k: CsrMatrix<T>,
    v: Option<CsrMatrix<T>>,
    z: CsrMatrix<T>,
    a: CsrMatrix<T>,
    b_bar: Vec<T>,
    b: Vec<T>,
}

/// Builds the scaled system with the projected target load.
pub fn build_system<T: Real>(
    n: usize,
    alpha: T,
    kind: ConstraintKind<T>,
    y_d: impl ScalarField<T>,
    z: impl ScalarField<T>,
) -> Result<SaddleSystem<T>> {
    build_system_with(n, alpha, kind, y_d, z, TargetLoad::default())
}

pub fn build_system_with<T: Real>(
    n: usize,
    alpha: T,
    kind: ConstraintKind<T>,
    y_d: impl ScalarField<T>,
    z: impl ScalarField<T>,
    target: TargetLoad,
) -> Result<SaddleSystem<T>> {
    let mesh = UniformMesh::new(n)?;
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive and finite, got {alpha}")));
    }
    let h = mesh.h::<T>();
    let h2 = h * h;
    let m_bar = assemble_mass::<T>(&mesh);
    let m = m_bar.scaled(T::one() / h2);
    let k = assemble_stiffness::<T>(&mesh);
    let (v, zmat) = match kind {
        ConstraintKind::Poisson => (None, k.clone()),
        ConstraintKind::Advection { c, r } => {
            if !c.0.is_finite() || !c.1.is_finite() || !r.is_finite() {
                return Err(Error::InvalidParameter("advection coefficients must be finite".into()));
            }
            let v = assemble_convection(&mesh, c).scaled(T::one() / h);
            let z = k.lin_comb(T::one(), &v, h).lin_comb(T::one(), &m, r * h2);
            (Some(v), z)
        }
    };
    let zt = zmat.transpose();
    let h4m = m.scaled(h2 * h2);
    let am = m.scaled(alpha);
    let neg_m = m.scaled(-T::one());
    let a = CsrMatrix::block(&[
        vec![Some(&h4m), None, Some(&zt)],
        vec![None, Some(&am), Some(&neg_m)],
        vec![Some(&zmat), Some(&neg_m), None],
    ])?;
    let top = match target {
        TargetLoad::Projected => assemble_load(&mesh, &y_d),
        TargetLoad::Interpolated => m_bar.mul_vec(&interpolate(&mesh, &y_d)),
    };
    let dofs = mesh.dofs();
    let mut b_bar = top;
    b_bar.extend(std::iter::repeat_n(T::zero(), dofs));
    b_bar.extend(assemble_load(&mesh, &z));
    let b = b_bar.iter().enumerate().map(|(i, &v)| if i < dofs { v * h2 } else { v }).collect();
    Ok(SaddleSystem { mesh, alpha, kind, m, k, v, z: zmat, a, b_bar, b })
}

impl<T: Real> SaddleSystem<T> {
    pub fn mesh(&self) -> &UniformMesh {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.mesh.n()
    }

    pub fn h(&self) -> T {
        self.mesh.h()
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn kind(&self) -> ConstraintKind<T> {
        self.kind
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self.kind, ConstraintKind::Poisson)
    }

    /// Order `3 n^2` of the full system.
    pub fn order(&self) -> usize {
        3 * self.mesh.dofs()
    }

    /// Scaled mass matrix `M = Mb / h^2`.
    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.m
    }

    /// Stiffness matrix `K = Kb`.
    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.k
    }

    /// Scaled convection matrix `V = Vb / h` (advection only).
    pub fn convection(&self) -> Option<&CsrMatrix<T>> {
        self.v.as_ref()
    }

    /// The constraint operator `Z` (equal to `K` for Poisson).
    pub fn constraint(&self) -> &CsrMatrix<T> {
        &self.z
    }

    /// Scaled matrix `A = D1 Abar D2`.
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.a
    }

    /// Scaled right-hand side `D1 bbar`.
    pub fn rhs(&self) -> &[T] {
        &self.b
    }

    pub fn unscaled_rhs(&self) -> &[T] {
        &self.b_bar
    }

    /// Diagonals of `D1` and `D2`.
    pub fn scalings(&self) -> (Vec<T>, Vec<T>) {
        let d = self.mesh.dofs();
        let h2 = self.h() * self.h();
        let d1 = (0..3 * d).map(|i| if i < d { h2 } else { T::one() }).collect();
        let d2 = (0..3 * d).map(|i| if i < d { T::one() } else { T::one() / h2 }).collect();
        (d1, d2)
    }

    /// Unscaled matrix `Abar`.
    pub fn unscaled_matrix(&self) -> CsrMatrix<T> {
        let h2 = self.h() * self.h();
        let mb = self.m.scaled(h2);
        let zb = self.z.clone();
        let zbt = zb.transpose();
        let amb = mb.scaled(self.alpha);
        let neg = mb.scaled(-T::one());
        CsrMatrix::block(&[
            vec![Some(&mb), None, Some(&zbt)],
            vec![None, Some(&amb), Some(&neg)],
            vec![Some(&zb), Some(&neg), None],
        ])
        .expect("blocks have matching sizes")
    }

    /// Recovers `xbar = D2 y`, the solution of the unscaled system.
    pub fn unscale_solution(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), found: y.len() });
        }
        let (_, d2) = self.scalings();
        Ok(y.iter().zip(d2).map(|(a, b)| *a * b).collect())
    }

    /// `perm[3k + l] = l n^2 + k`: unknowns interleaved as `(y_k, u_k, p_k)` per node.
    pub fn interleaving(&self) -> Vec<usize> {
        let d = self.mesh.dofs();
        (0..3 * d).map(|i| (i % 3) * d + i / 3).collect()
    }

    /// `B_N = Pi A Pi^T`, the two-level block Toeplitz form (plus a small correction).
    pub fn permute_to_block_toeplitz(&self) -> Result<CsrMatrix<T>> {
        if !self.is_poisson() {
            return Err(Error::RequiresPoisson);
        }
        Ok(self.a.permute_symmetric(&self.interleaving()))
    }
}

/// The two model problems used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestProblem {
    /// Poisson constraint with an oscillating target.
    Poisson,
    /// Advection-diffusion-reaction constraint, `c = (2, 3)`, `r = 1`, two Gaussian targets.
    Advection,
}

impl TestProblem {
    pub fn kind<T: Real>(self) -> ConstraintKind<T> {
        match self {
            Self::Poisson => ConstraintKind::Poisson,
            Self::Advection => ConstraintKind::Advection { c: (T::lit(2.0), T::lit(3.0)), r: T::one() },
        }
    }

    pub fn desired_state<T: Real>(self, x: T, y: T) -> T {
        let pi = T::PI();
        match self {
            Self::Poisson => {
                let e = T::lit(8.0) * pi;
                -(e * x).sin() * (e * y).sin() + (pi * x).sin() * (pi * y).sin()
            }
            Self::Advection => {
                let bump = |w: f64, s: f64, cx: f64| {
                    let (s, cx) = (T::lit(s), T::lit(cx));
                    let r2 = (x - cx) * (x - cx) + (y - cx) * (y - cx);
                    T::lit(w) / (s * (T::lit(2.0) * pi).sqrt()) * (-r2 / (T::lit(2.0) * s * s)).exp()
                };
                bump(0.5, 0.07, 0.2) + bump(0.8, 0.05, 0.6)
            }
        }
    }

    pub fn forcing<T: Real>(self, x: T, y: T) -> T {
        let pi = T::PI();
        match self {
            Self::Poisson => {
                let e = T::lit(8.0) * pi;
                T::lit(2.0) * pi * pi * (pi * x).sin()
                    + (e * x).sin() * (e * y).sin() / (T::lit(128.0) * pi * pi)
            }
            Self::Advection => (pi * x).sin() * (pi * y).sin(),
        }
    }

    pub fn build<T: Real>(self, n: usize, alpha: T) -> Result<SaddleSystem<T>> {
        self.build_with(n, alpha, self.kind(), TargetLoad::default())
    }

    /// Uses this problem's data with an explicit constraint kind and target load.
    pub fn build_with<T: Real>(
        self,
        n: usize,
        alpha: T,
        kind: ConstraintKind<T>,
        target: TargetLoad,
    ) -> Result<SaddleSystem<T>> {
        build_system_with(n, alpha, kind, move |x, y| self.desired_state(x, y), move |x, y| self.forcing(x, y), target)
    }
}
