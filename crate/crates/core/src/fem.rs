//! P1 finite elements on the uniform right-triangulated unit square.
//!
//! Interior nodes `(i, j)`, `1 <= i, j <= n`, sit at `(i h, j h)` with
//! `h = 1/(n+1)` and are numbered lexicographically with `i` (the x index)
//! running fastest. Every square cell is cut along its `(+1, +1)` diagonal and
//! boundary nodes are eliminated (homogeneous Dirichlet data).
//!
//! All element quantities are built from integer lattice gradients, so the
//! stiffness matrix is exact and the mass matrix is exact up to the factor `h^2`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// A real function on `[0,1]^2`.
pub trait ScalarField<T>: Fn(T, T) -> T + Sync {}

impl<T, F: Fn(T, T) -> T + Sync> ScalarField<T> for F {}

/// Uniform mesh with `n` interior nodes per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformMesh {
    n: usize,
}

/// One triangle: three lattice vertices `(i, j)` in counter-clockwise order.
type Triangle = [(usize, usize); 3];

impl UniformMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("mesh needs at least one interior node per direction".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width `1/(n+1)`.
    pub fn h<T: Real>(&self) -> T {
        T::one() / T::of_usize(self.n + 1)
    }

    /// Number of interior degrees of freedom, `n^2`.
    pub fn dofs(&self) -> usize {
        self.n * self.n
    }

    /// Global index of lattice node `(i, j)`, or `None` on the boundary.
    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> Option<usize> {
        (1..=self.n)
            .contains(&i)
            .then_some(())
            .filter(|_| (1..=self.n).contains(&j))
            .map(|_| (j - 1) * self.n + (i - 1))
    }

    /// Lattice coordinates `(i, j)` of interior dof `k`.
    pub fn node_lattice(&self, k: usize) -> (usize, usize) {
        (k % self.n + 1, k / self.n + 1)
    }

    pub fn node_coords<T: Real>(&self, k: usize) -> (T, T) {
        let (i, j) = self.node_lattice(k);
        let h = self.h::<T>();
        (T::of_usize(i) * h, T::of_usize(j) * h)
    }

    pub(crate) fn triangles(&self) -> impl Iterator<Item = Triangle> + '_ {
        (0..=self.n).flat_map(move |cj| {
            (0..=self.n).flat_map(move |ci| {
                [
                    [(ci, cj), (ci + 1, cj), (ci + 1, cj + 1)],
                    [(ci, cj), (ci + 1, cj + 1), (ci, cj + 1)],
                ]
            })
        })
    }
}

/// Lattice gradients of the three barycentric functions, i.e. `h * grad(phi_a)`.
///
/// Every triangle of the mesh has lattice area 1/2, so the gradients are integer.
fn lattice_gradients(t: &Triangle) -> [(i64, i64); 3] {
    let p = t.map(|(i, j)| (i as i64, j as i64));
    let twice_area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
    debug_assert_eq!(twice_area, 1);
    let mut g = [(0, 0); 3];
    for a in 0..3 {
        let b = p[(a + 1) % 3];
        let c = p[(a + 2) % 3];
        g[a] = (b.1 - c.1, c.0 - b.0);
    }
    g
}

fn scatter<T: Real>(
    mesh: &UniformMesh,
    mut local: impl FnMut(&Triangle, usize, usize) -> T,
) -> CsrMatrix<T> {
    let mut trip = Vec::with_capacity(mesh.dofs() * 7);
    for t in mesh.triangles() {
        let idx = t.map(|(i, j)| mesh.node_index(i, j));
        for a in 0..3 {
            let Some(ia) = idx[a] else { continue };
            for b in 0..3 {
                let Some(ib) = idx[b] else { continue };
                trip.push((ia, ib, local(&t, a, b)));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.dofs(), mesh.dofs(), &trip)
}

/// Mass matrix `(phi_i, phi_j)`; equals `h^2 T_n(m)`.
pub fn assemble_mass<T: Real>(mesh: &UniformMesh) -> CsrMatrix<T> {
    let h = mesh.h::<T>();
    // area / 12 * (1 + delta_ab), area = h^2 / 2
    let off = h * h / T::lit(24.0);
    let diag = h * h / T::lit(12.0);
    scatter(mesh, |_, a, b| if a == b { diag } else { off })
}

/// Stiffness matrix `(grad phi_i, grad phi_j)`; equals `T_n(kappa)`, the 5-point Laplacian.
pub fn assemble_stiffness<T: Real>(mesh: &UniformMesh) -> CsrMatrix<T> {
    scatter(mesh, |t, a, b| {
        let g = lattice_gradients(t);
        let d = g[a].0 * g[b].0 + g[a].1 * g[b].1;
        T::lit(d as f64) / T::lit(2.0)
    })
}

/// Convection matrix `V_ij = (c . grad phi_i, phi_j)`.
///
/// On each triangle `grad phi_i` is constant and `(1, phi_j) = area / 3`.
pub fn assemble_convection<T: Real>(mesh: &UniformMesh, c: (T, T)) -> CsrMatrix<T> {
    let h = mesh.h::<T>();
    // (c . g_a / h) * (h^2 / 2) / 3
    let w = h / T::lit(6.0);
    scatter(mesh, |t, a, _| {
        let g = lattice_gradients(t);
        (c.0 * T::lit(g[a].0 as f64) + c.1 * T::lit(g[a].1 as f64)) * w
    })
}

/// Load vector `(g, phi_i)` by the edge-midpoint rule on each triangle (exact for quadratics).
pub fn assemble_load<T: Real>(mesh: &UniformMesh, g: impl ScalarField<T>) -> Vec<T> {
    let h = mesh.h::<T>();
    let half = T::lit(0.5);
    // area / 3 * sum_e g(m_e) phi_a(m_e), with phi_a = 1/2 on the two edges through a
    let w = h * h / T::lit(12.0);
    let mut out = vec![T::zero(); mesh.dofs()];
    for t in mesh.triangles() {
        let pts = t.map(|(i, j)| (T::of_usize(i) * h, T::of_usize(j) * h));
        let mid = |a: usize, b: usize| ((pts[a].0 + pts[b].0) * half, (pts[a].1 + pts[b].1) * half);
        let gm = [0, 1, 2].map(|e| {
            let (x, y) = mid(e, (e + 1) % 3);
            g(x, y)
        });
        for a in 0..3 {
            if let Some(ia) = mesh.node_index(t[a].0, t[a].1) {
                // edges through vertex a: (a, a+1) and (a-1, a)
                out[ia] = out[ia] + w * (gm[a] + gm[(a + 2) % 3]);
            }
        }
    }
    out
}

/// Nodal values of `g` at the interior nodes.
pub fn interpolate<T: Real>(mesh: &UniformMesh, g: impl ScalarField<T>) -> Vec<T> {
    (0..mesh.dofs())
        .map(|k| {
            let (x, y) = mesh.node_coords::<T>(k);
            g(x, y)
        })
        .collect()
}
