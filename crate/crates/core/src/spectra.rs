//! Eigenvalue functions of the saddle symbol, interval bounds, eigenvalue
//! counting by inertia, matching of eigenvalues to symbol samples, and the
//! spectrum of the preconditioned matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inertia::{count_below, Side};
use crate::krylov::Preconditioner;
use crate::precond::{target_system, InnerMode, SaddlePreconditioner, Variant};
use crate::saddle::SaddleSystem;
use crate::scalar::{DenseReal, Real};
use crate::sparse::CsrMatrix;

/// Default largest order handed to a dense eigensolver.
pub const DENSE_LIMIT: usize = 6000;

/// Eigenvalues of a symmetric 3x3 matrix in ascending order.
///
/// Householder reduction to tridiagonal form followed by implicit QL.
/// Inputs with `max |a_ij - a_ji| > 1e-12` are rejected.
pub fn eig3_symmetric<T: Real>(a: &[[T; 3]; 3]) -> Result<[T; 3]> {
    let mut asym = T::zero();
    for i in 0..3 {
        for j in 0..i {
            asym = asym.max((a[i][j] - a[j][i]).abs());
        }
    }
    if asym > T::lit(1e-12) {
        return Err(Error::NotSymmetric { asymmetry: asym.as_f64() });
    }
    let (mut d, mut e) = tridiagonalize(a);
    tql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(d)
}

/// Diagonal `d` and off-diagonal `e` (`e[i]` couples `d[i]`, `d[i+1]`).
fn tridiagonalize<T: Real>(a: &[[T; 3]; 3]) -> ([T; 3], [T; 3]) {
    let (x0, x1) = (a[1][0], a[2][0]);
    if x1 == T::zero() {
        return ([a[0][0], a[1][1], a[2][2]], [x0, a[2][1], T::zero()]);
    }
    let norm = x0.hypot(x1);
    let alpha = if x0 > T::zero() { -norm } else { norm };
    // reflector I - beta u u^T acting on indices 1, 2
    let u = [x0 - alpha, x1];
    let beta = T::lit(2.0) / (u[0] * u[0] + u[1] * u[1]);
    let b = [[a[1][1], a[1][2]], [a[2][1], a[2][2]]];
    let p = [beta * (b[0][0] * u[0] + b[0][1] * u[1]), beta * (b[1][0] * u[0] + b[1][1] * u[1])];
    let k = beta / T::lit(2.0) * (u[0] * p[0] + u[1] * p[1]);
    let q = [p[0] - k * u[0], p[1] - k * u[1]];
    let two = T::lit(2.0);
    let c00 = b[0][0] - two * u[0] * q[0];
    let c11 = b[1][1] - two * u[1] * q[1];
    let c10 = b[1][0] - u[1] * q[0] - q[1] * u[0];
    ([a[0][0], c00, c11], [alpha, c10, T::zero()])
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
fn tql<T: Real>(d: &mut [T; 3], e: &mut [T; 3]) -> Result<()> {
    let n = 3;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Breakdown { method: "tridiagonal QL", iteration: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (T::lit(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r } else { -r });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::lit(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// `f(theta)` for the saddle symbol: `[[0, 0, kappa], [0, alpha m, -m], [kappa, -m, 0]]`.
pub fn saddle_symbol_at<T: Real>(alpha: T, t1: T, t2: T) -> [[T; 3]; 3] {
    let (c1, c2, c12) = (t1.cos(), t2.cos(), (t1 + t2).cos());
    let six = T::lit(6.0);
    let m = T::lit(0.5) + c1 / six + c2 / six + c12 / six;
    let kappa = T::lit(4.0) - T::lit(2.0) * (c1 + c2);
    let z = T::zero();
    [[z, z, kappa], [z, alpha * m, -m], [kappa, -m, z]]
}

/// Grid angle `j pi / g`.
pub fn grid_angle<T: Real>(j: usize, g: usize) -> T {
    T::of_usize(j) * T::PI() / T::of_usize(g)
}

/// Eigenvalue functions sampled on `(j pi/g, k pi/g)`, `j, k = 0..g-1`.
#[derive(Debug, Clone)]
pub struct SymbolSampling<T> {
    pub g: usize,
    pub alpha: T,
    /// `values[j * g + k]` are the ascending eigenvalues at grid point `(j, k)`.
    pub values: Vec<[T; 3]>,
}

impl<T: Real> SymbolSampling<T> {
    pub fn point(&self, idx: usize) -> (usize, usize) {
        (idx / self.g, idx % self.g)
    }

    /// The sorted vector of samples of the `l`-th eigenvalue function (`l = 0, 1, 2`).
    pub fn sorted(&self, l: usize) -> Vec<T> {
        let mut v: Vec<T> = self.values.iter().map(|e| e[l]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        v
    }

    /// `P_1`, `P_2`, `P_3` sorted and concatenated.
    pub fn concatenated(&self) -> Vec<T> {
        (0..3).flat_map(|l| self.sorted(l)).collect()
    }

    /// Samples of the `l`-th eigenvalue function with their grid points, in grid order.
    pub fn labelled(&self, l: usize) -> Vec<(T, (usize, usize))> {
        self.values.iter().enumerate().map(|(i, e)| (e[l], self.point(i))).collect()
    }
}

pub fn sample_symbol<T: Real>(alpha: T, g: usize) -> Result<SymbolSampling<T>> {
    check_grid(alpha, g)?;
    let values = (0..g * g)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / g, idx % g);
            eig3_symmetric(&saddle_symbol_at(alpha, grid_angle(j, g), grid_angle(k, g)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolSampling { g, alpha, values })
}

fn check_grid<T: Real>(alpha: T, g: usize) -> Result<()> {
    if g < 2 {
        return Err(Error::InvalidParameter(format!("grid size must be at least 2, got {g}")));
    }
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter("alpha must be positive".into()));
    }
    Ok(())
}

/// `(m_l, M_l)`: extremes of each sampled eigenvalue function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalBounds<T> {
    pub m1: T,
    #[serde(rename = "M1")]
    pub big_m1: T,
    pub m2: T,
    #[serde(rename = "M2")]
    pub big_m2: T,
    pub m3: T,
    #[serde(rename = "M3")]
    pub big_m3: T,
}

impl<T: Real> IntervalBounds<T> {
    pub fn pairs(&self) -> [(T, T); 3] {
        [(self.m1, self.big_m1), (self.m2, self.big_m2), (self.m3, self.big_m3)]
    }

    fn from_extremes(lo: [T; 3], hi: [T; 3]) -> Self {
        Self { m1: lo[0], big_m1: hi[0], m2: lo[1], big_m2: hi[1], m3: lo[2], big_m3: hi[2] }
    }
}

/// Bounds from the `g x g` sampling, computed without storing the samples.
pub fn interval_bounds<T: Real>(alpha: T, g: usize) -> Result<IntervalBounds<T>> {
    check_grid(alpha, g)?;
    let merge = |mut a: ([T; 3], [T; 3]), b: ([T; 3], [T; 3])| {
        for l in 0..3 {
            a.0[l] = a.0[l].min(b.0[l]);
            a.1[l] = a.1[l].max(b.1[l]);
        }
        Ok::<_, Error>(a)
    };
    let (lo, hi) = (0..g)
        .into_par_iter()
        .map(|j| {
            let t1 = grid_angle::<T>(j, g);
            let mut acc = ([T::infinity(); 3], [T::neg_infinity(); 3]);
            for k in 0..g {
                let e = eig3_symmetric(&saddle_symbol_at(alpha, t1, grid_angle(k, g)))?;
                acc = merge(acc, (e, e))?;
            }
            Ok(acc)
        })
        .try_reduce(|| ([T::infinity(); 3], [T::neg_infinity(); 3]), merge)?;
    Ok(IntervalBounds::from_extremes(lo, hi))
}

/// Which endpoints an interval contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closedness {
    /// `(a, b)`
    Open,
    /// `(a, b]`
    OpenClosed,
    /// `[a, b)`
    ClosedOpen,
    /// `[a, b]`
    Closed,
}

impl Closedness {
    pub fn contains<T: Real>(self, a: T, b: T, x: T) -> bool {
        let left = match self {
            Closedness::Open | Closedness::OpenClosed => x > a,
            _ => x >= a,
        };
        let right = match self {
            Closedness::Open | Closedness::ClosedOpen => x < b,
            _ => x <= b,
        };
        left && right
    }
}

/// Number of eigenvalues of the symmetric matrix `a` in the interval between `lo` and `hi`.
///
/// Uses Sylvester's law of inertia on `A - sigma I` at both endpoints.
pub fn count_eigs_in_interval<T: Real>(a: &CsrMatrix<T>, lo: T, hi: T, closedness: Closedness) -> Result<usize> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty interval ({lo}, {hi})")));
    }
    let asym = a.asymmetry();
    if asym > T::epsilon() * T::lit(64.0) * a.max_abs() {
        return Err(Error::NotSymmetric { asymmetry: asym.as_f64() });
    }
    let (left_side, right_side) = match closedness {
        Closedness::Open => (Side::AtOrBelow, Side::Below),
        Closedness::OpenClosed => (Side::AtOrBelow, Side::AtOrBelow),
        Closedness::ClosedOpen => (Side::Below, Side::Below),
        Closedness::Closed => (Side::Below, Side::AtOrBelow),
    };
    let upper = count_below(a, hi, right_side)?;
    let lower = count_below(a, lo, left_side)?;
    Ok(upper.saturating_sub(lower))
}

/// Conventions used for the three symbol intervals.
pub const INTERVAL_CLOSEDNESS: [Closedness; 3] = [Closedness::OpenClosed, Closedness::OpenClosed, Closedness::ClosedOpen];

/// All eigenvalues of a symmetric matrix, ascending, by a dense solver.
pub fn full_spectrum<T: DenseReal>(a: &CsrMatrix<T>, dense_limit: usize) -> Result<Vec<T>> {
    let n = a.nrows();
    if n > dense_limit {
        return Err(Error::SizeLimit { order: n, limit: dense_limit });
    }
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
    }
    let asym = a.asymmetry();
    if asym > <T as Real>::lit(1e-12) * (<T as num_traits::One>::one() + a.max_abs()) {
        return Err(Error::NotSymmetric { asymmetry: asym.as_f64() });
    }
    let mut e: Vec<T> = a.to_dense().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair<T> {
    pub eigenvalue: T,
    pub sample: T,
    pub j: usize,
    pub k: usize,
    pub error: T,
}

/// Associates each eigenvalue with the nearest sample; ties go to the smallest `(j, k)`.
pub fn match_eigenvalues<T: Real>(block: &[T], samples: &[(T, (usize, usize))]) -> Result<Vec<MatchedPair<T>>> {
    if block.is_empty() || samples.is_empty() {
        return Err(Error::InvalidParameter("matching needs nonempty eigenvalue and sample sets".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite samples").then(a.1.cmp(&b.1)));
    Ok(block
        .iter()
        .map(|&lambda| {
            let p = sorted.partition_point(|s| s.0 < lambda);
            let mut best: Option<(T, T, (usize, usize))> = None;
            let mut consider = |idx: usize| {
                let (v, pt) = sorted[idx];
                let d = (lambda - v).abs();
                best = match best {
                    Some((bd, _, bpt)) if bd < d || (bd == d && bpt <= pt) => best,
                    _ => Some((d, v, pt)),
                };
            };
            if p < sorted.len() {
                consider(p);
            }
            if p > 0 {
                let below = sorted[p - 1].0;
                consider(sorted.partition_point(|s| s.0 < below));
            }
            let (error, sample, (j, k)) = best.expect("nonempty samples");
            MatchedPair { eigenvalue: lambda, sample, j, k, error }
        })
        .collect())
}

/// Counts of the spectrum of `B_N` against the symbol intervals.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport<T> {
    pub n: usize,
    pub alpha: T,
    pub bounds: IntervalBounds<T>,
    /// Eigenvalues in `(m1, M1]`, `(m2, M2]`, `[m3, M3)`.
    pub counts: [usize; 3],
    /// `n^2` minus the count of the middle interval.
    pub outliers: usize,
    /// `outliers / (3 n^2)`
    pub ratio: f64,
    /// `outliers / sqrt(3 n^2)`
    pub ratio_sqrt: f64,
}

/// Counts the eigenvalues of `B_N` in the three intervals predicted by the symbol.
pub fn spectral_report<T: Real>(sys: &SaddleSystem<T>, bounds: IntervalBounds<T>) -> Result<SpectralReport<T>> {
    let b = sys.permute_to_block_toeplitz()?;
    let counts = bounds
        .pairs()
        .into_par_iter()
        .zip(INTERVAL_CLOSEDNESS)
        .map(|((lo, hi), c)| count_eigs_in_interval(&b, lo, hi, c))
        .collect::<Result<Vec<_>>>()?;
    let n2 = sys.mesh().dofs();
    let outliers = n2.saturating_sub(counts[1]);
    let order = (3 * n2) as f64;
    Ok(SpectralReport {
        n: sys.n(),
        alpha: sys.alpha(),
        bounds,
        counts: [counts[0], counts[1], counts[2]],
        outliers,
        ratio: outliers as f64 / order,
        ratio_sqrt: outliers as f64 / order.sqrt(),
    })
}

/// Generalized eigenvalues `mu` of `M x = mu Z M^{-1} Z^T x`, ascending.
pub fn pencil_eigenvalues<T: DenseReal>(m: &CsrMatrix<T>, z: &CsrMatrix<T>) -> Result<Vec<T>> {
    let md = m.to_dense();
    let zd = z.to_dense();
    let mchol = md.clone().cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let minv_zt = mchol.solve(&zd.transpose());
    let mut s = &zd * minv_zt;
    s = (&s + s.transpose()) * <T as Real>::lit(0.5);
    let g = s.cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let l = g.l();
    // G^{-1} M G^{-T}
    let x = l.solve_lower_triangular(&md).ok_or(Error::Singular { row: 0 })?;
    let y = l.solve_lower_triangular(&x.transpose()).ok_or(Error::Singular { row: 0 })?;
    let c = (&y + y.transpose()) * <T as Real>::lit(0.5);
    let mut e: Vec<T> = c.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(e)
}

/// Non-unit eigenvalues predicted for `P^{-1} A` from the pencil eigenvalues `mu`.
///
/// `P_N`, `P_BCT`: `1 + (h^4/alpha) mu`. `P~_BCT`, `P_D`: `1 + alpha / (h^4 mu)`.
pub fn predicted_non_unit<T: DenseReal>(sys: &SaddleSystem<T>, variant: Variant) -> Result<Vec<T>> {
    let one = <T as num_traits::One>::one();
    let h = sys.h();
    let h4 = h * h * h * h;
    let alpha = sys.alpha();
    let mu = pencil_eigenvalues(sys.mass(), sys.constraint())?;
    let mut out: Vec<T> = match variant {
        Variant::Pn | Variant::Pbct => mu.iter().map(|&m| one + h4 / alpha * m).collect(),
        Variant::PtildeBct | Variant::Pd => mu.iter().map(|&m| one + alpha / (h4 * m)).collect(),
        Variant::Identity => return Err(Error::InvalidParameter("no prediction for the identity".into())),
    };
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecheckReport<T> {
    pub variant: String,
    pub n: usize,
    pub alpha: T,
    pub order: usize,
    /// Eigenvalues within `1e-8` of one.
    pub unit_count: usize,
    /// Eigenvalues `(re, im)` sorted by real part.
    pub eigenvalues: Vec<(T, T)>,
    /// Predicted non-unit eigenvalues (empty for the identity).
    pub predicted: Vec<T>,
    /// Largest relative deviation between the computed spectrum and `{1 (x 2n^2)} + predicted`.
    pub mismatch: Option<T>,
    pub max_imag: T,
    pub lambda_min: T,
    pub lambda_max: T,
}

/// Eigenvalues `(re, im)` of a general dense matrix, computed in double precision.
pub fn nonsymmetric_eigenvalues<T: DenseReal>(a: &DMatrix<T>) -> Result<Vec<(T, T)>> {
    let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].as_f64());
    let e = m
        .eigenvalues()
        .map_err(|_| Error::Breakdown { method: "nonsymmetric eigensolver", iteration: 0 })?;
    Ok(e.iter().map(|c| (<T as Real>::lit(c.re), <T as Real>::lit(c.im))).collect())
}

/// Dense spectrum of `P^{-1} A` (direct inner solves), compared with the pencil prediction.
pub fn preconditioned_spectrum_check<T: DenseReal>(
    sys: &SaddleSystem<T>,
    variant: Variant,
    dense_limit: usize,
) -> Result<PrecheckReport<T>> {
    let order = sys.order();
    if order > dense_limit {
        return Err(Error::SizeLimit { order, limit: dense_limit });
    }
    let zero = <T as num_traits::Zero>::zero();
    let one = <T as num_traits::One>::one();
    let (a, _) = target_system(sys, variant);
    let p = SaddlePreconditioner::new(sys, variant, InnerMode::Direct)?;
    let ad = a.to_dense();
    let mut pa = DMatrix::from_element(order, order, zero);
    let mut col = vec![zero; order];
    for j in 0..order {
        let aj: Vec<T> = ad.column(j).iter().copied().collect();
        p.apply(&aj, &mut col)?;
        pa.column_mut(j).copy_from_slice(&col);
    }
    let mut eig: Vec<(T, T)> = if variant == Variant::Identity && sys.is_poisson() {
        pa.symmetric_eigenvalues().iter().map(|&v| (v, zero)).collect()
    } else {
        nonsymmetric_eigenvalues(&pa)?
    };
    eig.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite").then(x.1.partial_cmp(&y.1).expect("finite")));
    let tol = <T as Real>::lit(1e-8);
    let unit_count = eig.iter().filter(|(re, im)| num_traits::Float::hypot(*re - one, *im) <= tol).count();
    let predicted = if variant == Variant::Identity { Vec::new() } else { predicted_non_unit(sys, variant)? };
    let mismatch = (!predicted.is_empty()).then(|| {
        let mut expected = vec![one; order - predicted.len()];
        expected.extend(predicted.iter().copied());
        expected.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        eig.iter()
            .zip(&expected)
            .map(|(&(re, im), &e)| num_traits::Float::hypot(re - e, im) / num_traits::Float::max(one, num_traits::Float::abs(e)))
            .fold(zero, |m, v| num_traits::Float::max(m, v))
    });
    let max_imag = eig.iter().fold(zero, |m, e| num_traits::Float::max(m, num_traits::Float::abs(e.1)));
    Ok(PrecheckReport {
        variant: variant.name().to_string(),
        n: sys.n(),
        alpha: sys.alpha(),
        order,
        unit_count,
        lambda_min: eig.first().map(|e| e.0).unwrap_or(zero),
        lambda_max: eig.last().map(|e| e.0).unwrap_or(zero),
        eigenvalues: eig,
        predicted,
        mismatch,
        max_imag,
    })
}
