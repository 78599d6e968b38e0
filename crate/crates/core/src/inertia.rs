//! Inertia of sparse symmetric banded matrices by Bunch-Kaufman `L D L^T`.
//!
//! Only `D` is needed (Sylvester's law of inertia), so `L` is discarded as the
//! elimination sweeps forward. The trailing matrix lives in a circular dense
//! window that grows when symmetric interchanges push fill past its edge.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Numbers of negative, zero and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

struct Window<'a, T> {
    a: &'a CsrMatrix<T>,
    shift: T,
    n: usize,
    cap: usize,
    // lower triangle, slot (i % cap, j % cap) for i >= j
    w: Vec<T>,
    // indices < loaded are present in the window
    loaded: usize,
    // bound on the last row holding a nonzero in column j of the trailing matrix
    reach: Vec<usize>,
}

impl<'a, T: Real> Window<'a, T> {
    fn new(a: &'a CsrMatrix<T>, shift: T) -> Self {
        let n = a.nrows();
        let mut reach: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for &j in a.row(i).0 {
                if j < i && reach[j] < i {
                    reach[j] = i;
                }
            }
        }
        let bw = (0..n).map(|j| reach[j] - j).max().unwrap_or(0);
        let cap = (2 * bw + 2).min(n.max(1));
        let mut win = Self { a, shift, n, cap, w: vec![T::zero(); cap * cap], loaded: 0, reach };
        win.load_until(0, cap);
        win
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i < self.loaded);
        (i % self.cap) * self.cap + (j % self.cap)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.w[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.w[k] = v;
    }

    /// Loads original rows `loaded..end` (capped at `n` and `k + cap`).
    fn load_until(&mut self, k: usize, end: usize) {
        let end = end.min(self.n).min(k + self.cap);
        while self.loaded < end {
            let q = self.loaded;
            let base = (q % self.cap) * self.cap;
            self.w[base..base + self.cap].fill(T::zero());
            self.loaded += 1;
            let (cols, vals) = self.a.row(q);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= k && j <= q {
                    let v = if j == q { v - self.shift } else { v };
                    self.set(q, j, v);
                }
            }
            if !cols.contains(&q) {
                self.set(q, q, -self.shift);
            }
        }
    }

    /// Makes rows `k..=last` available, growing the window if needed.
    fn ensure(&mut self, k: usize, last: usize) {
        if last < self.loaded {
            return;
        }
        if last >= k + self.cap {
            let new_cap = (2 * self.cap).max(last - k + 1).min(self.n);
            let mut w = vec![T::zero(); new_cap * new_cap];
            for i in k..self.loaded {
                for j in k..=i {
                    w[(i % new_cap) * new_cap + (j % new_cap)] = self.get(i, j);
                }
            }
            self.w = w;
            self.cap = new_cap;
        }
        self.load_until(k, last + 1);
    }

    /// Symmetric interchange of indices `p < q` in the trailing matrix starting at `k`.
    fn swap(&mut self, k: usize, p: usize, q: usize) {
        let last = self.reach[p].max(self.reach[q]).max(q);
        self.ensure(k, last);
        let (pp, qq) = (self.get(p, p), self.get(q, q));
        self.set(p, p, qq);
        self.set(q, q, pp);
        for j in k..p {
            let (a, b) = (self.idx(p, j), self.idx(q, j));
            self.w.swap(a, b);
        }
        for i in p + 1..q {
            let (a, b) = (self.idx(i, p), self.idx(q, i));
            self.w.swap(a, b);
        }
        for i in q + 1..=last {
            let (a, b) = (self.idx(i, p), self.idx(i, q));
            self.w.swap(a, b);
        }
        for j in k..=q {
            self.reach[j] = self.reach[j].max(last);
        }
    }
}

/// Computes the inertia of `A - shift I` for a symmetric `A`.
///
/// Fails with [`Error::Singular`] when a pivot vanishes to working precision,
/// which happens when `shift` is (numerically) an eigenvalue.
pub fn inertia<T: Real>(a: &CsrMatrix<T>, shift: T) -> Result<Inertia> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    let n = a.nrows();
    let scale = a.max_abs().max(shift.abs()).max(T::min_positive_value());
    let tiny = scale * T::epsilon() * T::lit(4.0);
    let alpha_bk = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
    let mut win = Window::new(a, shift);
    let mut out = Inertia::default();
    let mut k = 0;
    while k < n {
        let rk = win.reach[k];
        win.ensure(k, rk);
        let akk = win.get(k, k).abs();
        let (mut lambda, mut r) = (T::zero(), k);
        for i in k + 1..=rk {
            let v = win.get(i, k).abs();
            if v > lambda {
                lambda = v;
                r = i;
            }
        }
        let two_by_two = if lambda == T::zero() || akk >= alpha_bk * lambda {
            false
        } else {
            let rr = win.reach[r];
            win.ensure(k, rr);
            let mut sigma = T::zero();
            for j in k..=rr.max(r) {
                if j != r {
                    sigma = sigma.max(win.get(r, j).abs());
                }
            }
            if akk * sigma >= alpha_bk * lambda * lambda {
                false
            } else if win.get(r, r).abs() >= alpha_bk * sigma {
                win.swap(k, k, r);
                false
            } else {
                if r != k + 1 {
                    win.swap(k, k + 1, r);
                }
                true
            }
        };
        if !two_by_two {
            let d = win.get(k, k);
            if d.abs() <= tiny {
                return Err(Error::Singular { row: k });
            }
            if d < T::zero() {
                out.negative += 1;
            } else {
                out.positive += 1;
            }
            let last = win.reach[k];
            win.ensure(k, last);
            for j in k + 1..=last {
                let l = win.get(j, k) / d;
                if l == T::zero() {
                    continue;
                }
                for i in j..=last {
                    let v = win.get(i, j) - win.get(i, k) * l;
                    win.set(i, j, v);
                }
                win.reach[j] = win.reach[j].max(last);
            }
            k += 1;
        } else {
            let (p, q) = (k, k + 1);
            let (a11, a21, a22) = (win.get(p, p), win.get(q, p), win.get(q, q));
            let det = a11 * a22 - a21 * a21;
            if det.abs() <= tiny * tiny {
                return Err(Error::Singular { row: k });
            }
            if det < T::zero() {
                out.negative += 1;
                out.positive += 1;
            } else if a11 + a22 < T::zero() {
                out.negative += 2;
            } else {
                out.positive += 2;
            }
            let last = win.reach[p].max(win.reach[q]);
            win.ensure(k, last);
            // W_i = [a_ip, a_iq] D^{-1}
            let (d11, d12, d22) = (a22 / det, -a21 / det, a11 / det);
            for j in q + 1..=last {
                let (xj, yj) = (win.get(j, p), win.get(j, q));
                if xj == T::zero() && yj == T::zero() {
                    continue;
                }
                let (wj1, wj2) = (xj * d11 + yj * d12, xj * d12 + yj * d22);
                for i in j..=last {
                    let v = win.get(i, j) - win.get(i, p) * wj1 - win.get(i, q) * wj2;
                    win.set(i, j, v);
                }
                win.reach[j] = win.reach[j].max(last);
            }
            k += 2;
        }
        win.load_until(k, k + win.cap);
    }
    Ok(out)
}

/// Which side of the shift a count refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// eigenvalues `< sigma`
    Below,
    /// eigenvalues `<= sigma`
    AtOrBelow,
}

/// Counts eigenvalues below (or at and below) `sigma`.
///
/// When `sigma` is numerically an eigenvalue the shift is nudged by
/// `1e-12 ||A||` (doubling per retry) towards the side that keeps the count unchanged.
pub fn count_below<T: Real>(a: &CsrMatrix<T>, sigma: T, side: Side) -> Result<usize> {
    let base = a.max_abs().max(T::min_positive_value()) * T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let retries = 8;
    let mut delta = T::zero();
    for attempt in 0..=retries {
        let s = match side {
            Side::Below => sigma - delta,
            Side::AtOrBelow => sigma + delta,
        };
        match inertia(a, s) {
            Ok(i) => {
                return Ok(match side {
                    Side::Below => i.negative,
                    Side::AtOrBelow => i.negative + i.zero,
                });
            }
            Err(Error::Singular { .. }) if attempt < retries => {
                delta = if delta == T::zero() { base } else { delta * T::lit(2.0) };
            }
            Err(Error::Singular { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InertiaBreakdown { shift: sigma.as_f64(), retries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_count(a: &CsrMatrix<f64>, sigma: f64) -> (usize, usize) {
        let e = a.to_dense().symmetric_eigenvalues();
        (e.iter().filter(|&&v| v < sigma).count(), e.iter().filter(|&&v| v > sigma).count())
    }

    fn random_symmetric_banded(n: usize, bw: usize, zero_diag: bool, seed: u64) -> CsrMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                if i == j && zero_diag {
                    continue;
                }
                let v = rng.random_range(-1.0..1.0);
                t.push((i, j, v));
                if i != j {
                    t.push((j, i, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn diagonal_matrix() {
        let a = CsrMatrix::from_diagonal(&[-2.0, 1.0, 3.0, -0.5]);
        let i = inertia(&a, 0.0).unwrap();
        assert_eq!((i.negative, i.positive), (2, 2));
        assert_eq!(count_below(&a, 1.0, Side::Below).unwrap(), 2);
        assert_eq!(count_below(&a, 1.0, Side::AtOrBelow).unwrap(), 3);
    }

    #[test]
    fn needs_two_by_two_pivots() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let i = inertia(&a, 0.0).unwrap();
        assert_eq!((i.negative, i.positive), (1, 1));
    }

    #[test]
    fn matches_dense_eigenvalues_on_random_band() {
        for seed in 0..12 {
            let zero_diag = seed % 2 == 0;
            let a = random_symmetric_banded(60, 1 + (seed as usize % 5), zero_diag, seed);
            for sigma in [-1.3, -0.2, 0.05, 0.7, 2.1] {
                let (neg, pos) = dense_count(&a, sigma);
                let i = inertia(&a, sigma).unwrap();
                assert_eq!((i.negative, i.positive), (neg, pos), "seed {seed} sigma {sigma}");
            }
        }
    }

    #[test]
    fn saddle_like_zero_blocks() {
        // [[0, B^T], [B, 0]] interleaved, the pattern of the optimality systems
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((2 * i, 2 * i + 1, 2.0));
            t.push((2 * i + 1, 2 * i, 2.0));
            if i + 1 < n {
                t.push((2 * i, 2 * i + 3, -1.0));
                t.push((2 * i + 3, 2 * i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(2 * n, 2 * n, &t);
        for sigma in [-2.5, -0.3, 0.4, 1.7] {
            let (neg, pos) = dense_count(&a, sigma);
            let i = inertia(&a, sigma).unwrap();
            assert_eq!((i.negative, i.positive), (neg, pos));
        }
    }

    #[test]
    fn shift_at_eigenvalue_is_nudged() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 2.0, 3.0]);
        assert!(inertia(&a, 2.0).is_err());
        assert_eq!(count_below(&a, 2.0, Side::Below).unwrap(), 1);
        assert_eq!(count_below(&a, 2.0, Side::AtOrBelow).unwrap(), 3);
    }
}
