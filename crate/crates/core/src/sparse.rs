//! Compressed sparse row storage and the handful of kernels the solvers need.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real sparse matrix in CSR layout with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from raw CSR arrays, checking that they describe a valid matrix.
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<T>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 {
            return Err(Error::MalformedMatrix(format!(
                "indptr has length {}, expected {}",
                indptr.len(),
                nrows + 1
            )));
        }
        if indices.len() != data.len() || *indptr.last().unwrap_or(&0) != indices.len() {
            return Err(Error::MalformedMatrix("indices/data length disagree with indptr".into()));
        }
        for i in 0..nrows {
            if indptr[i] > indptr[i + 1] {
                return Err(Error::MalformedMatrix(format!("indptr decreases at row {i}")));
            }
            let cols = &indices[indptr[i]..indptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::MalformedMatrix(format!("row {i} has unsorted or repeated columns")));
            }
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::MalformedMatrix(format!("row {i} has a column index out of range")));
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, T)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut s = T::zero();
                while k < row.len() && row[k].0 == c {
                    s = s + row[k].1;
                    k += 1;
                }
                if s != T::zero() {
                    indices.push(c);
                    data.push(s);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    /// Sparse copy of a dense matrix (exact zeros skipped).
    pub fn from_dense(a: &DMatrix<T>) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != T::zero() {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = A^T x`
    pub fn mul_vec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                y[j] = y[j] + a * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![T::zero(); self.nnz()];
        // rows are visited in order, so each transposed row comes out sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[next[j]] = i;
                data[next[j]] = v;
                next[j] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, data }
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = *v * a);
        out
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.triplets().map(|(i, j, v)| (i, j, a * v)).collect();
        t.extend(other.triplets().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// `A - sigma I`
    pub fn shifted(&self, sigma: T) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let mut t: Vec<_> = self.triplets().collect();
        t.extend((0..self.nrows).map(|i| (i, i, -sigma)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    /// `max |A - B|` entrywise.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.lin_comb(T::one(), other, -T::one()).max_abs()
    }

    /// `max |A - A^T|`.
    pub fn asymmetry(&self) -> T {
        if self.nrows != self.ncols {
            return T::infinity();
        }
        self.max_abs_diff(&self.transpose())
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() == T::zero()
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut a = DMatrix::from_element(self.nrows, self.ncols, T::zero());
        for (i, j, v) in self.triplets() {
            a[(i, j)] = v;
        }
        a
    }

    /// Symmetric permutation `P A P^T` where new index `k` takes old index `perm[k]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(perm.len(), self.nrows);
        let mut inv = vec![usize::MAX; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        assert!(inv.iter().all(|&k| k != usize::MAX), "not a permutation");
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Assembles a block matrix; `None` marks a zero block. Block row heights and
    /// column widths are taken from the first present block in each row/column.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix<T>>>]) -> Result<Self> {
        let br = blocks.len();
        let bc = blocks.first().map_or(0, |r| r.len());
        let mut heights = vec![None; br];
        let mut widths = vec![None; bc];
        for (bi, row) in blocks.iter().enumerate() {
            if row.len() != bc {
                return Err(Error::DimensionMismatch { expected: bc, found: row.len() });
            }
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, val) in [(&mut heights[bi], m.nrows), (&mut widths[bj], m.ncols)] {
                        match *slot {
                            None => *slot = Some(val),
                            Some(v) if v != val => {
                                return Err(Error::DimensionMismatch { expected: v, found: val })
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights
            .into_iter()
            .map(|h| h.ok_or_else(|| Error::InvalidParameter("empty block row".into())))
            .collect::<Result<_>>()?;
        let widths: Vec<usize> = widths
            .into_iter()
            .map(|w| w.ok_or_else(|| Error::InvalidParameter("empty block column".into())))
            .collect::<Result<_>>()?;
        let row_off: Vec<usize> = heights.iter().scan(0, |s, &h| { let o = *s; *s += h; Some(o) }).collect();
        let col_off: Vec<usize> = widths.iter().scan(0, |s, &w| { let o = *s; *s += w; Some(o) }).collect();

        let mut t = Vec::new();
        for (bi, row) in blocks.iter().enumerate() {
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    t.extend(m.triplets().map(|(i, j, v)| (i + row_off[bi], j + col_off[bj], v)));
                }
            }
        }
        Ok(Self::from_triplets(heights.iter().sum(), widths.iter().sum(), &t))
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, -1.0), (2, 2, 4.0), (0, 0, 1.0)])
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.row(0).0, &[0, 2]);
        let z = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, -1.0)]);
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn transpose_and_products_agree() {
        let a = sample();
        let x = [1.0, -2.0, 0.5];
        assert_eq!(a.transpose().mul_vec(&x), a.mul_vec_transpose(&x));
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.mul_vec(&x), vec![3.5, -6.0, 1.0]);
    }

    #[test]
    fn block_assembly_places_offsets() {
        let i2 = CsrMatrix::<f64>::identity(2);
        let b = CsrMatrix::block(&[vec![Some(&i2), None], vec![None, Some(&i2)]]).unwrap();
        assert_eq!(b, CsrMatrix::identity(4));
        assert!(CsrMatrix::<f64>::block(&[vec![None, None]]).is_err());
    }

    #[test]
    fn permutation_is_a_similarity() {
        let a = sample();
        let p = a.permute_symmetric(&[2, 0, 1]);
        assert_eq!(p.get(0, 0), a.get(2, 2));
        assert_eq!(p.get(0, 1), a.get(2, 0));
        assert_eq!(p.permute_symmetric(&[1, 2, 0]), a);
    }

    #[test]
    fn rejects_malformed_arrays() {
        assert!(CsrMatrix::<f64>::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn shift_and_symmetry() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0)]);
        assert!(a.is_symmetric());
        let s = a.shifted(1.0);
        assert_eq!(s.diagonal(), vec![0.0, -1.0]);
        assert!(!sample().is_symmetric());
    }
}
