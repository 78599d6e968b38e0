//! Matrix-valued trigonometric polynomials and their multilevel block Toeplitz matrices.
//!
//! A symbol `f: [-pi, pi]^d -> R^{s x s}` is stored through its finitely many
//! Fourier coefficients `f_j`, `j` in `Z^d`, so that
//! `f(theta) = sum_j f_j exp(i <j, theta>)`. The `n`-th Toeplitz matrix has
//! block `(I, L)` equal to `f_{I - L}`, where the multi-indices `I`, `L` are
//! ordered with the first level varying slowest.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Multi-index of a Fourier coefficient.
pub type MultiIndex = Vec<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSymbol<T: Real> {
    d: usize,
    s: usize,
    coeffs: BTreeMap<MultiIndex, DMatrix<T>>,
    real_symmetric: bool,
}

impl<T: Real> MatrixSymbol<T> {
    /// Builds a symbol from `(j, f_j)` pairs; repeated indices are summed.
    ///
    /// With `real_symmetric` set, `f_{-j} = f_j^T` is verified for every stored `j`,
    /// which is exactly the condition for the symbol to be real and symmetric.
    pub fn new(
        d: usize,
        s: usize,
        entries: impl IntoIterator<Item = (MultiIndex, DMatrix<T>)>,
        real_symmetric: bool,
    ) -> Result<Self> {
        if d == 0 || s == 0 {
            return Err(Error::InvalidParameter("symbol needs d >= 1 and s >= 1".into()));
        }
        let mut coeffs: BTreeMap<MultiIndex, DMatrix<T>> = BTreeMap::new();
        for (j, block) in entries {
            if j.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: j.len() });
            }
            if block.nrows() != s || block.ncols() != s {
                return Err(Error::DimensionMismatch { expected: s, found: block.nrows().max(block.ncols()) });
            }
            match coeffs.get_mut(&j) {
                Some(b) => b.zip_apply(&block, |x, y| *x = *x + y),
                None => {
                    coeffs.insert(j, block);
                }
            }
        }
        let sym = Self { d, s, coeffs, real_symmetric: false };
        if real_symmetric && !sym.has_hermitian_coefficients() {
            return Err(Error::InvalidParameter(
                "coefficients violate f_{-j} = f_j^T for a real-symmetric symbol".into(),
            ));
        }
        Ok(Self { real_symmetric, ..sym })
    }

    fn has_hermitian_coefficients(&self) -> bool {
        let tol = T::epsilon() * T::lit(8.0) * (T::one() + self.coefficient_scale());
        let zero = DMatrix::from_element(self.s, self.s, T::zero());
        self.coeffs.iter().all(|(j, b)| {
            let neg: MultiIndex = j.iter().map(|v| -v).collect();
            let other = self.coeffs.get(&neg).unwrap_or(&zero);
            b.iter().zip(other.transpose().iter()).all(|(x, y)| (*x - *y).abs() <= tol)
        })
    }

    fn coefficient_scale(&self) -> T {
        self.coeffs.values().flat_map(|b| b.iter()).fold(T::zero(), |m, v| m + v.abs())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn is_real_symmetric(&self) -> bool {
        self.real_symmetric
    }

    /// Stored coefficient `f_j` (zero when not stored).
    pub fn coefficient(&self, j: &[i64]) -> DMatrix<T> {
        self.coeffs
            .get(j)
            .cloned()
            .unwrap_or_else(|| DMatrix::from_element(self.s, self.s, T::zero()))
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<T>)> {
        self.coeffs.iter()
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.d != other.d || self.s != other.s {
            return Err(Error::DimensionMismatch { expected: self.s, found: other.s });
        }
        let entries = self
            .coeffs
            .iter()
            .map(|(j, m)| (j.clone(), m.map(|v| v * a)))
            .chain(other.coeffs.iter().map(|(j, m)| (j.clone(), m.map(|v| v * b))));
        Self::new(self.d, self.s, entries, self.real_symmetric && other.real_symmetric)
    }

    /// Evaluates `sum_j f_j exp(i <j, theta>)`.
    ///
    /// The imaginary part must cancel: anything above `1e-13` relative to the
    /// coefficient size is reported as [`Error::NonRealSymbol`].
    pub fn eval(&self, theta: &[T]) -> Result<DMatrix<T>> {
        if theta.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: theta.len() });
        }
        let mut re = DMatrix::from_element(self.s, self.s, T::zero());
        let mut im = DMatrix::from_element(self.s, self.s, T::zero());
        for (j, b) in &self.coeffs {
            let phase = j.iter().zip(theta).fold(T::zero(), |acc, (&jt, &th)| acc + T::lit(jt as f64) * th);
            let (sn, cs) = phase.sin_cos();
            re.zip_apply(b, |x, y| *x = *x + y * cs);
            im.zip_apply(b, |x, y| *x = *x + y * sn);
        }
        let imag = im.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::lit(1e-13).max(T::epsilon() * T::lit(64.0)) * (T::one() + self.coefficient_scale());
        if imag > tol {
            return Err(Error::NonRealSymbol { imag: imag.as_f64() });
        }
        Ok(re)
    }

    /// Builds `T_n(f)`; coefficients that do not fit (`|j_t| >= n_t`) are an error.
    pub fn toeplitz(&self, n: &[usize]) -> Result<CsrMatrix<T>> {
        let (m, dropped) = self.toeplitz_truncating(n)?;
        match dropped.into_iter().next() {
            Some(index) => Err(Error::OutOfBand { index, size: n.to_vec() }),
            None => Ok(m),
        }
    }

    /// Builds `T_n(f)`, returning the indices of coefficients too long to appear in it.
    pub fn toeplitz_truncating(&self, n: &[usize]) -> Result<(CsrMatrix<T>, Vec<MultiIndex>)> {
        if n.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: n.len() });
        }
        if n.contains(&0) {
            return Err(Error::InvalidParameter("Toeplitz sizes must be positive".into()));
        }
        let levels: usize = n.iter().product();
        let s = self.s;
        let mut dropped = Vec::new();
        let mut trip = Vec::new();
        for (j, block) in &self.coeffs {
            if block.iter().all(|v| *v == T::zero()) {
                continue;
            }
            if j.iter().zip(n).any(|(&jt, &nt)| jt.unsigned_abs() as usize >= nt) {
                dropped.push(j.clone());
                continue;
            }
            // every block row I whose partner L = I - j stays inside the grid
            for flat in 0..levels {
                let mut rem = flat;
                let mut col = 0usize;
                let mut stride = 1usize;
                let mut inside = true;
                for t in (0..self.d).rev() {
                    let it = (rem % n[t]) as i64;
                    rem /= n[t];
                    let lt = it - j[t];
                    if lt < 0 || lt >= n[t] as i64 {
                        inside = false;
                        break;
                    }
                    col += lt as usize * stride;
                    stride *= n[t];
                }
                if !inside {
                    continue;
                }
                for a in 0..s {
                    for b in 0..s {
                        let v = block[(a, b)];
                        if v != T::zero() {
                            trip.push((flat * s + a, col * s + b, v));
                        }
                    }
                }
            }
        }
        Ok((CsrMatrix::from_triplets(levels * s, levels * s, &trip), dropped))
    }

    /// Converts to the JSON document `{d, s, entries: [{j, block}]}`.
    pub fn to_document(&self) -> SymbolDocument {
        SymbolDocument {
            d: self.d,
            s: self.s,
            entries: self
                .coeffs
                .iter()
                .map(|(j, b)| SymbolEntry {
                    j: j.clone(),
                    block: (0..self.s).map(|r| (0..self.s).map(|c| b[(r, c)].as_f64()).collect()).collect(),
                })
                .collect(),
        }
    }

    /// Reads a JSON document; the real-symmetric flag is set when the coefficients allow it.
    pub fn from_document(doc: &SymbolDocument) -> Result<Self> {
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in &doc.entries {
            if e.block.len() != doc.s || e.block.iter().any(|r| r.len() != doc.s) {
                return Err(Error::Parse(format!("block for {:?} is not {}x{}", e.j, doc.s, doc.s)));
            }
            let m = DMatrix::from_fn(doc.s, doc.s, |r, c| T::lit(e.block[r][c]));
            entries.push((e.j.clone(), m));
        }
        let sym = Self::new(doc.d, doc.s, entries, false)?;
        let flag = sym.has_hermitian_coefficients();
        Ok(Self { real_symmetric: flag, ..sym })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// Serialized form of a [`MatrixSymbol`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDocument {
    pub d: usize,
    pub s: usize,
    pub entries: Vec<SymbolEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub j: Vec<i64>,
    pub block: Vec<Vec<f64>>,
}

fn scalar_symbol<T: Real>(entries: &[([i64; 2], f64)]) -> MatrixSymbol<T> {
    let e = entries.iter().map(|(j, v)| (j.to_vec(), DMatrix::from_element(1, 1, T::lit(*v))));
    MatrixSymbol::new(2, 1, e, true).expect("predefined symbol is well formed")
}

const AXES: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];
const DIAGONALS: [[i64; 2]; 2] = [[1, 1], [-1, -1]];

/// `m(theta) = 1/2 + cos(theta_1)/6 + cos(theta_2)/6 + cos(theta_1 + theta_2)/6`, the scaled P1 mass symbol.
pub fn mass_symbol<T: Real>() -> MatrixSymbol<T> {
    let mut e = vec![([0, 0], 0.5)];
    e.extend(AXES.iter().chain(&DIAGONALS).map(|j| (*j, 1.0 / 12.0)));
    scalar_symbol(&e)
}

/// `kappa(theta) = 4 - 2 cos(theta_1) - 2 cos(theta_2)`, the P1 stiffness symbol.
pub fn stiffness_symbol<T: Real>() -> MatrixSymbol<T> {
    let mut e = vec![([0, 0], 4.0)];
    e.extend(AXES.iter().map(|j| (*j, -1.0)));
    scalar_symbol(&e)
}

/// The 3x3 symbol of the permuted saddle-point matrix for regularization `alpha`.
pub fn saddle_symbol<T: Real>(alpha: T) -> Result<MatrixSymbol<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter("alpha must be positive".into()));
    }
    let l = |v: f64| T::lit(v);
    let twelfth = l(1.0 / 12.0);
    let f00 = DMatrix::from_row_slice(3, 3, &[
        l(0.0), l(0.0), l(4.0),
        l(0.0), alpha / l(2.0), l(-0.5),
        l(4.0), l(-0.5), l(0.0),
    ]);
    let f_axis = DMatrix::from_row_slice(3, 3, &[
        l(0.0), l(0.0), l(-1.0),
        l(0.0), alpha * twelfth, -twelfth,
        l(-1.0), -twelfth, l(0.0),
    ]);
    let f_diag = DMatrix::from_row_slice(3, 3, &[
        l(0.0), l(0.0), l(0.0),
        l(0.0), alpha * twelfth, -twelfth,
        l(0.0), -twelfth, l(0.0),
    ]);
    let mut e = vec![(vec![0, 0], f00)];
    e.extend(AXES.iter().map(|j| (j.to_vec(), f_axis.clone())));
    e.extend(DIAGONALS.iter().map(|j| (j.to_vec(), f_diag.clone())));
    MatrixSymbol::new(2, 3, e, true)
}

/// The predefined triple `(m, kappa, f(alpha))`.
pub fn predefined_symbols<T: Real>(alpha: T) -> Result<(MatrixSymbol<T>, MatrixSymbol<T>, MatrixSymbol<T>)> {
    Ok((mass_symbol(), stiffness_symbol(), saddle_symbol(alpha)?))
}
