//! Symbols, spectral localization and block preconditioners for the saddle-point
//! systems of distributed elliptic optimal control with P1 finite elements.

pub mod banded;
pub mod error;
pub mod fem;
pub mod incomplete;
pub mod inertia;
pub mod io;
pub mod krylov;
pub mod precond;
pub mod saddle;
pub mod scalar;
pub mod sparse;
pub mod spectra;
pub mod toeplitz;

pub use error::{Error, Result};
pub use scalar::{DenseReal, Real};

pub type SparseMatrix = sparse::CsrMatrix<f64>;
pub type Saddle = saddle::SaddleSystem<f64>;
pub type Symbol = toeplitz::MatrixSymbol<f64>;
pub type Sampling = spectra::SymbolSampling<f64>;
pub type Bounds = spectra::IntervalBounds<f64>;
pub type Report = spectra::SpectralReport<f64>;
pub type Preconditioner = precond::SaddlePreconditioner<f64>;
pub type SolveResult = krylov::KrylovResult<f64>;
