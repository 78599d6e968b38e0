//! MatrixMarket export of assembled matrices and right-hand sides.

use std::io::Write;

use crate::error::Result;
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Writes `a` in MatrixMarket coordinate format (1-based, general).
pub fn write_matrix_market<T: Real, W: Write>(a: &CsrMatrix<T>, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v.as_f64())?;
    }
    Ok(())
}

/// Writes `b` as a MatrixMarket dense column.
pub fn write_vector_market<T: Real, W: Write>(b: &[T], mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", b.len())?;
    for v in b {
        writeln!(w, "{:e}", v.as_f64())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_round_trip() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.5), (1, 2, -0.25)]);
        let mut out = Vec::new();
        write_matrix_market(&a, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2 3 2");
        let parsed: Vec<(usize, usize, f64)> = lines[2..]
            .iter()
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].parse::<usize>().unwrap() - 1, f[1].parse::<usize>().unwrap() - 1, f[2].parse().unwrap())
            })
            .collect();
        assert_eq!(CsrMatrix::from_triplets(2, 3, &parsed).to_dense(), a.to_dense());
    }

    #[test]
    fn vector_layout() {
        let mut out = Vec::new();
        write_vector_market(&[1.0f64, 0.1], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1), Some("2 1"));
        assert_eq!(text.lines().nth(3).unwrap().parse::<f64>().unwrap(), 0.1);
    }
}
