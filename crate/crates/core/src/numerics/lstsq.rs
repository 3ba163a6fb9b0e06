//! Dense linear least squares via column-scaled Householder QR.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LstsqError {
    #[error("design matrix has {rows} rows but {cols} columns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
}

/// Solves `min ||x b - y||` for `b`.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, LstsqError> {
    let (rows, cols) = x.shape();
    if rows < cols || cols == 0 {
        return Err(LstsqError::Underdetermined { rows, cols });
    }
    // Scale each column to unit norm so that the rank test is meaningful for
    // polynomial columns such as t^2.
    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let norm = x.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = x.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let qr = scaled.qr();
    let r = qr.r();
    let max_diag = (0..cols).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..cols {
        if r[(j, j)].abs() <= 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
            return Err(LstsqError::RankDeficient { column: j });
        }
    }
    let qty = qr.q().transpose() * y;
    let mut z = DVector::zeros(cols);
    for i in (0..cols).rev() {
        let mut acc = qty[i];
        for k in (i + 1)..cols {
            acc -= r[(i, k)] * z[k];
        }
        z[i] = acc / r[(i, i)];
    }
    for (j, s) in scales.iter().enumerate() {
        z[j] /= s;
    }
    Ok(z)
}
