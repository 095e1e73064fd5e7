//! Dense symmetric linear algebra: eigenvalues and shifted log-determinants.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Once;

use faer::{Mat, Par, Side};

use crate::error::{Error, Result};
use crate::model::DataMatrix;

static SEQUENTIAL: Once = Once::new();

/// Trials are parallelized at the outer level; keep faer single-threaded so
/// results do not depend on how its kernels split work.
fn sequential_kernels() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

pub fn matrix_hash(m: &DataMatrix) -> u64 {
    let mut h = DefaultHasher::new();
    m.n().hash(&mut h);
    for v in m.entries() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// All eigenvalues, descending.
pub fn eigenvalues_desc(m: &DataMatrix) -> Result<Vec<f64>> {
    sequential_kernels();
    let mut values =
        m.as_faer().self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigensolver { hash: matrix_hash(m) })?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver { hash: matrix_hash(m) });
    }
    values.reverse();
    Ok(values)
}

/// Eigenvalues (descending) and orthonormal eigenvectors (columns in the same order).
pub fn eigen_decomposition(m: &DataMatrix) -> Result<(Vec<f64>, Mat<f64>)> {
    sequential_kernels();
    let evd = m.as_faer().self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver { hash: matrix_hash(m) })?;
    let n = m.n();
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).rev().map(|i| s[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// `||M - Q diag(values) Q^T||_F`.
pub fn reconstruction_residual(m: &DataMatrix, values: &[f64], vectors: &Mat<f64>) -> f64 {
    let n = m.n();
    let mut scaled = vectors.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= values[j];
        }
    }
    let recon = &scaled * vectors.transpose();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (m.get(i, j) - recon[(i, j)]).powi(2);
        }
    }
    acc.sqrt()
}

/// `log det(diag I - scale M)` through a Cholesky factorization, or `None`
/// when the shifted matrix is not positive definite.
pub fn shifted_log_det(m: &DataMatrix, diag: f64, scale: f64) -> Option<f64> {
    sequential_kernels();
    let n = m.n();
    let a = Mat::from_fn(n, n, |i, j| {
        let v = -scale * m.get(i, j);
        if i == j {
            v + diag
        } else {
            v
        }
    });
    let llt = a.llt(Side::Lower).ok()?;
    let l = llt.L();
    let mut log_det = 0.0;
    for i in 0..n {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        log_det += d.ln();
    }
    Some(2.0 * log_det)
}
