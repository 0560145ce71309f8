//! Plain PCA and CCA, the two endpoints of the CoCA path.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::error::{CocaError, Result};
use crate::linalg::{self, norm};

/// Leading right singular vector and singular value of `x`.
pub fn pca_leading(x: ArrayView2<f64>) -> Result<(Array1<f64>, f64)> {
    let t = linalg::leading_singular_triplet(x, 1e-13, 100_000)?;
    Ok((t.v, t.d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcaSolution {
    pub w1: Array1<f64>,
    pub w2: Array1<f64>,
    pub correlation: f64,
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn inv_sqrt(gram: &Array2<f64>, which: &str) -> Result<Array2<f64>> {
    let eig = SymmetricEigen::new(to_na(gram));
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, &e| m.max(e.abs()));
    let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&e| e <= floor) {
        return Err(CocaError::Singular(format!(
            "{which} Gram matrix is singular; pass a positive ridge"
        )));
    }
    let p = gram.nrows();
    let q = &eig.eigenvectors;
    Ok(Array2::from_shape_fn((p, p), |(i, j)| {
        (0..p).map(|k| q[(i, k)] * q[(j, k)] / eig.eigenvalues[k].sqrt()).sum()
    }))
}

/// Leading canonical pair, normalized so `‖X1w1‖ = ‖X2w2‖ = 1` with
/// nonnegative correlation.
pub fn cca_leading(x1: ArrayView2<f64>, x2: ArrayView2<f64>, ridge: f64) -> Result<CcaSolution> {
    if x1.nrows() != x2.nrows() {
        return Err(CocaError::DimensionMismatch(format!(
            "views have {} and {} rows",
            x1.nrows(),
            x2.nrows()
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(CocaError::InvalidInput(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let ridged = |x: ArrayView2<f64>| {
        let mut g = x.t().dot(&x);
        g.diag_mut().mapv_inplace(|v| v + ridge);
        g
    };
    let c11 = inv_sqrt(&ridged(x1), "view-1")?;
    let c22 = inv_sqrt(&ridged(x2), "view-2")?;
    let m = c11.dot(&x1.t().dot(&x2)).dot(&c22);

    if m.iter().all(|&v| v.abs() < 1e-300) {
        // Orthogonal column spaces: any unit-variance pair is canonical.
        let w1 = c11.column(0).to_owned();
        let w2 = c22.column(0).to_owned();
        return Ok(normalize(x1, x2, CcaSolution { w1, w2, correlation: 0.0 }));
    }
    let t = linalg::leading_singular_triplet(m.view(), 1e-14, 100_000)?;
    let sol = CcaSolution {
        w1: c11.dot(&t.u),
        w2: c22.dot(&t.v),
        correlation: t.d,
    };
    Ok(normalize(x1, x2, sol))
}

fn normalize(x1: ArrayView2<f64>, x2: ArrayView2<f64>, mut s: CcaSolution) -> CcaSolution {
    let n1 = norm(x1.dot(&s.w1).view());
    let n2 = norm(x2.dot(&s.w2).view());
    if n1 > 0.0 {
        s.w1 /= n1;
    }
    if n2 > 0.0 {
        s.w2 /= n2;
    }
    if linalg::canonicalize_sign(&mut s.w1) {
        s.w2.mapv_inplace(|v| -v);
    }
    s
}
