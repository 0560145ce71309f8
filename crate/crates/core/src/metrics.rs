//! Evaluation quantities for fitted components.

use ndarray::{s, Array1, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::coca::CocaModel;
use crate::data::MultiViewData;
use crate::error::{CocaError, Result};
use crate::linalg::norm;

fn unit(v: ArrayView1<f64>, what: &str) -> Result<Array1<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(CocaError::InvalidInput(format!("{what} must be a nonzero finite vector")));
    }
    Ok(&v / n)
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CocaError::DimensionMismatch(format!("lengths {a} and {b}")));
    }
    Ok(())
}

/// `min(‖v̂ − β‖², ‖v̂ + β‖²)` after normalizing both to unit length.
pub fn estimation_error(v_hat: ArrayView1<f64>, beta: ArrayView1<f64>) -> Result<f64> {
    same_len(v_hat.len(), beta.len())?;
    let a = unit(v_hat, "v_hat")?;
    let b = unit(beta, "beta")?;
    let plus: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    let minus: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x + y) * (x + y)).sum();
    Ok(plus.min(minus))
}

/// `‖X − Xṽṽᵀ‖²_F` with `ṽ = v/‖v‖`; a zero `v` reconstructs nothing.
pub fn projection_error(x: ArrayView2<f64>, v: ArrayView1<f64>) -> Result<f64> {
    same_len(x.ncols(), v.len())?;
    let total: f64 = x.iter().map(|a| a * a).sum();
    let nv = norm(v);
    if nv == 0.0 {
        return Ok(total);
    }
    let xv = x.dot(&v) / nv;
    Ok((total - xv.dot(&xv)).max(0.0))
}

/// `(1/n)‖X(I − v̂v̂ᵀ)‖²_F − (1/n)‖X(I − ββᵀ)‖²_F` on test data.
pub fn excess_reconstruction_error(x_test: ArrayView2<f64>, v_hat: ArrayView1<f64>, beta: ArrayView1<f64>) -> Result<f64> {
    same_len(x_test.ncols(), v_hat.len())?;
    same_len(x_test.ncols(), beta.len())?;
    let n = x_test.nrows() as f64;
    if n == 0.0 {
        return Err(CocaError::EmptyInput("test matrix has no rows".into()));
    }
    let a = x_test.dot(&unit(v_hat, "v_hat")?);
    let b = x_test.dot(&unit(beta, "beta")?);
    // The ‖X‖² terms cancel.
    Ok((b.dot(&b) - a.dot(&a)) / n)
}

/// `‖X − u·vᵀ‖²_F` for the training data the model was fitted on.
pub fn reconstruction_error(x: ArrayView2<f64>, model: &CocaModel) -> Result<f64> {
    same_len(x.nrows(), model.u.len())?;
    same_len(x.ncols(), model.v.len())?;
    let mut total = 0.0;
    for (i, row) in x.outer_iter().enumerate() {
        let ui = model.u[i];
        total += row
            .iter()
            .zip(model.v.iter())
            .map(|(a, b)| (a - ui * b).powi(2))
            .sum::<f64>();
    }
    Ok(total)
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    if a.len() != b.len() || a.is_empty() {
        return 0.0;
    }
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale = (ma.abs() + mb.abs()).max(1.0);
    if saa.sqrt() <= 1e-14 * scale * n.sqrt() || sbb.sqrt() <= 1e-14 * scale * n.sqrt() {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// `(‖X1v1 − X2v2‖, corr(X1v1, X2v2))` with v rescaled to `‖Xv‖ = 1`.
pub fn agreement_diagnostics(data: &MultiViewData, model: &CocaModel) -> (f64, f64) {
    let p1 = data.p1();
    if model.v.len() != data.p() {
        return (f64::NAN, 0.0);
    }
    let s1 = data.x1().dot(&model.v.slice(s![..p1]));
    let s2 = data.x2().dot(&model.v.slice(s![p1..]));
    let total = norm((&s1 + &s2).view());
    let gap = if total > 0.0 {
        norm((&s1 - &s2).view()) / total
    } else {
        0.0
    };
    (gap, pearson(s1.view(), s2.view()))
}

/// Held-out evaluation of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub estimation_error: Option<f64>,
    pub excess_reconstruction_error: Option<f64>,
    /// `‖X − Xṽṽᵀ‖²_F` on the evaluation data.
    pub reconstruction_error: f64,
    pub mean_reconstruction_error: f64,
    pub agreement_gap: f64,
    pub score_correlation: f64,
}

/// Evaluate `model` on `data`, optionally against a planted `beta`.
pub fn evaluate(data: &MultiViewData, model: &CocaModel, beta: Option<ArrayView1<f64>>) -> Result<EvalReport> {
    let x = data.concat();
    same_len(x.ncols(), model.v.len())?;
    let reconstruction_error = projection_error(x.view(), model.v.view())?;
    let (agreement_gap, score_correlation) = agreement_diagnostics(data, model);
    let (estimation_error, excess) = match beta {
        Some(b) if model.all_zero => {
            same_len(b.len(), model.v.len())?;
            (None, None)
        }
        Some(b) => (
            Some(estimation_error(model.v.view(), b)?),
            Some(excess_reconstruction_error(x.view(), model.v.view(), b)?),
        ),
        None => (None, None),
    };
    Ok(EvalReport {
        n: data.n(),
        estimation_error,
        excess_reconstruction_error: excess,
        reconstruction_error,
        mean_reconstruction_error: reconstruction_error / data.n() as f64,
        agreement_gap,
        score_correlation,
    })
}
