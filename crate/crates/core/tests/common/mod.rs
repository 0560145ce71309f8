//! Test-side oracles, written independently of the library kernels.
#![allow(dead_code)]

use coca::data::{standardize, MultiViewData};
use coca::simulate::NormalStream;
use ndarray::{Array1, Array2};

pub fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = NormalStream::new(seed);
    Array2::from_shape_fn((n, p), |_| rng.normal())
}

pub fn centered(x1: Array2<f64>, x2: Array2<f64>) -> MultiViewData {
    standardize(&MultiViewData::new(x1, x2).unwrap(), false).0
}

/// Rescale so that `XᵀX` is the sample covariance.
pub fn cov_scaled(d: &MultiViewData) -> MultiViewData {
    let s = 1.0 / (d.n() as f64).sqrt();
    MultiViewData::new(d.x1() * s, d.x2() * s).unwrap()
}

pub fn vnorm(a: &Array1<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Angle between the lines spanned by `a` and `b`.
pub fn line_angle(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let c = (a.dot(b) / (vnorm(a) * vnorm(b))).abs();
    // acos loses accuracy near 1; use the sine form
    let s = (1.0 - c * c).max(0.0).sqrt();
    s.atan2(c)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues
/// descending, eigenvectors in the columns.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let vals = order.iter().map(|&i| a[[i, i]]).collect();
    let vecs = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (vals, vecs)
}

/// One-sided (Hestenes) Jacobi SVD. Returns singular values descending
/// and the right singular vectors as columns.
pub fn jacobi_svd(x: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let p = x.ncols();
    let mut a = x.clone();
    let mut v = Array2::<f64>::eye(p);
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let ai = a.column(i).to_owned();
                let aj = a.column(j).to_owned();
                let alpha = ai.dot(&ai);
                let beta = aj.dot(&aj);
                let gamma = ai.dot(&aj);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..a.nrows() {
                    let (x1, x2) = (a[[k, i]], a[[k, j]]);
                    a[[k, i]] = c * x1 - s * x2;
                    a[[k, j]] = s * x1 + c * x2;
                }
                for k in 0..p {
                    let (y1, y2) = (v[[k, i]], v[[k, j]]);
                    v[[k, i]] = c * y1 - s * y2;
                    v[[k, j]] = s * y1 + c * y2;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<f64> = (0..p).map(|j| vnorm(&a.column(j).to_owned())).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let vals = order.iter().map(|&i| sv[i]).collect();
    let vecs = Array2::from_shape_fn((p, p), |(r, c)| v[[r, order[c]]]);
    (vals, vecs)
}

pub fn oracle_pca(x: &Array2<f64>) -> (Array1<f64>, f64) {
    let (s, v) = jacobi_svd(x);
    (v.column(0).to_owned(), s[0])
}

fn inv_sqrt(g: &Array2<f64>) -> Array2<f64> {
    let (vals, vecs) = jacobi_eigen(g);
    let p = g.nrows();
    Array2::from_shape_fn((p, p), |(i, j)| {
        (0..p).map(|k| vecs[[i, k]] * vecs[[j, k]] / vals[k].sqrt()).sum()
    })
}

/// Leading canonical pair and correlation by whitening then SVD.
pub fn oracle_cca(x1: &Array2<f64>, x2: &Array2<f64>) -> (Array1<f64>, Array1<f64>, f64) {
    let a = inv_sqrt(&x1.t().dot(x1));
    let b = inv_sqrt(&x2.t().dot(x2));
    let m = a.dot(&x1.t().dot(x2)).dot(&b);
    let (s, v) = jacobi_svd(&m);
    let right = v.column(0).to_owned();
    let left = m.dot(&right) / s[0];
    (a.dot(&left), b.dot(&right), s[0])
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

pub fn lasso_objective(a: &Array2<f64>, y: &Array1<f64>, lambda: f64, b: &Array1<f64>) -> f64 {
    let r = y - &a.dot(b);
    r.dot(&r) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Proximal gradient with a fixed `1/L` step for `‖y − Aβ‖² + λ‖β‖₁`, run on the Gram form.
pub fn ista(a: &Array2<f64>, y: &Array1<f64>, lambda: f64, max_iter: usize) -> Array1<f64> {
    let p = a.ncols();
    let gram = a.t().dot(a);
    let aty = a.t().dot(y);
    let (evals, _) = jacobi_eigen(&gram);
    let top = evals.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Array1::zeros(p);
    }
    let step = 1.0 / (2.0 * top * (1.0 + 1e-12));
    let mut b = Array1::<f64>::zeros(p);
    for _ in 0..max_iter {
        let grad = 2.0 * (gram.dot(&b) - &aty);
        let cand = Array1::from_shape_fn(p, |j| soft(b[j] - step * grad[j], step * lambda));
        let moved = vnorm(&(&cand - &b));
        b = cand;
        if moved <= 1e-15 * vnorm(&b).max(1.0) {
            break;
        }
    }
    b
}

/// KKT residual for `‖y − Aβ‖² + λ‖β‖₁`, computed directly.
pub fn oracle_kkt(a: &Array2<f64>, y: &Array1<f64>, lambda: f64, b: &Array1<f64>) -> f64 {
    let g = 2.0 * a.t().dot(&(&a.dot(b) - y));
    g.iter()
        .zip(b.iter())
        .map(|(&gj, &bj)| {
            if bj != 0.0 {
                (gj + lambda * bj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
