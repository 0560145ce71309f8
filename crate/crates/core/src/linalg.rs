//! Dense kernels shared by the solvers: leading singular triplet, power
//! iteration for a generic linear operator, and SPD solves.
//!
//! Every vector returned here is sign-canonicalized so that its
//! largest-magnitude entry is positive.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{CocaError, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 5000;

/// Leading singular value with its left and right singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub d: f64,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

/// Settings for power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

pub fn norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

/// Flip `x` so its largest-magnitude entry is positive. Returns `true` if
/// the sign was flipped. Ties resolve to the first index.
pub fn canonicalize_sign(x: &mut Array1<f64>) -> bool {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &xi in x.iter() {
        if xi.abs() > best {
            best = xi.abs();
            sign = xi.signum();
        }
    }
    if sign < 0.0 {
        x.mapv_inplace(|v| -v);
        true
    } else {
        false
    }
}

/// Sign-invariant angle (radians) between two nonzero vectors.
///
/// Computed from the chord length so that angles near zero keep full
/// relative precision.
pub fn angle(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return f64::NAN;
    }
    let s = if a.dot(&b) < 0.0 { -1.0 } else { 1.0 };
    let chord = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x / na - s * y / nb;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

/// Seeded start vector: all-ones, perturbed by up to ±5% per entry, normalized.
pub fn start_vector(p: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array1::from_shape_fn(p, |_| {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        1.0 + 0.1 * (u - 0.5)
    });
    let n = norm(w.view());
    w /= n;
    w
}

/// Leading eigenpair of a linear operator by power iteration from the
/// seeded start vector.
///
/// Stops once `‖apply(w) − λw‖ ≤ tol·|λ|`. The operator must have a real,
/// positive dominant eigenvalue for the result to be meaningful.
pub fn leading_eigenvector<F>(apply: F, p: usize, cfg: &PowerConfig) -> Result<(Array1<f64>, f64)>
where
    F: FnMut(&Array1<f64>) -> Array1<f64>,
{
    leading_eigenvector_from(apply, start_vector(p, cfg.seed), cfg.tol, cfg.max_iter)
}

/// Power iteration from a caller-supplied start vector (used for warm starts).
pub fn leading_eigenvector_from<F>(
    mut apply: F,
    start: Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, f64)>
where
    F: FnMut(&Array1<f64>) -> Array1<f64>,
{
    if !(tol > 0.0) || max_iter == 0 {
        return Err(CocaError::InvalidInput(
            "power iteration needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let p = start.len();
    if p == 0 {
        return Err(CocaError::InvalidInput("empty operator".into()));
    }
    let mut w = start;
    let n0 = norm(w.view());
    if !(n0 > 0.0) || !n0.is_finite() {
        w = start_vector(p, 0);
    } else {
        w /= n0;
    }

    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let y = apply(&w);
        if y.len() != p {
            return Err(CocaError::DimensionMismatch(format!(
                "operator maps length {p} to length {}",
                y.len()
            )));
        }
        let ny = norm(y.view());
        if !ny.is_finite() {
            return Err(CocaError::Degenerate("operator produced non-finite values".into()));
        }
        if ny == 0.0 {
            return Err(CocaError::Degenerate(
                "operator annihilates the iterate (zero operator?)".into(),
            ));
        }
        let lambda = w.dot(&y);
        residual = norm((&y - &(lambda * &w)).view());
        if residual <= tol * lambda.abs() {
            let mut out = w;
            canonicalize_sign(&mut out);
            return Ok((out, lambda));
        }
        w = y / ny;
        if iter == max_iter {
            break;
        }
    }
    canonicalize_sign(&mut w);
    Err(CocaError::NotConverged {
        iterations: max_iter,
        residual,
        last: w.to_vec(),
    })
}

/// Leading singular triplet of `x` by power iteration on the smaller Gram
/// matrix.
pub fn leading_singular_triplet(x: ArrayView2<f64>, tol: f64, max_iter: usize) -> Result<SingularTriplet> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(CocaError::InvalidInput("matrix has an empty dimension".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CocaError::InvalidInput("matrix has non-finite entries".into()));
    }
    let cfg = PowerConfig {
        tol,
        max_iter,
        seed: 0,
    };
    // Eigen residual tol·d² on the Gram matrix gives ‖Xᵀu − dv‖ ≤ tol·d.
    let (mut v, mut u, d) = if p <= n {
        let (v, ev) = leading_eigenvector(|w| x.t().dot(&x.dot(w)), p, &cfg)?;
        let xv = x.dot(&v);
        let d = norm(xv.view());
        if d == 0.0 || ev <= 0.0 {
            return Err(CocaError::Degenerate("matrix is zero".into()));
        }
        (v, xv / d, d)
    } else {
        let (u, ev) = leading_eigenvector(|w| x.dot(&x.t().dot(w)), n, &cfg)?;
        let xtu = x.t().dot(&u);
        let d = norm(xtu.view());
        if d == 0.0 || ev <= 0.0 {
            return Err(CocaError::Degenerate("matrix is zero".into()));
        }
        (xtu / d, u, d)
    };
    if canonicalize_sign(&mut v) {
        u.mapv_inplace(|e| -e);
    }
    Ok(SingularTriplet { d, u, v })
}

/// Cholesky factor `A = LLᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: ArrayView2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c || r == 0 {
            return Err(CocaError::DimensionMismatch(format!(
                "Cholesky needs a nonempty square matrix, got {r}x{c}"
            )));
        }
        let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..r {
            for j in 0..i {
                if (a[[i, j]] - a[[j, i]]).abs() > 1e-10 * scale {
                    return Err(CocaError::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut l = Array2::<f64>::zeros((r, r));
        for j in 0..r {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            // Pivots lost to cancellation count as zero.
            if !(diag > 1e-14 * a[[j, j]].abs()) {
                return Err(CocaError::NotPositiveDefinite { pivot: j, value: diag });
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in (j + 1)..r {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length");
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        y
    }
}

/// Solve `Ax = b` for symmetric positive-definite `A`, with one step of
/// iterative refinement.
pub fn spd_solve(a: ArrayView2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    if b.len() != a.nrows() {
        return Err(CocaError::DimensionMismatch(format!(
            "matrix is {}x{}, rhs has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let chol = Cholesky::factor(a)?;
    let mut x = chol.solve(b);
    let r = b - &a.dot(&x);
    x += &chol.solve(&r);
    Ok(x)
}

/// Conjugate gradients for an SPD operator given only as a matvec.
/// Returns the iterate once `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn conjugate_gradient<F>(mut apply: F, b: &Array1<f64>, tol: f64, max_iter: usize) -> Result<Array1<f64>>
where
    F: FnMut(&Array1<f64>) -> Array1<f64>,
{
    let nb = norm(b.view());
    let mut x = Array1::<f64>::zeros(b.len());
    if nb == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * nb {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(CocaError::Singular("operator is not positive definite".into()));
        }
        let alpha = rr / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_new = r.dot(&r);
        p = &r + &(rr_new / rr * &p);
        rr = rr_new;
    }
    if rr.sqrt() <= tol * nb {
        Ok(x)
    } else {
        Err(CocaError::NotConverged {
            iterations: max_iter,
            residual: rr.sqrt() / nb,
            last: x.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_triplet() {
        let x = array![[3.0, 0.0], [0.0, 1.0]];
        let t = leading_singular_triplet(x.view(), 1e-12, 5000).unwrap();
        assert!((t.d - 3.0).abs() < 1e-12);
        assert!((t.v[0] - 1.0).abs() < 1e-12 && t.v[1].abs() < 1e-6);
        assert!((t.u[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_symmetric_triplet() {
        let x = array![[1.0, 1.0], [1.0, 1.0]];
        let t = leading_singular_triplet(x.view(), 1e-12, 5000).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t.d - 2.0).abs() < 1e-12);
        assert!((t.v[0] - h).abs() < 1e-12 && (t.v[1] - h).abs() < 1e-12);
        assert!((t.u[0] - h).abs() < 1e-12 && (t.u[1] - h).abs() < 1e-12);
    }

    #[test]
    fn wide_matrix_uses_row_gram() {
        let x = array![[1.0, 2.0, 0.0, -1.0], [0.5, 0.0, 3.0, 1.0]];
        let t = leading_singular_triplet(x.view(), 1e-12, 5000).unwrap();
        let r1 = &x.dot(&t.v) - &(t.d * &t.u);
        let r2 = &x.t().dot(&t.u) - &(t.d * &t.v);
        assert!(norm(r1.view()) <= 1e-10 * t.d);
        assert!(norm(r2.view()) <= 1e-10 * t.d);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            leading_singular_triplet(x.view(), 1e-8, 100),
            Err(CocaError::Degenerate(_))
        ));
    }

    #[test]
    fn identity_operator() {
        let (w, l) = leading_eigenvector(|v| v.clone(), 3, &PowerConfig::default()).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
        assert!((norm(w.view()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_operator() {
        let d = array![5.0, 2.0, 1.0];
        let cfg = PowerConfig {
            tol: 1e-12,
            ..Default::default()
        };
        let (w, l) = leading_eigenvector(|v| &d * v, 3, &cfg).unwrap();
        assert!((l - 5.0).abs() < 1e-10);
        assert!((w[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_operator_is_degenerate() {
        let r = leading_eigenvector(|v| Array1::zeros(v.len()), 4, &PowerConfig::default());
        assert!(matches!(r, Err(CocaError::Degenerate(_))));
    }

    #[test]
    fn oscillating_operator_fails_to_converge() {
        // eigenvalues +1 and -1: no dominant eigenvalue
        let r = leading_eigenvector(|v| array![v[1], v[0]] * array![1.0, -1.0], 2, &PowerConfig {
            tol: 1e-10,
            max_iter: 50,
            seed: 3,
        });
        match r {
            Err(CocaError::NotConverged { iterations, last, .. }) => {
                assert_eq!(iterations, 50);
                assert_eq!(last.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn power_iteration_is_deterministic() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let cfg = PowerConfig {
            seed: 17,
            ..Default::default()
        };
        let r1 = leading_eigenvector(|v| a.dot(v), 3, &cfg).unwrap();
        let r2 = leading_eigenvector(|v| a.dot(v), 3, &cfg).unwrap();
        assert_eq!(r1.0, r2.0);
        assert_eq!(r1.1.to_bits(), r2.1.to_bits());
    }

    #[test]
    fn spd_identity_and_diagonal() {
        let b = array![1.0, 2.0, 3.0];
        let x = spd_solve(Array2::eye(3).view(), &b).unwrap();
        assert_eq!(x, b);
        let x = spd_solve(array![[2.0, 0.0], [0.0, 4.0]].view(), &array![2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spd_reports_failing_pivot() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 1.0, 2.0], [0.0, 2.0, 1.0]];
        match spd_solve(a.view(), &array![1.0, 1.0, 1.0]) {
            Err(CocaError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn spd_rejects_asymmetric() {
        let a = array![[2.0, 1.0], [0.0, 2.0]];
        assert!(matches!(
            spd_solve(a.view(), &array![1.0, 1.0]),
            Err(CocaError::InvalidInput(_))
        ));
    }

    #[test]
    fn cg_matches_cholesky() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = array![1.0, -2.0, 0.5];
        let x1 = spd_solve(a.view(), &b).unwrap();
        let x2 = conjugate_gradient(|v| a.dot(v), &b, 1e-14, 100).unwrap();
        assert!(norm((&x1 - &x2).view()) < 1e-12);
    }

    #[test]
    fn canonical_sign() {
        let mut x = array![0.1, -0.9, 0.5];
        assert!(canonicalize_sign(&mut x));
        assert_eq!(x, array![-0.1, 0.9, -0.5]);
        assert!(!canonicalize_sign(&mut x));
    }

    #[test]
    fn small_angles_are_accurate() {
        let a = array![1.0, 0.0];
        let b = array![1.0, 1e-9];
        assert!((angle(a.view(), b.view()) - 1e-9).abs() < 1e-20);
        assert!(angle(a.view(), (-&b).view()) < 1.1e-9);
    }
}
